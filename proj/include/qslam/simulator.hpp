#ifndef QSLAM_SIMULATOR_HPP
#define QSLAM_SIMULATOR_HPP

#include "qslam/geometry.hpp"
#include "qslam/map_database.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace qslam {

struct SceneObjectSpec {
    int label = 0;
    Vec3 center = Vec3::Zero();
    Vec3 half_axes = Vec3::Ones();
    Mat3 orientation = Mat3::Identity();
    int surface_points = 60;
};

struct TrajectorySpec {
    enum class Type { kCircle, kFigureEight, kWaypoints };
    Type type = Type::kCircle;
    Vec3 center = Vec3::Zero();
    double radius = 3.0;
    double height = 1.0;
    int laps = 1;
    int frames_per_lap = 500;
    bool look_at_center = true;  // otherwise look along the travel direction
    double figure_a = 8.0;       // figure-eight half extents
    double figure_b = 4.0;
    std::vector<SE3Pose> waypoints;
    int waypoint_frames = 0;
};

/// Detector/odometry failure model. Applied per frame in a fixed order:
/// visibility -> occlusion -> false negatives -> box jitter -> label flips
/// -> false-positive injection.
struct NoiseModel {
    double fn_prob = 0.0;
    double fp_rate = 0.0;  // expected false positives per frame (Poisson)
    double flip_prob = 0.0;
    double jitter_px = 0.0;
    bool occlusion = false;
    double occlusion_overlap = 0.7;  // farther-box covered fraction
    double pose_sigma_t = 0.0;       // meters
    double pose_sigma_r = 0.0;       // radians
    Vec3 drift_translation = Vec3::Zero();
    int drift_start_frame = -1;  // -1 disables the drift ramp
};

struct SceneSpec {
    std::vector<SceneObjectSpec> objects;
    TrajectorySpec trajectory;
    CameraIntrinsics intrinsics{500.0, 500.0, 320.0, 240.0, 640.0, 480.0};
    NoiseModel noise;
    std::uint64_t seed = 0;
    double min_box_area = 4.0;  // px^2, smaller projections are invisible
};

/// Pre-noise truth for one frame.
struct FrameTruth {
    int frame_id = 0;
    SE3Pose pose_true;
    std::vector<int> visible_objects;  // after occlusion, before detector noise
    std::vector<int> det_object;       // emitted detection -> object id, -1 for FP
};

struct SceneObject {
    int id = 0;
    int label = 0;
    DualQuadric shape;  // world frame
    std::vector<Vec3> surface_points;  // world frame, deterministic lattice
};

struct RefLoopCriteria {
    double pos_m = 3.0;
    double angle_deg = 80.0;
    int id_gap = 1000;
};

/// Camera poses along the configured path; deterministic, no RNG involved.
std::vector<SE3Pose> generate_trajectory(const TrajectorySpec& spec);

/// All keyframe pairs within the position/angle tolerances and at least
/// id_gap apart. Plain O(n^2) scan; this is the evaluation reference.
std::vector<std::pair<int, int>> reference_loops(
    const std::vector<std::pair<int, SE3Pose>>& keyframe_poses, const RefLoopCriteria& criteria);

/// Deterministic scene renderer. Frames are independent: each draws from an
/// RNG substream derived from (seed, frame id), so render order is free.
class Simulator {
public:
    explicit Simulator(SceneSpec spec);

    int frame_count() const { return static_cast<int>(trajectory_.size()); }
    const std::vector<SE3Pose>& true_trajectory() const { return trajectory_; }
    const std::vector<SceneObject>& objects() const { return objects_; }
    const SceneSpec& spec() const { return spec_; }

    SE3Pose true_pose(int frame_id) const { return trajectory_.at(frame_id); }
    SE3Pose estimated_pose(int frame_id) const;

    std::pair<FrameInput, FrameTruth> render_frame(int frame_id) const;

private:
    SceneSpec spec_;
    std::vector<SE3Pose> trajectory_;
    std::vector<SceneObject> objects_;
    std::vector<int> census_labels_;  // distinct labels, sorted
};

/// Evenly distributed points on an ellipsoid (Fibonacci lattice, scaled).
std::vector<Vec3> fibonacci_ellipsoid(const SceneObjectSpec& obj, int count);

}  // namespace qslam

#endif  // QSLAM_SIMULATOR_HPP
