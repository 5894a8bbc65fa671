#ifndef QSLAM_MAP_DATABASE_HPP
#define QSLAM_MAP_DATABASE_HPP

#include "qslam/geometry.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace qslam {

/// Verification level that resolved a detection. kJdaAssignment marks
/// outcomes of the assignment-problem baseline, which shares the log format.
enum class AssocLevel {
    kNewLandmark = 0,
    kFrameIoU = 1,
    kLabelPosterior = 2,
    kQuadricIoU = 3,
    kPointRatio = 4,
    kJdaAssignment = 5,
};

std::string to_string(AssocLevel level);
AssocLevel assoc_level_from_string(const std::string& s);

/// One 2D detection inside a frame. The 3D payload (camera-frame surface
/// points, camera-frame quadric observation) is what the upstream front-end
/// hands over together with the box; it is absent for spurious detections.
struct Detection {
    Box2D box;
    int label = 0;
    double confidence = 1.0;
    int index = 0;
    std::vector<Vec3> points_cam;
    std::optional<DualQuadric> quadric_cam;
};

/// Association outcome for one detection of a processed frame.
struct DetectionAssociation {
    int landmark_id = -1;
    AssocLevel level = AssocLevel::kNewLandmark;
    double score = 0.0;
    std::optional<Vec3> observed_centroid_cam;
};

/// A camera frame retained (or about to be retained) in the map.
struct KeyFrame {
    int id = -1;                 // source frame id, strictly increasing
    SE3Pose pose;                // T_wc, world-from-camera
    CameraIntrinsics intrinsics;
    std::vector<Detection> detections;
    std::vector<DetectionAssociation> associations;  // parallel to detections

    std::vector<int> associated_landmarks() const;
};

struct MapPoint {
    int id = -1;
    Vec3 position = Vec3::Zero();
    int owner_landmark = -1;
};

/// One record of the ingestion stream: a frame's estimated pose plus its
/// detections. This is the boundary format shared with real detector logs.
struct FrameInput {
    int frame_id = 0;
    SE3Pose pose;  // estimated world-from-camera
    std::vector<Detection> detections;
};

/// A persistent map object backed by a dual quadric.
struct QuadricLandmark {
    int id = -1;
    std::map<int, int> label_histogram;
    int label = 0;  // argmax of the histogram, ties to the lower class id
    std::optional<DualQuadric> quadric;  // world frame, set after n_init observations
    Vec3 centroid = Vec3::Zero();
    double rho = 1.0;  // quality in (0, 1], supplied externally
    std::vector<int> point_ids;
    int last_frame_id = -1;
    std::vector<std::pair<int, int>> observations;  // (frame id, detection index)

    // Running mean accumulators behind `centroid`.
    Vec3 point_sum = Vec3::Zero();
    long point_count = 0;

    int histogram_total() const;
};

/// ObjectIndex: landmark id -> ordered queue of keyframe ids observing it.
using CovisibilityIndex = std::map<int, std::vector<int>>;

struct CovisibleHit {
    int keyframe_id = -1;
    std::vector<int> shared_landmarks;
};

/// Engine thresholds and scales. Defaults are the shipped configuration.
struct EngineConfig {
    double delta1 = 0.5;        // level-1 IoU threshold
    double delta2 = 0.4;        // level-3 back-projection IoU threshold
    double delta3 = 0.5;        // level-4 projected-point ratio threshold
    int window_m = 10;          // sliding-window size in keyframes
    int th_objs = 3;            // minimum co-observed objects for loop candidates
    int th_ids = 1000;          // minimum keyframe-id gap for loop candidates
    double th_score = 0.8;      // normalized similarity acceptance threshold
    int n_consist = 3;          // consecutive-keyframe consistency count
    double alpha = 1.0;         // Dirichlet concentration
    double sigma_pos_px = 40.0; // position-likelihood scale, pixels
    double default_rho = 1.0;   // quality assigned to new landmarks
    int n_init = 3;             // observations before quadric parameters are adopted
    int num_classes = 0;        // label universe size; 0 infers from the map
    double fallback_depth = 3.0;  // meters, for point-free landmark seeding

    // Keyframe selection: pose-change gates plus an optional fixed stride.
    double kf_min_translation = 0.05;  // meters
    double kf_min_rotation_deg = 5.0;
    int kf_every_n = 0;  // 0 = pose-based only

    // Similarity-score variants (see score_topology).
    enum class RotationMeasure { kNormalizedTrace, kFrobenius };
    enum class TranslationMode { kRelative, kAbsolute };
    RotationMeasure rotation_measure = RotationMeasure::kNormalizedTrace;
    TranslationMode translation_mode = TranslationMode::kRelative;
};

/// The pose-point-object map database. Single writer; value-copyable.
class MapDatabase {
public:
    /// Stores a finalized keyframe and updates the covisibility index.
    /// Throws std::invalid_argument on duplicate or out-of-order ids.
    int insert_keyframe(const KeyFrame& kf);

    /// Keyframes sharing >= th_objs landmarks with kf at an id gap >= th_ids,
    /// found by scanning only the KeyFrameQueues of kf's landmarks.
    std::vector<CovisibleHit> covisible_candidates(const KeyFrame& kf, int th_objs,
                                                   int th_ids) const;

    /// Union of landmarks associated by the m most recent keyframes with id < frame_id.
    std::set<int> sliding_window_landmarks(int frame_id, int m) const;

    /// New landmark seeded from an unassociated detection. World-frame seed
    /// points come from the detection's camera-frame payload.
    int create_landmark(const Detection& det, const KeyFrame& frame,
                        const std::vector<Vec3>& seed_points_world, const EngineConfig& cfg);

    /// Absorb one more observation of landmark `id`. Throws on unknown id.
    void update_landmark(int id, const Detection& det, const KeyFrame& frame,
                         const std::vector<Vec3>& points_world, const EngineConfig& cfg);

    bool has_landmark(int id) const { return landmarks_.count(id) > 0; }
    const QuadricLandmark& landmark(int id) const;
    QuadricLandmark& landmark_mutable(int id);
    const std::map<int, QuadricLandmark>& landmarks() const { return landmarks_; }
    const std::map<int, KeyFrame>& keyframes() const { return keyframes_; }
    KeyFrame& keyframe_mutable(int id);
    const std::map<int, MapPoint>& map_points() const { return points_; }
    const CovisibilityIndex& covisibility() const { return covisibility_; }

    std::vector<Vec3> landmark_points(int id) const;
    int distinct_label_count() const;

    static constexpr int kMaxStoredPointsPerLandmark = 256;

private:
    std::map<int, KeyFrame> keyframes_;
    std::map<int, QuadricLandmark> landmarks_;
    std::map<int, MapPoint> points_;
    CovisibilityIndex covisibility_;
    int next_landmark_id_ = 0;
    int next_point_id_ = 0;

    void absorb_points(QuadricLandmark& lm, const std::vector<Vec3>& points_world);
};

}  // namespace qslam

#endif  // QSLAM_MAP_DATABASE_HPP
