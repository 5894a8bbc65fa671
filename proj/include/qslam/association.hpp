#ifndef QSLAM_ASSOCIATION_HPP
#define QSLAM_ASSOCIATION_HPP

#include "qslam/map_database.hpp"

#include <optional>
#include <set>
#include <vector>

namespace qslam {

/// Which verification levels run. The single-level variants exist for the
/// ablation study; kJda is the assignment-problem baseline.
enum class AssocMethod { kMlv, kTwoD, kPro, kThreeD, kJda };

std::string to_string(AssocMethod method);
AssocMethod assoc_method_from_string(const std::string& s);

struct DetectionOutcome {
    int detection_index = 0;
    int landmark_id = -1;
    AssocLevel level = AssocLevel::kNewLandmark;
    double score = 0.0;
};

struct AssociationResult {
    int frame_id = 0;
    std::vector<DetectionOutcome> outcomes;
    bool inserted_keyframe = false;
    double elapsed_us = 0.0;
};

/// A landmark association carried over from the previous processed frame.
struct PrevAssociation {
    int landmark_id = -1;
    Box2D box;
};

/// Candidate scored by one verification level.
struct LevelHit {
    int landmark_id = -1;
    double score = 0.0;
};

/// The multi-level verification cascade. Processes frames in id order,
/// resolving every detection to an existing landmark or a new one, and
/// inserts keyframes per the configured selection policy.
class Associator {
public:
    explicit Associator(EngineConfig cfg, AssocMethod method = AssocMethod::kMlv);

    AssociationResult process_frame(const FrameInput& frame, const CameraIntrinsics& k,
                                    MapDatabase& db);

    const EngineConfig& config() const { return cfg_; }
    AssocMethod method() const { return method_; }

    // Individual levels, exposed for direct testing. `claimed` holds landmark
    // ids already taken by earlier detections of the current frame.

    /// Level 1: IoU against the previous frame's associated boxes.
    std::optional<LevelHit> verify_2d_frame_iou(const Detection& det,
                                                const std::vector<PrevAssociation>& prev,
                                                const std::set<int>& claimed,
                                                const MapDatabase& db) const;

    /// Level 2: Dirichlet label posterior against sliding-window landmarks.
    std::optional<LevelHit> verify_label_posterior(const Detection& det,
                                                   const std::set<int>& window,
                                                   const std::set<int>& claimed,
                                                   const KeyFrame& frame,
                                                   const MapDatabase& db) const;

    /// Level 3: IoU against back-projected quadrics (landmarks that have one).
    std::optional<LevelHit> verify_quadric_backproj_iou(const Detection& det,
                                                        const std::set<int>& window,
                                                        const std::set<int>& claimed,
                                                        const KeyFrame& frame,
                                                        const MapDatabase& db) const;

    /// Level 4: projected map-point ratio (landmarks without a quadric).
    std::optional<LevelHit> verify_point_backproj_num(const Detection& det,
                                                      const std::set<int>& window,
                                                      const std::set<int>& claimed,
                                                      const KeyFrame& frame,
                                                      const MapDatabase& db) const;

private:
    EngineConfig cfg_;
    AssocMethod method_;
    int last_frame_id_ = -1;
    std::vector<PrevAssociation> prev_associations_;
    std::optional<SE3Pose> last_keyframe_pose_;

    bool should_insert_keyframe(const FrameInput& frame) const;
};

}  // namespace qslam

#endif  // QSLAM_ASSOCIATION_HPP
