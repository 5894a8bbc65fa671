#ifndef QSLAM_HUNGARIAN_HPP
#define QSLAM_HUNGARIAN_HPP

#include "qslam/association.hpp"

#include <optional>
#include <vector>

namespace qslam {

/// Rectangular cost matrix, rows = detections, cols = candidate landmarks.
struct CostMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // row-major

    CostMatrix() = default;
    CostMatrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

/// Minimum-cost one-to-one assignment, row -> column index (-1 unassigned).
/// Requires rows <= cols; every row is assigned. Gating against dummy columns
/// is the caller's concern.
std::vector<int> hungarian_solve(const CostMatrix& costs);

/// Association-distance weights for the joint data association baseline.
struct JdaWeights {
    double label_penalty = 1.0;  // added on class mismatch
    double distance_weight = 1.0;  // centroid pixel distance / image diagonal
    double iou_weight = 1.0;       // complement of box IoU with the projection
    double gate_cost = 0.8;        // dummy-column cost; pricier rows go unassigned
};

/// Joint data association over the full landmark set: build one cost matrix
/// per frame, solve the assignment problem, gate, and create landmarks for
/// the leftovers. Deliberately has no sliding window; its cost grows with
/// the map.
class JdaAssociator {
public:
    explicit JdaAssociator(EngineConfig cfg, JdaWeights weights = {});

    AssociationResult process_frame(const FrameInput& frame, const CameraIntrinsics& k,
                                    MapDatabase& db);

    /// The per-frame cost matrix, exposed for tests. Columns follow the
    /// landmark ids in `landmark_ids` order.
    CostMatrix build_costs(const FrameInput& frame, const CameraIntrinsics& k,
                           const MapDatabase& db, std::vector<int>& landmark_ids) const;

private:
    EngineConfig cfg_;
    JdaWeights weights_;
    int last_frame_id_ = -1;
    std::optional<SE3Pose> last_keyframe_pose_;
};

}  // namespace qslam

#endif  // QSLAM_HUNGARIAN_HPP
