#include "qslam/hungarian.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qslam {

// Shortest-augmenting-path variant (Jonker-Volgenant style), O(rows^2 * cols).
// Potentials u/v keep reduced costs non-negative; each row is augmented once.
std::vector<int> hungarian_solve(const CostMatrix& costs) {
    const int n = costs.rows;
    const int m = costs.cols;
    if (n == 0) {
        return {};
    }
    if (n > m) {
        throw std::invalid_argument("hungarian_solve: more rows than columns");
    }
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(m + 1, 0.0);
    std::vector<int> match(m + 1, -1);  // column -> row
    std::vector<int> way(m + 1, 0);

    for (int row = 0; row < n; ++row) {
        int j0 = m;  // virtual column holding the current row
        match[j0] = row;
        std::vector<double> min_cost(m + 1, kInf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const int i0 = match[j0];
            double delta = kInf;
            int j1 = -1;
            for (int j = 0; j < m; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = costs.at(i0, j) - u[i0] - v[j];
                if (cur < min_cost[j]) {
                    min_cost[j] = cur;
                    way[j] = j0;
                }
                if (min_cost[j] < delta) {
                    delta = min_cost[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_cost[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != -1);
        // Augment along the alternating path.
        while (j0 != m) {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        }
    }

    std::vector<int> assignment(n, -1);
    for (int j = 0; j < m; ++j) {
        if (match[j] >= 0) {
            assignment[static_cast<size_t>(match[j])] = j;
        }
    }
    return assignment;
}

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

double rotation_angle(const Mat3& r) {
    const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    return std::acos(c);
}

}  // namespace

JdaAssociator::JdaAssociator(EngineConfig cfg, JdaWeights weights)
    : cfg_(std::move(cfg)), weights_(weights) {}

CostMatrix JdaAssociator::build_costs(const FrameInput& frame, const CameraIntrinsics& k,
                                      const MapDatabase& db,
                                      std::vector<int>& landmark_ids) const {
    landmark_ids.clear();
    for (const auto& [id, lm] : db.landmarks()) {
        landmark_ids.push_back(id);
    }
    const int rows = static_cast<int>(frame.detections.size());
    const int n_lm = static_cast<int>(landmark_ids.size());
    // One dummy column per row lets any subset of rows stay unassigned.
    CostMatrix costs(rows, n_lm + rows, weights_.gate_cost);
    const SE3Pose t_cw = frame.pose.inverse();
    const double diagonal = k.diagonal();
    for (int r = 0; r < rows; ++r) {
        const Detection& det = frame.detections[static_cast<size_t>(r)];
        for (int c = 0; c < n_lm; ++c) {
            const QuadricLandmark& lm = db.landmark(landmark_ids[static_cast<size_t>(c)]);
            double cost = 0.0;
            if (lm.label != det.label) {
                cost += weights_.label_penalty;
            }
            const auto projected = project_point(k, t_cw, lm.centroid);
            if (projected.has_value()) {
                cost += weights_.distance_weight * (*projected - det.box.center()).norm() /
                        diagonal;
            } else {
                cost += 10.0;  // behind the camera: effectively ungated
            }
            double iou = 0.0;
            if (lm.quadric.has_value()) {
                const auto box = project_quadric_bbox(k, t_cw, *lm.quadric);
                if (box.has_value()) {
                    iou = iou_2d(det.box, *box);
                }
            }
            cost += weights_.iou_weight * (1.0 - iou);
            costs.at(r, c) = cost;
        }
    }
    return costs;
}

AssociationResult JdaAssociator::process_frame(const FrameInput& frame,
                                               const CameraIntrinsics& k, MapDatabase& db) {
    if (frame.frame_id <= last_frame_id_) {
        throw std::invalid_argument("process_frame: frame ids must increase");
    }
    const auto start = std::chrono::steady_clock::now();

    KeyFrame kf;
    kf.id = frame.frame_id;
    kf.pose = frame.pose;
    kf.intrinsics = k;
    kf.detections = frame.detections;

    std::vector<int> landmark_ids;
    const CostMatrix costs = build_costs(frame, k, db, landmark_ids);
    const std::vector<int> assignment = hungarian_solve(costs);

    AssociationResult result;
    result.frame_id = frame.frame_id;
    for (size_t r = 0; r < frame.detections.size(); ++r) {
        const Detection& det = frame.detections[r];
        std::vector<Vec3> points_world;
        points_world.reserve(det.points_cam.size());
        for (const Vec3& p : det.points_cam) {
            points_world.push_back(frame.pose.apply(p));
        }
        DetectionAssociation assoc;
        if (!det.points_cam.empty()) {
            Vec3 sum = Vec3::Zero();
            for (const Vec3& p : det.points_cam) {
                sum += p;
            }
            assoc.observed_centroid_cam = sum / static_cast<double>(det.points_cam.size());
        }
        DetectionOutcome outcome;
        outcome.detection_index = det.index;
        const int col = assignment[r];
        if (col >= 0 && col < static_cast<int>(landmark_ids.size())) {
            const int id = landmark_ids[static_cast<size_t>(col)];
            db.update_landmark(id, det, kf, points_world, cfg_);
            assoc.landmark_id = id;
            assoc.level = AssocLevel::kJdaAssignment;
            assoc.score = costs.at(static_cast<int>(r), col);
            outcome.landmark_id = id;
            outcome.level = AssocLevel::kJdaAssignment;
            outcome.score = assoc.score;
        } else {
            const int id = db.create_landmark(det, kf, points_world, cfg_);
            assoc.landmark_id = id;
            assoc.level = AssocLevel::kNewLandmark;
            outcome.landmark_id = id;
            outcome.level = AssocLevel::kNewLandmark;
        }
        kf.associations.push_back(assoc);
        result.outcomes.push_back(outcome);
    }

    bool insert = !last_keyframe_pose_.has_value();
    if (!insert && cfg_.kf_every_n > 0 && frame.frame_id % cfg_.kf_every_n == 0) {
        insert = true;
    }
    if (!insert && last_keyframe_pose_.has_value()) {
        const double dt = (frame.pose.translation - last_keyframe_pose_->translation).norm();
        const double dr =
            rotation_angle(last_keyframe_pose_->rotation.transpose() * frame.pose.rotation);
        insert = dt >= cfg_.kf_min_translation || dr >= cfg_.kf_min_rotation_deg * kDegToRad;
    }
    if (insert) {
        db.insert_keyframe(kf);
        last_keyframe_pose_ = frame.pose;
        result.inserted_keyframe = true;
    }
    last_frame_id_ = frame.frame_id;

    const auto end = std::chrono::steady_clock::now();
    result.elapsed_us =
        std::chrono::duration_cast<std::chrono::duration<double, std::micro>>(end - start)
            .count();
    return result;
}

}  // namespace qslam
