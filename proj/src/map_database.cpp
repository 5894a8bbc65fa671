#include "qslam/map_database.hpp"

#include <algorithm>
#include <stdexcept>

namespace qslam {

std::string to_string(AssocLevel level) {
    switch (level) {
        case AssocLevel::kFrameIoU:
            return "2d_iou";
        case AssocLevel::kLabelPosterior:
            return "label_posterior";
        case AssocLevel::kQuadricIoU:
            return "quadric_iou";
        case AssocLevel::kPointRatio:
            return "point_ratio";
        case AssocLevel::kJdaAssignment:
            return "jda";
        case AssocLevel::kNewLandmark:
            return "new";
    }
    return "new";
}

AssocLevel assoc_level_from_string(const std::string& s) {
    if (s == "2d_iou") return AssocLevel::kFrameIoU;
    if (s == "label_posterior") return AssocLevel::kLabelPosterior;
    if (s == "quadric_iou") return AssocLevel::kQuadricIoU;
    if (s == "point_ratio") return AssocLevel::kPointRatio;
    if (s == "jda") return AssocLevel::kJdaAssignment;
    if (s == "new") return AssocLevel::kNewLandmark;
    throw std::invalid_argument("unknown association level: " + s);
}

std::vector<int> KeyFrame::associated_landmarks() const {
    std::vector<int> ids;
    for (const auto& assoc : associations) {
        if (assoc.landmark_id >= 0) {
            ids.push_back(assoc.landmark_id);
        }
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

int QuadricLandmark::histogram_total() const {
    int total = 0;
    for (const auto& [label_id, count] : label_histogram) {
        total += count;
    }
    return total;
}

int MapDatabase::insert_keyframe(const KeyFrame& kf) {
    if (keyframes_.count(kf.id) > 0) {
        throw std::invalid_argument("insert_keyframe: duplicate id");
    }
    if (!keyframes_.empty() && kf.id <= keyframes_.rbegin()->first) {
        throw std::invalid_argument("insert_keyframe: ids must increase");
    }
    for (const auto& assoc : kf.associations) {
        if (assoc.landmark_id >= 0 && landmarks_.count(assoc.landmark_id) == 0) {
            throw std::invalid_argument("insert_keyframe: association to unknown landmark");
        }
    }
    keyframes_[kf.id] = kf;
    for (int lm : kf.associations.empty() ? std::vector<int>{} : kf.associated_landmarks()) {
        auto& queue = covisibility_[lm];
        if (queue.empty() || queue.back() != kf.id) {
            queue.push_back(kf.id);
        }
    }
    return kf.id;
}

std::vector<CovisibleHit> MapDatabase::covisible_candidates(const KeyFrame& kf, int th_objs,
                                                            int th_ids) const {
    // Count shared landmarks by walking only the queues of kf's own landmarks.
    std::map<int, std::vector<int>> shared_by_kf;
    for (int lm : kf.associated_landmarks()) {
        const auto it = covisibility_.find(lm);
        if (it == covisibility_.end()) {
            continue;
        }
        for (int other : it->second) {
            if (other != kf.id && kf.id - other >= th_ids) {
                shared_by_kf[other].push_back(lm);
            }
        }
    }
    std::vector<CovisibleHit> hits;
    for (auto& [kf_id, shared] : shared_by_kf) {
        if (static_cast<int>(shared.size()) >= th_objs) {
            hits.push_back({kf_id, std::move(shared)});
        }
    }
    return hits;
}

std::set<int> MapDatabase::sliding_window_landmarks(int frame_id, int m) const {
    std::set<int> out;
    int taken = 0;
    for (auto it = keyframes_.rbegin(); it != keyframes_.rend() && taken < m; ++it) {
        if (it->first >= frame_id) {
            continue;
        }
        for (int lm : it->second.associated_landmarks()) {
            out.insert(lm);
        }
        ++taken;
    }
    return out;
}

int MapDatabase::create_landmark(const Detection& det, const KeyFrame& frame,
                                 const std::vector<Vec3>& seed_points_world,
                                 const EngineConfig& cfg) {
    QuadricLandmark lm;
    lm.id = next_landmark_id_++;
    lm.label_histogram[det.label] = 1;
    lm.label = det.label;
    lm.rho = cfg.default_rho;
    lm.last_frame_id = frame.id;
    lm.observations.emplace_back(frame.id, det.index);
    if (!seed_points_world.empty()) {
        absorb_points(lm, seed_points_world);
        lm.centroid = lm.point_sum / static_cast<double>(lm.point_count);
    } else {
        lm.centroid =
            unproject_pixel(frame.intrinsics, frame.pose, det.box.center(), cfg.fallback_depth);
    }
    if (det.quadric_cam.has_value() && cfg.n_init <= 1) {
        DualQuadric q = *det.quadric_cam;
        q.center = frame.pose.apply(q.center);
        q.orientation = frame.pose.rotation * q.orientation;
        lm.quadric = q;
    }
    landmarks_[lm.id] = std::move(lm);
    return next_landmark_id_ - 1;
}

void MapDatabase::update_landmark(int id, const Detection& det, const KeyFrame& frame,
                                  const std::vector<Vec3>& points_world,
                                  const EngineConfig& cfg) {
    auto it = landmarks_.find(id);
    if (it == landmarks_.end()) {
        throw std::invalid_argument("update_landmark: unknown landmark id");
    }
    QuadricLandmark& lm = it->second;
    lm.label_histogram[det.label] += 1;
    // Re-argmax; std::map iterates labels in increasing order, so ties keep
    // the lower class id.
    int best_label = lm.label;
    int best_count = -1;
    for (const auto& [label_id, count] : lm.label_histogram) {
        if (count > best_count) {
            best_label = label_id;
            best_count = count;
        }
    }
    lm.label = best_label;
    lm.last_frame_id = frame.id;
    lm.observations.emplace_back(frame.id, det.index);
    if (!points_world.empty()) {
        absorb_points(lm, points_world);
        lm.centroid = lm.point_sum / static_cast<double>(lm.point_count);
    }
    if (det.quadric_cam.has_value() && lm.histogram_total() >= cfg.n_init) {
        DualQuadric q = *det.quadric_cam;
        q.center = frame.pose.apply(q.center);
        q.orientation = frame.pose.rotation * q.orientation;
        lm.quadric = q;
    }
}

const QuadricLandmark& MapDatabase::landmark(int id) const {
    const auto it = landmarks_.find(id);
    if (it == landmarks_.end()) {
        throw std::invalid_argument("landmark: unknown id");
    }
    return it->second;
}

QuadricLandmark& MapDatabase::landmark_mutable(int id) {
    const auto it = landmarks_.find(id);
    if (it == landmarks_.end()) {
        throw std::invalid_argument("landmark_mutable: unknown id");
    }
    return it->second;
}

KeyFrame& MapDatabase::keyframe_mutable(int id) {
    const auto it = keyframes_.find(id);
    if (it == keyframes_.end()) {
        throw std::invalid_argument("keyframe_mutable: unknown id");
    }
    return it->second;
}

std::vector<Vec3> MapDatabase::landmark_points(int id) const {
    std::vector<Vec3> out;
    const QuadricLandmark& lm = landmark(id);
    out.reserve(lm.point_ids.size());
    for (int pid : lm.point_ids) {
        out.push_back(points_.at(pid).position);
    }
    return out;
}

int MapDatabase::distinct_label_count() const {
    std::set<int> labels;
    for (const auto& [id, lm] : landmarks_) {
        for (const auto& [label_id, count] : lm.label_histogram) {
            labels.insert(label_id);
        }
    }
    return static_cast<int>(labels.size());
}

void MapDatabase::absorb_points(QuadricLandmark& lm, const std::vector<Vec3>& points_world) {
    for (const Vec3& p : points_world) {
        lm.point_sum += p;
        lm.point_count += 1;
        if (static_cast<int>(lm.point_ids.size()) < kMaxStoredPointsPerLandmark) {
            MapPoint mp;
            mp.id = next_point_id_++;
            mp.position = p;
            mp.owner_landmark = lm.id;
            points_[mp.id] = mp;
            lm.point_ids.push_back(mp.id);
        }
    }
}

}  // namespace qslam
