#include "qslam/association.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace qslam {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

double rotation_angle(const Mat3& r) {
    const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    return std::acos(c);
}

std::vector<Vec3> to_world(const SE3Pose& t_wc, const std::vector<Vec3>& points_cam) {
    std::vector<Vec3> out;
    out.reserve(points_cam.size());
    for (const Vec3& p : points_cam) {
        out.push_back(t_wc.apply(p));
    }
    return out;
}

std::optional<Vec3> mean_point(const std::vector<Vec3>& points) {
    if (points.empty()) {
        return std::nullopt;
    }
    Vec3 sum = Vec3::Zero();
    for (const Vec3& p : points) {
        sum += p;
    }
    return sum / static_cast<double>(points.size());
}

}  // namespace

std::string to_string(AssocMethod method) {
    switch (method) {
        case AssocMethod::kMlv:
            return "mlv";
        case AssocMethod::kTwoD:
            return "2d";
        case AssocMethod::kPro:
            return "pro";
        case AssocMethod::kThreeD:
            return "3d";
        case AssocMethod::kJda:
            return "jda";
    }
    return "mlv";
}

AssocMethod assoc_method_from_string(const std::string& s) {
    if (s == "mlv") return AssocMethod::kMlv;
    if (s == "2d") return AssocMethod::kTwoD;
    if (s == "pro") return AssocMethod::kPro;
    if (s == "3d") return AssocMethod::kThreeD;
    if (s == "jda") return AssocMethod::kJda;
    throw std::invalid_argument("unknown association method: " + s);
}

Associator::Associator(EngineConfig cfg, AssocMethod method)
    : cfg_(std::move(cfg)), method_(method) {}

std::optional<LevelHit> Associator::verify_2d_frame_iou(const Detection& det,
                                                        const std::vector<PrevAssociation>& prev,
                                                        const std::set<int>& claimed,
                                                        const MapDatabase& db) const {
    LevelHit best;
    for (const PrevAssociation& pa : prev) {
        if (claimed.count(pa.landmark_id) > 0 || !db.has_landmark(pa.landmark_id)) {
            continue;
        }
        const double iou = iou_2d(det.box, pa.box);
        if (iou > best.score) {
            best = {pa.landmark_id, iou};
        }
    }
    if (best.landmark_id < 0 || best.score <= cfg_.delta1 ||
        db.landmark(best.landmark_id).label != det.label) {
        return std::nullopt;
    }
    return best;
}

std::optional<LevelHit> Associator::verify_label_posterior(const Detection& det,
                                                           const std::set<int>& window,
                                                           const std::set<int>& claimed,
                                                           const KeyFrame& frame,
                                                           const MapDatabase& db) const {
    std::vector<int> candidates;
    double total_count = 0.0;
    for (int id : window) {
        if (claimed.count(id) > 0) {
            continue;
        }
        candidates.push_back(id);
        total_count += db.landmark(id).histogram_total();
    }
    if (candidates.empty()) {
        return std::nullopt;
    }
    int num_classes = cfg_.num_classes;
    if (num_classes <= 0) {
        num_classes = db.distinct_label_count();
        bool seen = false;
        for (int id : candidates) {
            seen = seen || db.landmark(id).label_histogram.count(det.label) > 0;
        }
        if (!seen) {
            num_classes += 1;
        }
        num_classes = std::max(num_classes, 1);
    }
    const SE3Pose t_cw = frame.pose.inverse();
    const double denom = total_count + cfg_.alpha;
    const double new_object_prior = cfg_.alpha / denom;
    LevelHit best;
    bool found = false;
    for (int id : candidates) {
        const QuadricLandmark& lm = db.landmark(id);
        const auto projected = project_point(frame.intrinsics, t_cw, lm.centroid);
        if (!projected.has_value()) {
            continue;  // centroid behind the camera
        }
        const double n_i = lm.histogram_total();
        const double prior = n_i / denom;
        const auto it = lm.label_histogram.find(det.label);
        const double label_count = it == lm.label_histogram.end() ? 0.0 : it->second;
        const double label_lik = (label_count + 1.0) / (n_i + num_classes);
        const double d = (*projected - det.box.center()).norm();
        const double pos_lik = std::exp(-d * d / (2.0 * cfg_.sigma_pos_px * cfg_.sigma_pos_px));
        const double posterior = prior * label_lik * pos_lik;
        if (!found || posterior > best.score) {
            best = {id, posterior};
            found = true;
        }
    }
    if (!found || best.score <= new_object_prior) {
        return std::nullopt;
    }
    return best;
}

std::optional<LevelHit> Associator::verify_quadric_backproj_iou(const Detection& det,
                                                                const std::set<int>& window,
                                                                const std::set<int>& claimed,
                                                                const KeyFrame& frame,
                                                                const MapDatabase& db) const {
    const SE3Pose t_cw = frame.pose.inverse();
    LevelHit best;
    for (int id : window) {
        if (claimed.count(id) > 0) {
            continue;
        }
        const QuadricLandmark& lm = db.landmark(id);
        if (!lm.quadric.has_value()) {
            continue;
        }
        const auto box = project_quadric_bbox(frame.intrinsics, t_cw, *lm.quadric);
        if (!box.has_value()) {
            continue;
        }
        const double iou = iou_2d(det.box, *box);
        if (iou > best.score) {
            best = {id, iou};
        }
    }
    if (best.landmark_id < 0 || best.score <= cfg_.delta2 ||
        db.landmark(best.landmark_id).label != det.label) {
        return std::nullopt;
    }
    return best;
}

std::optional<LevelHit> Associator::verify_point_backproj_num(const Detection& det,
                                                              const std::set<int>& window,
                                                              const std::set<int>& claimed,
                                                              const KeyFrame& frame,
                                                              const MapDatabase& db) const {
    const SE3Pose t_cw = frame.pose.inverse();
    const CameraIntrinsics& k = frame.intrinsics;
    LevelHit best;
    for (int id : window) {
        if (claimed.count(id) > 0) {
            continue;
        }
        const QuadricLandmark& lm = db.landmark(id);
        if (lm.quadric.has_value()) {
            continue;  // handled by level 3
        }
        int in_image = 0;
        int in_box = 0;
        for (const Vec3& p : db.landmark_points(id)) {
            const auto px = project_point(k, t_cw, p);
            if (!px.has_value() || px->x() < 0.0 || px->x() > k.width || px->y() < 0.0 ||
                px->y() > k.height) {
                continue;
            }
            ++in_image;
            if (det.box.contains(*px)) {
                ++in_box;
            }
        }
        if (in_image == 0) {
            continue;  // nothing projectable
        }
        const double ratio = static_cast<double>(in_box) / in_image;
        if (ratio > best.score) {
            best = {id, ratio};
        }
    }
    if (best.landmark_id < 0 || best.score <= cfg_.delta3 ||
        db.landmark(best.landmark_id).label != det.label) {
        return std::nullopt;
    }
    return best;
}

bool Associator::should_insert_keyframe(const FrameInput& frame) const {
    if (!last_keyframe_pose_.has_value()) {
        return true;
    }
    if (cfg_.kf_every_n > 0 && frame.frame_id % cfg_.kf_every_n == 0) {
        return true;
    }
    const double dt = (frame.pose.translation - last_keyframe_pose_->translation).norm();
    const double dr = rotation_angle(last_keyframe_pose_->rotation.transpose() *
                                     frame.pose.rotation);
    return dt >= cfg_.kf_min_translation || dr >= cfg_.kf_min_rotation_deg * kDegToRad;
}

AssociationResult Associator::process_frame(const FrameInput& frame, const CameraIntrinsics& k,
                                            MapDatabase& db) {
    if (frame.frame_id <= last_frame_id_) {
        throw std::invalid_argument("process_frame: frame ids must increase");
    }
    const auto start = std::chrono::steady_clock::now();

    KeyFrame kf;
    kf.id = frame.frame_id;
    kf.pose = frame.pose;
    kf.intrinsics = k;
    kf.detections = frame.detections;

    const std::set<int> window = db.sliding_window_landmarks(frame.frame_id, cfg_.window_m);
    std::set<int> claimed;
    AssociationResult result;
    result.frame_id = frame.frame_id;

    const bool use_l1 = method_ == AssocMethod::kMlv || method_ == AssocMethod::kTwoD;
    const bool use_l2 = method_ == AssocMethod::kMlv || method_ == AssocMethod::kPro;
    const bool use_l34 = method_ == AssocMethod::kMlv || method_ == AssocMethod::kThreeD;

    for (const Detection& det : frame.detections) {
        std::optional<LevelHit> hit;
        AssocLevel level = AssocLevel::kNewLandmark;
        if (use_l1) {
            hit = verify_2d_frame_iou(det, prev_associations_, claimed, db);
            if (hit) {
                level = AssocLevel::kFrameIoU;
            }
        }
        if (!hit && use_l2) {
            hit = verify_label_posterior(det, window, claimed, kf, db);
            if (hit) {
                level = AssocLevel::kLabelPosterior;
            }
        }
        if (!hit && use_l34) {
            hit = verify_quadric_backproj_iou(det, window, claimed, kf, db);
            if (hit) {
                level = AssocLevel::kQuadricIoU;
            }
        }
        if (!hit && use_l34) {
            hit = verify_point_backproj_num(det, window, claimed, kf, db);
            if (hit) {
                level = AssocLevel::kPointRatio;
            }
        }

        const std::vector<Vec3> points_world = to_world(frame.pose, det.points_cam);
        DetectionAssociation assoc;
        assoc.observed_centroid_cam = mean_point(det.points_cam);
        DetectionOutcome outcome;
        outcome.detection_index = det.index;
        if (hit) {
            db.update_landmark(hit->landmark_id, det, kf, points_world, cfg_);
            assoc.landmark_id = hit->landmark_id;
            assoc.level = level;
            assoc.score = hit->score;
            outcome.landmark_id = hit->landmark_id;
            outcome.level = level;
            outcome.score = hit->score;
        } else {
            const int new_id = db.create_landmark(det, kf, points_world, cfg_);
            assoc.landmark_id = new_id;
            assoc.level = AssocLevel::kNewLandmark;
            assoc.score = 0.0;
            outcome.landmark_id = new_id;
            outcome.level = AssocLevel::kNewLandmark;
            outcome.score = 0.0;
        }
        claimed.insert(assoc.landmark_id);
        kf.associations.push_back(assoc);
        result.outcomes.push_back(outcome);
    }

    if (should_insert_keyframe(frame)) {
        db.insert_keyframe(kf);
        last_keyframe_pose_ = frame.pose;
        result.inserted_keyframe = true;
    }

    // Snapshot for the next frame's level 1, ordered by landmark id so the
    // argmax tie-break is deterministic.
    prev_associations_.clear();
    for (size_t i = 0; i < kf.associations.size(); ++i) {
        if (kf.associations[i].landmark_id >= 0) {
            prev_associations_.push_back({kf.associations[i].landmark_id, kf.detections[i].box});
        }
    }
    std::sort(prev_associations_.begin(), prev_associations_.end(),
              [](const PrevAssociation& a, const PrevAssociation& b) {
                  return a.landmark_id < b.landmark_id;
              });
    last_frame_id_ = frame.frame_id;

    const auto end = std::chrono::steady_clock::now();
    result.elapsed_us =
        std::chrono::duration_cast<std::chrono::duration<double, std::micro>>(end - start)
            .count();
    return result;
}

}  // namespace qslam
