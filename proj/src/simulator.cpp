#include "qslam/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace qslam {

namespace {

constexpr double kPi = 3.14159265358979323846;

// splitmix64 finalizer; decorrelates per-frame RNG substreams.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Mat3 look_rotation(const Vec3& forward) {
    const Vec3 z = forward.normalized();
    Vec3 up = Vec3::UnitZ();
    if (std::abs(z.dot(up)) > 0.999) {
        up = Vec3::UnitX();
    }
    const Vec3 x = z.cross(up).normalized();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return r;
}

Eigen::Quaterniond slerp(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b, double t) {
    return a.slerp(t, b);
}

double rotation_angle(const Mat3& r) {
    const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    return std::acos(c);
}

}  // namespace

std::vector<Vec3> fibonacci_ellipsoid(const SceneObjectSpec& obj, int count) {
    std::vector<Vec3> points;
    points.reserve(static_cast<size_t>(count));
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * k;
        const Vec3 unit{r * std::cos(phi), r * std::sin(phi), z};
        points.push_back(obj.center + obj.orientation * unit.cwiseProduct(obj.half_axes));
    }
    return points;
}

std::vector<SE3Pose> generate_trajectory(const TrajectorySpec& spec) {
    std::vector<SE3Pose> poses;
    switch (spec.type) {
        case TrajectorySpec::Type::kCircle: {
            const int n = spec.laps * spec.frames_per_lap;
            if (n < 1) {
                throw std::invalid_argument("trajectory: need at least one frame");
            }
            for (int i = 0; i < n; ++i) {
                const double phi = 2.0 * kPi * i / spec.frames_per_lap;
                SE3Pose pose;
                pose.translation = spec.center + Vec3{spec.radius * std::cos(phi),
                                                      spec.radius * std::sin(phi), spec.height};
                if (spec.look_at_center) {
                    const Vec3 target = spec.center + Vec3{0, 0, spec.height};
                    pose.rotation = look_rotation(target - pose.translation);
                } else {
                    pose.rotation = look_rotation({-std::sin(phi), std::cos(phi), 0.0});
                }
                poses.push_back(pose);
            }
            break;
        }
        case TrajectorySpec::Type::kFigureEight: {
            const int n = spec.laps * spec.frames_per_lap;
            if (n < 1) {
                throw std::invalid_argument("trajectory: need at least one frame");
            }
            for (int i = 0; i < n; ++i) {
                const double phi = 2.0 * kPi * i / spec.frames_per_lap;
                SE3Pose pose;
                pose.translation =
                    spec.center + Vec3{spec.figure_a * std::sin(phi),
                                       spec.figure_b * std::sin(phi) * std::cos(phi), spec.height};
                // Tangent of the lemniscate path.
                const Vec3 tangent{spec.figure_a * std::cos(phi),
                                   spec.figure_b * std::cos(2.0 * phi), 0.0};
                pose.rotation = look_rotation(tangent.norm() > 1e-9 ? tangent : Vec3::UnitX());
                poses.push_back(pose);
            }
            break;
        }
        case TrajectorySpec::Type::kWaypoints: {
            if (spec.waypoints.empty()) {
                throw std::invalid_argument("trajectory: no waypoints");
            }
            const int n = spec.waypoint_frames > 0 ? spec.waypoint_frames
                                                   : static_cast<int>(spec.waypoints.size());
            if (spec.waypoints.size() == 1) {
                poses.assign(static_cast<size_t>(n), spec.waypoints.front());
                break;
            }
            const int segments = static_cast<int>(spec.waypoints.size()) - 1;
            for (int i = 0; i < n; ++i) {
                const double u = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
                const double s = u * segments;
                const int seg = std::min(static_cast<int>(s), segments - 1);
                const double t = s - seg;
                const SE3Pose& a = spec.waypoints[static_cast<size_t>(seg)];
                const SE3Pose& b = spec.waypoints[static_cast<size_t>(seg) + 1];
                SE3Pose pose;
                pose.translation = (1.0 - t) * a.translation + t * b.translation;
                pose.rotation = slerp(Eigen::Quaterniond(a.rotation),
                                      Eigen::Quaterniond(b.rotation), t)
                                    .toRotationMatrix();
                poses.push_back(pose);
            }
            break;
        }
    }
    return poses;
}

std::vector<std::pair<int, int>> reference_loops(
    const std::vector<std::pair<int, SE3Pose>>& keyframe_poses,
    const RefLoopCriteria& criteria) {
    std::vector<std::pair<int, SE3Pose>> kfs = keyframe_poses;
    std::sort(kfs.begin(), kfs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<int, int>> pairs;
    const double angle_rad = criteria.angle_deg * kPi / 180.0;
    for (size_t i = 0; i < kfs.size(); ++i) {
        for (size_t j = 0; j < i; ++j) {
            if (kfs[i].first - kfs[j].first < criteria.id_gap) {
                continue;
            }
            const double dpos = (kfs[i].second.translation - kfs[j].second.translation).norm();
            if (dpos > criteria.pos_m) {
                continue;
            }
            const double dang =
                rotation_angle(kfs[i].second.rotation.transpose() * kfs[j].second.rotation);
            if (dang > angle_rad) {
                continue;
            }
            pairs.emplace_back(kfs[i].first, kfs[j].first);
        }
    }
    return pairs;
}

Simulator::Simulator(SceneSpec spec) : spec_(std::move(spec)) {
    trajectory_ = generate_trajectory(spec_.trajectory);
    int id = 0;
    for (const auto& obj_spec : spec_.objects) {
        if (obj_spec.half_axes.minCoeff() <= 0.0) {
            throw std::invalid_argument("scene object: half-axes must be positive");
        }
        SceneObject obj;
        obj.id = id++;
        obj.label = obj_spec.label;
        obj.shape.center = obj_spec.center;
        obj.shape.half_axes = obj_spec.half_axes;
        obj.shape.orientation = obj_spec.orientation;
        obj.surface_points = fibonacci_ellipsoid(obj_spec, obj_spec.surface_points);
        objects_.push_back(std::move(obj));
        census_labels_.push_back(obj_spec.label);
    }
    std::sort(census_labels_.begin(), census_labels_.end());
    census_labels_.erase(std::unique(census_labels_.begin(), census_labels_.end()),
                         census_labels_.end());
}

SE3Pose Simulator::estimated_pose(int frame_id) const {
    SE3Pose pose = trajectory_.at(static_cast<size_t>(frame_id));
    const NoiseModel& noise = spec_.noise;
    if (noise.pose_sigma_t > 0.0 || noise.pose_sigma_r > 0.0) {
        std::mt19937_64 rng(mix64(spec_.seed ^ mix64(0xABCD0000ULL + frame_id)));
        std::normal_distribution<double> gt(0.0, noise.pose_sigma_t);
        std::normal_distribution<double> gr(0.0, noise.pose_sigma_r);
        if (noise.pose_sigma_t > 0.0) {
            pose.translation += Vec3{gt(rng), gt(rng), gt(rng)};
        }
        if (noise.pose_sigma_r > 0.0) {
            std::normal_distribution<double> gaxis(0.0, 1.0);
            Vec3 axis{gaxis(rng), gaxis(rng), gaxis(rng)};
            if (axis.norm() > 1e-9) {
                pose.rotation = rodrigues(axis.normalized(), gr(rng)) * pose.rotation;
            }
        }
    }
    if (noise.drift_start_frame >= 0 && frame_id > noise.drift_start_frame) {
        const int last = frame_count() - 1;
        const double w = last > noise.drift_start_frame
                             ? static_cast<double>(frame_id - noise.drift_start_frame) /
                                   (last - noise.drift_start_frame)
                             : 1.0;
        pose.translation += w * noise.drift_translation;
    }
    return pose;
}

std::pair<FrameInput, FrameTruth> Simulator::render_frame(int frame_id) const {
    const SE3Pose pose_true = true_pose(frame_id);
    const SE3Pose t_cw = pose_true.inverse();
    const CameraIntrinsics& k = spec_.intrinsics;
    const NoiseModel& noise = spec_.noise;
    std::mt19937_64 rng(mix64(spec_.seed ^ mix64(static_cast<std::uint64_t>(frame_id) + 1)));

    struct Candidate {
        int object_id;
        Box2D box;
        double depth;
    };
    std::vector<Candidate> candidates;
    for (const auto& obj : objects_) {
        const auto box = project_quadric_bbox(k, t_cw, obj.shape);
        if (!box.has_value() || box->area() < spec_.min_box_area) {
            continue;
        }
        candidates.push_back({obj.id, *box, t_cw.apply(obj.shape.center).z()});
    }

    // Occlusion: a nearer kept box suppresses a farther one it mostly covers.
    std::vector<Candidate> kept;
    if (noise.occlusion) {
        std::vector<Candidate> by_depth = candidates;
        std::stable_sort(by_depth.begin(), by_depth.end(),
                         [](const Candidate& a, const Candidate& b) { return a.depth < b.depth; });
        for (const auto& cand : by_depth) {
            bool suppressed = false;
            for (const auto& nearer : kept) {
                const double iw = std::min(cand.box.u_max, nearer.box.u_max) -
                                  std::max(cand.box.u_min, nearer.box.u_min);
                const double ih = std::min(cand.box.v_max, nearer.box.v_max) -
                                  std::max(cand.box.v_min, nearer.box.v_min);
                const double inter = std::max(0.0, iw) * std::max(0.0, ih);
                if (cand.box.area() > 0.0 &&
                    inter / cand.box.area() > noise.occlusion_overlap) {
                    suppressed = true;
                    break;
                }
            }
            if (!suppressed) {
                kept.push_back(cand);
            }
        }
        std::stable_sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
            return a.object_id < b.object_id;
        });
    } else {
        kept = candidates;
    }

    FrameTruth truth;
    truth.frame_id = frame_id;
    truth.pose_true = pose_true;
    for (const auto& cand : kept) {
        truth.visible_objects.push_back(cand.object_id);
    }

    FrameInput frame;
    frame.frame_id = frame_id;
    frame.pose = estimated_pose(frame_id);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, noise.jitter_px);
    for (const auto& cand : kept) {
        if (noise.fn_prob > 0.0 && unit(rng) < noise.fn_prob) {
            continue;
        }
        const SceneObject& obj = objects_[static_cast<size_t>(cand.object_id)];
        Detection det;
        det.box = cand.box;
        det.label = obj.label;
        det.confidence = 0.85 + 0.15 * unit(rng);
        if (noise.jitter_px > 0.0) {
            det.box.u_min += jitter(rng);
            det.box.v_min += jitter(rng);
            det.box.u_max += jitter(rng);
            det.box.v_max += jitter(rng);
            if (det.box.u_min > det.box.u_max) {
                std::swap(det.box.u_min, det.box.u_max);
            }
            if (det.box.v_min > det.box.v_max) {
                std::swap(det.box.v_min, det.box.v_max);
            }
            det.box.u_min = std::clamp(det.box.u_min, 0.0, k.width);
            det.box.u_max = std::clamp(det.box.u_max, 0.0, k.width);
            det.box.v_min = std::clamp(det.box.v_min, 0.0, k.height);
            det.box.v_max = std::clamp(det.box.v_max, 0.0, k.height);
        }
        if (noise.flip_prob > 0.0 && census_labels_.size() > 1 && unit(rng) < noise.flip_prob) {
            std::uniform_int_distribution<size_t> pick(0, census_labels_.size() - 2);
            size_t idx = pick(rng);
            if (census_labels_[idx] == det.label) {
                idx = census_labels_.size() - 1;
            }
            det.label = census_labels_[idx];
        }
        for (const Vec3& p : obj.surface_points) {
            const Vec3 p_cam = t_cw.apply(p);
            if (p_cam.z() > kDepthEps) {
                det.points_cam.push_back(p_cam);
            }
        }
        DualQuadric q_cam;
        q_cam.center = t_cw.apply(obj.shape.center);
        q_cam.half_axes = obj.shape.half_axes;
        q_cam.orientation = t_cw.rotation * obj.shape.orientation;
        det.quadric_cam = q_cam;
        det.index = static_cast<int>(frame.detections.size());
        frame.detections.push_back(std::move(det));
        truth.det_object.push_back(cand.object_id);
    }

    if (noise.fp_rate > 0.0) {
        std::poisson_distribution<int> fp_count(noise.fp_rate);
        std::uniform_real_distribution<double> size_px(20.0, 120.0);
        const int n_fp = fp_count(rng);
        for (int f = 0; f < n_fp; ++f) {
            Detection det;
            const double w = size_px(rng);
            const double h = size_px(rng);
            const double cx = unit(rng) * k.width;
            const double cy = unit(rng) * k.height;
            det.box = {std::clamp(cx - 0.5 * w, 0.0, k.width),
                       std::clamp(cy - 0.5 * h, 0.0, k.height),
                       std::clamp(cx + 0.5 * w, 0.0, k.width),
                       std::clamp(cy + 0.5 * h, 0.0, k.height)};
            det.label = census_labels_.empty()
                            ? 0
                            : census_labels_[rng() % census_labels_.size()];
            det.confidence = 0.4 + 0.3 * unit(rng);
            det.index = static_cast<int>(frame.detections.size());
            frame.detections.push_back(std::move(det));
            truth.det_object.push_back(-1);
        }
    }

    return {std::move(frame), std::move(truth)};
}

}  // namespace qslam
