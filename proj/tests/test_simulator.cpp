#include <doctest.h>

#include "qslam/simulator.hpp"

#include <cmath>

using namespace qslam;

namespace {

// Build a waypoint pose at `position` looking toward `target`.
SE3Pose look_at(const Vec3& position, const Vec3& target) {
    const Vec3 z = (target - position).normalized();
    Vec3 up = Vec3::UnitZ();
    if (std::abs(z.dot(up)) > 0.999) {
        up = Vec3::UnitX();
    }
    const Vec3 x = z.cross(up).normalized();
    const Vec3 y = z.cross(x);
    SE3Pose pose;
    pose.rotation.col(0) = x;
    pose.rotation.col(1) = y;
    pose.rotation.col(2) = z;
    pose.translation = position;
    return pose;
}

}  // namespace

TEST_CASE("circle trajectory closes onto itself") {
    TrajectorySpec t;
    t.type = TrajectorySpec::Type::kCircle;
    t.radius = 3.0;
    t.laps = 2;
    t.frames_per_lap = 500;
    const auto poses = generate_trajectory(t);
    REQUIRE(poses.size() == 1000);
    CHECK((poses[0].translation - poses[500].translation).norm() <= 1e-9);
    CHECK((poses[0].rotation - poses[500].rotation).cwiseAbs().maxCoeff() <= 1e-9);
    for (const auto& p : poses) {
        CHECK(p.is_valid(1e-9));
    }
}

TEST_CASE("single waypoint gives a constant pose stream") {
    TrajectorySpec t;
    t.type = TrajectorySpec::Type::kWaypoints;
    t.waypoints.push_back(look_at({5, 0, 1}, {0, 0, 1}));
    t.waypoint_frames = 25;
    const auto poses = generate_trajectory(t);
    REQUIRE(poses.size() == 25);
    for (const auto& p : poses) {
        CHECK((p.translation - poses[0].translation).norm() == 0.0);
    }
    TrajectorySpec bad;
    bad.type = TrajectorySpec::Type::kWaypoints;
    CHECK_THROWS_AS(generate_trajectory(bad), std::invalid_argument);
}

TEST_CASE("figure-eight revisits its crossing point") {
    TrajectorySpec t;
    t.type = TrajectorySpec::Type::kFigureEight;
    t.laps = 1;
    t.frames_per_lap = 1000;
    const auto poses = generate_trajectory(t);
    REQUIRE(poses.size() == 1000);
    // phi = 0 and phi = pi both sit at the center crossing.
    CHECK((poses[0].translation - poses[500].translation).norm() <= 1e-6);
}

TEST_CASE("noise-free render matches analytic sphere box") {
    SceneSpec spec;
    SceneObjectSpec obj;
    obj.label = 7;
    obj.center = {0, 0, 0};
    obj.half_axes = {0.5, 0.5, 0.5};
    spec.objects.push_back(obj);
    TrajectorySpec t;
    t.type = TrajectorySpec::Type::kWaypoints;
    t.waypoints.push_back(look_at({0, -4, 0}, {0, 0, 0}));
    t.waypoint_frames = 1;
    spec.trajectory = t;

    Simulator sim(spec);
    const auto [frame, truth] = sim.render_frame(0);
    REQUIRE(frame.detections.size() == 1);
    CHECK(truth.det_object == std::vector<int>{0});
    CHECK(truth.visible_objects == std::vector<int>{0});
    const Box2D& box = frame.detections[0].box;
    const double hw = 500.0 * 0.5 / std::sqrt(16.0 - 0.25);
    CHECK(box.center().x() == doctest::Approx(320.0));
    CHECK(box.center().y() == doctest::Approx(240.0));
    CHECK(0.5 * box.width() == doctest::Approx(hw).epsilon(1e-9));
    CHECK(frame.detections[0].label == 7);
    CHECK_FALSE(frame.detections[0].points_cam.empty());
    REQUIRE(frame.detections[0].quadric_cam.has_value());
    CHECK(frame.detections[0].quadric_cam->center.z() == doctest::Approx(4.0));
}

TEST_CASE("fn probability one suppresses detections but not truth") {
    SceneSpec spec;
    SceneObjectSpec obj;
    obj.label = 1;
    spec.objects.push_back(obj);
    TrajectorySpec t;
    t.type = TrajectorySpec::Type::kWaypoints;
    t.waypoints.push_back(look_at({0, -6, 0}, {0, 0, 0}));
    t.waypoint_frames = 3;
    spec.trajectory = t;
    spec.noise.fn_prob = 1.0;

    Simulator sim(spec);
    const auto [frame, truth] = sim.render_frame(1);
    CHECK(frame.detections.empty());
    CHECK(truth.visible_objects == std::vector<int>{0});
}

TEST_CASE("occlusion suppresses the farther of two aligned objects") {
    SceneSpec spec;
    SceneObjectSpec near_obj;
    near_obj.label = 1;
    near_obj.center = {0, 0, 0};
    near_obj.half_axes = {0.5, 0.5, 0.5};
    SceneObjectSpec far_obj = near_obj;
    far_obj.label = 2;
    far_obj.center = {0, 3, 0};  // directly behind along the view ray
    spec.objects = {near_obj, far_obj};
    TrajectorySpec t;
    t.type = TrajectorySpec::Type::kWaypoints;
    t.waypoints.push_back(look_at({0, -4, 0}, {0, 0, 0}));
    t.waypoint_frames = 1;
    spec.trajectory = t;
    spec.noise.occlusion = true;

    Simulator sim(spec);
    const auto [frame, truth] = sim.render_frame(0);
    REQUIRE(frame.detections.size() == 1);
    CHECK(frame.detections[0].label == 1);
    CHECK(truth.visible_objects == std::vector<int>{0});

    spec.noise.occlusion = false;
    Simulator sim2(spec);
    CHECK(sim2.render_frame(0).first.detections.size() == 2);
}

TEST_CASE("rendering is deterministic and order independent") {
    SceneSpec spec;
    for (int i = 0; i < 5; ++i) {
        SceneObjectSpec obj;
        obj.label = i;
        obj.center = {1.5 * i - 3.0, 0.4 * i, 0};
        obj.half_axes = {0.4, 0.3, 0.5};
        spec.objects.push_back(obj);
    }
    TrajectorySpec t;
    t.type = TrajectorySpec::Type::kCircle;
    t.radius = 6.0;
    t.laps = 1;
    t.frames_per_lap = 50;
    spec.trajectory = t;
    spec.noise.fn_prob = 0.2;
    spec.noise.fp_rate = 0.5;
    spec.noise.flip_prob = 0.1;
    spec.noise.jitter_px = 2.0;
    spec.seed = 99;

    Simulator a(spec);
    Simulator b(spec);
    // Render in different orders; frames must be bitwise identical.
    const auto a5 = a.render_frame(5);
    const auto a2 = a.render_frame(2);
    const auto b2 = b.render_frame(2);
    const auto b5 = b.render_frame(5);
    REQUIRE(a5.first.detections.size() == b5.first.detections.size());
    REQUIRE(a2.first.detections.size() == b2.first.detections.size());
    for (size_t i = 0; i < a5.first.detections.size(); ++i) {
        CHECK(a5.first.detections[i].box.u_min == b5.first.detections[i].box.u_min);
        CHECK(a5.first.detections[i].label == b5.first.detections[i].label);
        CHECK(a5.first.detections[i].confidence == b5.first.detections[i].confidence);
    }
    CHECK(a2.second.det_object == b2.second.det_object);

    SceneSpec other = spec;
    other.seed = 100;
    Simulator c(other);
    bool any_difference = false;
    for (int f = 0; f < 50 && !any_difference; ++f) {
        const auto ca = a.render_frame(f);
        const auto cc = c.render_frame(f);
        if (ca.first.detections.size() != cc.first.detections.size()) {
            any_difference = true;
        }
    }
    CHECK(any_difference);
}

TEST_CASE("reference_loops basic geometry") {
    // Static camera: every pair with enough id gap qualifies.
    std::vector<std::pair<int, SE3Pose>> kfs;
    const SE3Pose fixed = look_at({0, -4, 0}, {0, 0, 0});
    for (int i = 0; i < 5; ++i) {
        kfs.emplace_back(i * 300, fixed);
    }
    RefLoopCriteria crit;
    crit.id_gap = 600;
    auto pairs = reference_loops(kfs, crit);
    CHECK(pairs.size() == 6);  // (600,0),(900,0),(900,300),(1200,0),(1200,300),(1200,600)

    // Monotone straight-line path: positions never return.
    kfs.clear();
    for (int i = 0; i < 10; ++i) {
        kfs.emplace_back(i * 200, look_at({4.0 * i, 0, 1}, {4.0 * i + 5.0, 0, 1}));
    }
    CHECK(reference_loops(kfs, crit).empty());
}

TEST_CASE("reference_loops on a two-lap circle pairs near (i, i+lap)") {
    TrajectorySpec t;
    t.type = TrajectorySpec::Type::kCircle;
    t.radius = 3.0;
    t.laps = 2;
    t.frames_per_lap = 500;
    const auto poses = generate_trajectory(t);
    std::vector<std::pair<int, SE3Pose>> kfs;
    for (int i = 0; i < static_cast<int>(poses.size()); i += 10) {
        kfs.emplace_back(i, poses[static_cast<size_t>(i)]);
    }
    RefLoopCriteria crit;
    crit.pos_m = 0.5;
    crit.angle_deg = 30.0;
    crit.id_gap = 450;
    const auto pairs = reference_loops(kfs, crit);
    REQUIRE_FALSE(pairs.empty());
    for (const auto& [i, j] : pairs) {
        // Revisits happen one (or two) laps apart.
        const int residue = (i - j) % 500;
        CHECK((residue <= 20 || residue >= 480));
    }

    // Permuting the input order changes nothing.
    std::vector<std::pair<int, SE3Pose>> shuffled(kfs.rbegin(), kfs.rend());
    CHECK(reference_loops(shuffled, crit) == pairs);
}
