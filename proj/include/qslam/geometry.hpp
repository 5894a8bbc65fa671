#ifndef QSLAM_GEOMETRY_HPP
#define QSLAM_GEOMETRY_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace qslam {

// Numeric guards used across the geometry routines.
inline constexpr double kDepthEps = 1e-6;  // meters, minimum camera-frame depth
inline constexpr double kLenEps = 1e-9;    // meters, minimum usable vector length
inline constexpr double kAngleEps = 1e-6;  // radians, anti-parallel detection band

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Axis-aligned 2D box in pixel coordinates, min corner <= max corner.
struct Box2D {
    double u_min = 0.0;
    double v_min = 0.0;
    double u_max = 0.0;
    double v_max = 0.0;

    double width() const { return u_max - u_min; }
    double height() const { return v_max - v_min; }
    double area() const { return width() * height(); }
    Vec2 center() const { return {0.5 * (u_min + u_max), 0.5 * (v_min + v_max)}; }
    bool valid() const { return u_min <= u_max && v_min <= v_max; }
    bool contains(const Vec2& p) const {
        return p.x() >= u_min && p.x() <= u_max && p.y() >= v_min && p.y() <= v_max;
    }
};

/// Rigid transform: x_out = rotation * x_in + translation.
struct SE3Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    SE3Pose inverse() const {
        return {rotation.transpose(), -(rotation.transpose() * translation)};
    }
    SE3Pose compose(const SE3Pose& rhs) const {
        return {rotation * rhs.rotation, rotation * rhs.translation + translation};
    }
    bool is_valid(double tol = 1e-9) const;
};

/// Pinhole camera intrinsics plus the image rectangle.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double width = 0.0;
    double height = 0.0;

    Mat3 matrix() const {
        Mat3 k;
        k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
        return k;
    }
    double diagonal() const { return std::sqrt(width * width + height * height); }
};

/// Ellipsoid kept in decomposed form; the 4x4 dual matrix is derived on demand.
struct DualQuadric {
    Vec3 center = Vec3::Zero();
    Vec3 half_axes = Vec3::Ones();
    Mat3 orientation = Mat3::Identity();

    /// Dual-form 4x4 matrix, normalized so the (3,3) entry is -1.
    Mat4 matrix() const;
    /// Decompose a dual-form matrix back into center / half-axes / orientation.
    /// Throws std::invalid_argument when the matrix is not a valid ellipsoid.
    static DualQuadric from_matrix(const Mat4& q);
};

/// Rotation/scale/translation indicators relating two semantic vectors.
struct PairTransform {
    Mat3 rotation = Mat3::Identity();
    double scale = 1.0;
    double angle = 0.0;           // radians in [0, pi]
    Vec3 axis = Vec3::UnitX();    // unit length
    Vec3 translation = Vec3::Zero();
    bool degenerate = false;      // anti-parallel pair, axis not unique
};

/// Intersection-over-union of two boxes; degenerate or disjoint inputs give 0.
double iou_2d(const Box2D& a, const Box2D& b);

/// Pinhole projection of a world point. Empty when the camera-frame depth
/// is at or below kDepthEps.
std::optional<Vec2> project_point(const CameraIntrinsics& k, const SE3Pose& t_cw,
                                  const Vec3& x_world);

/// Back-project pixel (u, v) at the given camera-frame depth into the world.
Vec3 unproject_pixel(const CameraIntrinsics& k, const SE3Pose& t_wc, const Vec2& px,
                     double depth);

/// Project a dual quadric to its image bounding box: conic envelope extrema,
/// clipped to the image rectangle. Empty when the quadric center is behind
/// the camera, the conic is not an ellipse, or the clipped box vanishes.
std::optional<Box2D> project_quadric_bbox(const CameraIntrinsics& k, const SE3Pose& t_cw,
                                          const DualQuadric& q);

/// Axis-angle rotation. The axis must be unit length (1e-9), else throws.
Mat3 rodrigues(const Vec3& axis, double angle);

/// Rotation/scale indicators between two non-degenerate vectors. Throws
/// std::invalid_argument when either vector is shorter than kLenEps.
/// The translation field is left zero; see pair_indicators in the loop module.
PairTransform vector_pair_transform(const Vec3& v_i, const Vec3& v_j);

/// Least-squares similarity (or rigid) alignment dst ~= s * R * src + t.
/// Throws std::invalid_argument with fewer than 3 or collinear correspondences.
std::pair<SE3Pose, double> umeyama_align(const std::vector<Vec3>& src,
                                         const std::vector<Vec3>& dst, bool with_scale);

}  // namespace qslam

#endif  // QSLAM_GEOMETRY_HPP
