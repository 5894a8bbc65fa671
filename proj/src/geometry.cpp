#include "qslam/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qslam {

bool SE3Pose::is_valid(double tol) const {
    const Mat3 rtr = rotation.transpose() * rotation;
    return (rtr - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
}

Mat4 DualQuadric::matrix() const {
    const Mat3 shape =
        orientation * half_axes.cwiseProduct(half_axes).asDiagonal() * orientation.transpose();
    Mat4 q = Mat4::Zero();
    q.topLeftCorner<3, 3>() = shape - center * center.transpose();
    q.topRightCorner<3, 1>() = -center;
    q.bottomLeftCorner<1, 3>() = -center.transpose();
    q(3, 3) = -1.0;
    return q;
}

DualQuadric DualQuadric::from_matrix(const Mat4& q_in) {
    if (std::abs(q_in(3, 3)) < kLenEps) {
        throw std::invalid_argument("dual quadric: singular homogeneous scale");
    }
    const Mat4 q = q_in / -q_in(3, 3);
    DualQuadric out;
    out.center = -q.topRightCorner<3, 1>();
    const Mat3 shape = q.topLeftCorner<3, 3>() + out.center * out.center.transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(shape);
    if (eig.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument("dual quadric: not an ellipsoid");
    }
    out.half_axes = eig.eigenvalues().cwiseSqrt();
    out.orientation = eig.eigenvectors();
    if (out.orientation.determinant() < 0.0) {
        out.orientation.col(0) *= -1.0;
    }
    return out;
}

double iou_2d(const Box2D& a, const Box2D& b) {
    const double iw = std::min(a.u_max, b.u_max) - std::max(a.u_min, b.u_min);
    const double ih = std::min(a.v_max, b.v_max) - std::max(a.v_min, b.v_min);
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) {
        return 0.0;
    }
    return inter / uni;
}

std::optional<Vec2> project_point(const CameraIntrinsics& k, const SE3Pose& t_cw,
                                  const Vec3& x_world) {
    const Vec3 x_cam = t_cw.apply(x_world);
    if (x_cam.z() <= kDepthEps) {
        return std::nullopt;
    }
    return Vec2{k.fx * x_cam.x() / x_cam.z() + k.cx, k.fy * x_cam.y() / x_cam.z() + k.cy};
}

Vec3 unproject_pixel(const CameraIntrinsics& k, const SE3Pose& t_wc, const Vec2& px,
                     double depth) {
    const Vec3 x_cam{(px.x() - k.cx) / k.fx * depth, (px.y() - k.cy) / k.fy * depth, depth};
    return t_wc.apply(x_cam);
}

std::optional<Box2D> project_quadric_bbox(const CameraIntrinsics& k, const SE3Pose& t_cw,
                                          const DualQuadric& q) {
    if (t_cw.apply(q.center).z() <= kDepthEps) {
        return std::nullopt;
    }
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = t_cw.rotation;
    p.rightCols<1>() = t_cw.translation;
    p = k.matrix() * p;
    Mat3 conic = p * q.matrix() * p.transpose();
    if (std::abs(conic(2, 2)) < kLenEps) {
        return std::nullopt;
    }
    conic /= conic(2, 2);
    // Tangent-line extrema of the conic envelope in u and v.
    const double du = conic(0, 2) * conic(0, 2) - conic(0, 0);
    const double dv = conic(1, 2) * conic(1, 2) - conic(1, 1);
    if (du <= 0.0 || dv <= 0.0) {
        return std::nullopt;  // not a real ellipse
    }
    Box2D box{conic(0, 2) - std::sqrt(du), conic(1, 2) - std::sqrt(dv),
              conic(0, 2) + std::sqrt(du), conic(1, 2) + std::sqrt(dv)};
    box.u_min = std::max(box.u_min, 0.0);
    box.v_min = std::max(box.v_min, 0.0);
    box.u_max = std::min(box.u_max, k.width);
    box.v_max = std::min(box.v_max, k.height);
    if (box.width() <= 0.0 || box.height() <= 0.0) {
        return std::nullopt;
    }
    return box;
}

Mat3 rodrigues(const Vec3& axis, double angle) {
    if (std::abs(axis.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("rodrigues: axis must be unit length");
    }
    Mat3 hat;
    hat << 0.0, -axis.z(), axis.y(), axis.z(), 0.0, -axis.x(), -axis.y(), axis.x(), 0.0;
    const double c = std::cos(angle);
    return c * Mat3::Identity() + (1.0 - c) * axis * axis.transpose() + std::sin(angle) * hat;
}

namespace {

// Any unit vector orthogonal to v, for the anti-parallel rotation axis.
Vec3 orthogonal_unit(const Vec3& v) {
    const Vec3 ref = std::abs(v.x()) < std::abs(v.z()) ? Vec3::UnitX() : Vec3::UnitZ();
    return v.cross(ref).normalized();
}

}  // namespace

PairTransform vector_pair_transform(const Vec3& v_i, const Vec3& v_j) {
    const double n_i = v_i.norm();
    const double n_j = v_j.norm();
    if (n_i <= kLenEps || n_j <= kLenEps) {
        throw std::invalid_argument("vector_pair_transform: vector too short");
    }
    PairTransform pt;
    pt.scale = n_j / n_i;
    const double cos_raw = v_i.dot(v_j) / (n_i * n_j);
    pt.angle = std::acos(std::clamp(cos_raw, -1.0, 1.0));
    const Vec3 cross = v_i.cross(v_j);
    if (pt.angle < kAngleEps) {
        // Parallel: identity rotation about an arbitrary unit axis.
        pt.axis = v_i / n_i;
        pt.rotation = Mat3::Identity();
        return pt;
    }
    if (pt.angle > M_PI - kAngleEps) {
        // Anti-parallel: axis not unique, any orthogonal direction rotates v_i onto -v_i.
        pt.degenerate = true;
        pt.axis = orthogonal_unit(v_i);
    } else {
        pt.axis = cross.normalized();
    }
    pt.rotation = rodrigues(pt.axis, pt.angle);
    return pt;
}

std::pair<SE3Pose, double> umeyama_align(const std::vector<Vec3>& src,
                                         const std::vector<Vec3>& dst, bool with_scale) {
    if (src.size() != dst.size() || src.size() < 3) {
        throw std::invalid_argument("umeyama_align: need >= 3 correspondences");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(src.size());
    Eigen::Matrix3Xd s(3, n);
    Eigen::Matrix3Xd d(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s.col(i) = src[static_cast<size_t>(i)];
        d.col(i) = dst[static_cast<size_t>(i)];
    }
    const Eigen::Matrix3Xd centered = s.colwise() - s.rowwise().mean();
    Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
    if (svd.singularValues()(1) <= 1e-12 * std::max(1.0, svd.singularValues()(0))) {
        throw std::invalid_argument("umeyama_align: collinear correspondences");
    }
    const Mat4 m = Eigen::umeyama(s, d, with_scale);
    const double scale = m.topLeftCorner<3, 3>().colwise().norm().mean();
    SE3Pose pose{m.topLeftCorner<3, 3>() / scale, m.topRightCorner<3, 1>()};
    return {pose, scale};
}

}  // namespace qslam
