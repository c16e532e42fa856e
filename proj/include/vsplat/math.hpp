#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "errors.hpp"

namespace vsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Quaternions are stored (w, x, y, z).
using Quat = Vec4;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline Quat normalized_quat(const Quat& q) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidParameter("zero-norm quaternion");
    return q / n;
}

/// Rotation matrix of a unit quaternion (w, x, y, z).
inline Mat3 rotation_from_unit_quat(const Quat& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

inline Mat3 rotation_from_quat(const Quat& q) { return rotation_from_unit_quat(normalized_quat(q)); }

/// Unit quaternion (w, x, y, z) of a proper rotation matrix.
inline Quat quat_from_rotation(const Mat3& r) {
    Eigen::Quaterniond e(r);
    e.normalize();
    Quat q(e.w(), e.x(), e.y(), e.z());
    if (q[0] < 0.0) q = -q;
    return q;
}

} // namespace vsplat
