#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace stepfuse {

/// Wraps an angle to (-pi, pi]. The +pi boundary maps to +pi, -pi to +pi.
inline double wrap_pi(double a) {
    a = std::remainder(a, 2.0 * std::numbers::pi);
    if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
    return a;
}

/// Yaw (rotation about world z) of a body-to-world quaternion, ZYX convention.
inline double yaw_of(const Eigen::Quaterniond& q) {
    const double s = 2.0 * (q.w() * q.z() + q.x() * q.y());
    const double c = 1.0 - 2.0 * (q.y() * q.y() + q.z() * q.z());
    return std::atan2(s, c);
}

/// Quaternion exponential of a rotation vector (axis * angle).
inline Eigen::Quaterniond quat_exp(const Eigen::Vector3d& v) {
    const double theta = v.norm();
    const double half = 0.5 * theta;
    // sin(theta/2)/theta, series-expanded near zero
    const double s = theta < 1e-9 ? 0.5 - theta * theta / 48.0 : std::sin(half) / theta;
    return Eigen::Quaterniond(std::cos(half), s * v.x(), s * v.y(), s * v.z());
}

}  // namespace stepfuse
