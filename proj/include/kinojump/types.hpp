#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace kinojump {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

// Quaternion convention: world-from-body, components ordered (w, x, y, z)
// wherever a quaternion is written out as four numbers.
using Quat = Eigen::Quaterniond;

inline bool is_finite(double v) { return std::isfinite(v); }
inline bool is_finite(const Vec3& v) { return v.allFinite(); }
inline bool is_finite(const Quat& q) { return q.coeffs().allFinite(); }

/// Physical parameters of the vehicle plus the planning envelope limits.
struct QuadParams {
  double mass = 1.0;                  // kg
  Vec3 inertia{0.01, 0.01, 0.02};    // kg m^2, diagonal of the inertia tensor
  double gravity = 9.81;              // m/s^2, acts along world -z
  double arm_length = 0.17;           // m, rotor center to body center
  double thrust_to_torque = 0.016;    // m, yaw moment per unit thrust
  double rotor_thrust_max = 5.0;      // N per rotor
  double v_max = 3.0;                 // m/s, per-axis planning limit
  double a_max = 2.0;                 // m/s^2, per-axis planning limit

  void validate() const {
    if (!(mass > 0.0)) throw std::invalid_argument("QuadParams: mass must be positive");
    if (!(inertia.minCoeff() > 0.0))
      throw std::invalid_argument("QuadParams: inertia diagonal must be positive");
    if (!(v_max > 0.0)) throw std::invalid_argument("QuadParams: v_max must be positive");
    if (!(a_max > 0.0)) throw std::invalid_argument("QuadParams: a_max must be positive");
    if (!(4.0 * rotor_thrust_max > mass * gravity))
      throw std::invalid_argument("QuadParams: vehicle cannot hover (4*T_max <= m*g)");
  }
};

/// Full rigid-body state: position/velocity in world frame, attitude
/// world-from-body, body rates in body frame.
struct QuadState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();
  Vec3 body_rate = Vec3::Zero();

  void renormalize() { attitude.normalize(); }
};

/// Per-rotor thrusts in newtons, order: front-right, back-left, front-left,
/// back-right (X configuration, body x forward / y left / z up).
struct RotorInput {
  Vec4 thrusts = Vec4::Zero();

  static RotorInput hover(const QuadParams& p) {
    RotorInput u;
    u.thrusts.setConstant(p.mass * p.gravity / 4.0);
    return u;
  }
  void clamp(const QuadParams& p) {
    thrusts = thrusts.cwiseMax(0.0).cwiseMin(p.rotor_thrust_max);
  }
};

/// External aerodynamic force divided by mass, world frame. Stored
/// mass-normalized so it adds directly to the velocity derivative.
struct Disturbance {
  Vec3 accel = Vec3::Zero();
};

/// Rotates v by the unit quaternion q (i.e. R(q) * v).
inline Vec3 quat_rotate(const Quat& q, const Vec3& v) {
  if (!is_finite(q) || !is_finite(v))
    throw std::invalid_argument("quat_rotate: non-finite input");
  return q * v;
}

/// Time derivative of q under body angular rate omega: 0.5 * q (x) (0, omega).
/// Returned in (w, x, y, z) order; orthogonal to q whenever q is unit.
inline Vec4 quat_deriv(const Quat& q, const Vec3& omega) {
  if (!is_finite(q) || !is_finite(omega))
    throw std::invalid_argument("quat_deriv: non-finite input");
  const Quat omega_q(0.0, omega.x(), omega.y(), omega.z());
  const Quat d = q * omega_q;
  return 0.5 * Vec4(d.w(), d.x(), d.y(), d.z());
}

/// Quaternion for a rotation of `angle` radians about unit `axis`.
inline Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  return Quat(Eigen::AngleAxisd(angle, axis));
}

/// Collective thrust magnitude and body torque produced by the four rotors.
/// X configuration: rotors 0/1 spin CCW (reaction torque -z), 2/3 spin CW.
struct BodyWrench {
  double collective_thrust = 0.0;  // N, along body +z
  Vec3 torque = Vec3::Zero();      // N m, body frame
};

inline BodyWrench mix_rotors(const RotorInput& u, const QuadParams& p) {
  const double a = p.arm_length / std::sqrt(2.0);
  const double k = p.thrust_to_torque;
  const Vec4& t = u.thrusts;
  BodyWrench w;
  w.collective_thrust = t.sum();
  w.torque.x() = a * (-t(0) + t(1) + t(2) - t(3));
  w.torque.y() = a * (-t(0) + t(1) - t(2) + t(3));
  w.torque.z() = k * (-t(0) - t(1) + t(2) + t(3));
  return w;
}

}  // namespace kinojump
