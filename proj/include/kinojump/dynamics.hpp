#pragma once

#include <array>
#include <optional>
#include <stdexcept>

#include "kinojump/types.hpp"

namespace kinojump {

/// Derivative of the full rigid-body state. d_attitude is a raw quaternion
/// rate in (w, x, y, z) order.
struct StateDeriv {
  Vec3 d_position = Vec3::Zero();
  Vec3 d_velocity = Vec3::Zero();
  Vec4 d_attitude = Vec4::Zero();
  Vec3 d_body_rate = Vec3::Zero();
};

/// Which velocity axes receive the learned residual acceleration.
struct ResidualSelector {
  std::array<bool, 3> velocity_axes{true, true, true};
};

/// Continuous rigid-body dynamics. The disturbance is mass-normalized and
/// enters the velocity derivative only; thrust is collective along body +z.
inline StateDeriv continuous_deriv(const QuadState& x, const RotorInput& u,
                                   const Disturbance& e_f, const QuadParams& params) {
  if (!is_finite(x.position) || !is_finite(x.velocity) || !is_finite(x.attitude) ||
      !is_finite(x.body_rate) || !u.thrusts.allFinite() || !is_finite(e_f.accel))
    throw std::invalid_argument("continuous_deriv: non-finite input");
  const BodyWrench w = mix_rotors(u, params);
  StateDeriv d;
  d.d_position = x.velocity;
  d.d_velocity = Vec3(0.0, 0.0, -params.gravity) +
                 quat_rotate(x.attitude, Vec3(0.0, 0.0, w.collective_thrust)) / params.mass +
                 e_f.accel;
  d.d_attitude = quat_deriv(x.attitude, x.body_rate);
  const Vec3 J = params.inertia;
  const Vec3 Jw = J.cwiseProduct(x.body_rate);
  d.d_body_rate = (w.torque - x.body_rate.cross(Jw)).cwiseQuotient(J);
  return d;
}

namespace detail {

// The 13-dim embedding used by the integrator; quaternion kept as a raw
// 4-vector during stage arithmetic and renormalized once at the end.
inline QuadState state_add(const QuadState& x, const StateDeriv& d, double h) {
  QuadState y;
  y.position = x.position + h * d.d_position;
  y.velocity = x.velocity + h * d.d_velocity;
  const Vec4 q(x.attitude.w() + h * d.d_attitude(0), x.attitude.x() + h * d.d_attitude(1),
               x.attitude.y() + h * d.d_attitude(2), x.attitude.z() + h * d.d_attitude(3));
  y.attitude = Quat(q(0), q(1), q(2), q(3));
  y.body_rate = x.body_rate + h * d.d_body_rate;
  return y;
}

inline StateDeriv deriv_combine(const StateDeriv& k1, const StateDeriv& k2,
                                const StateDeriv& k3, const StateDeriv& k4) {
  StateDeriv d;
  d.d_position = (k1.d_position + 2.0 * k2.d_position + 2.0 * k3.d_position + k4.d_position) / 6.0;
  d.d_velocity = (k1.d_velocity + 2.0 * k2.d_velocity + 2.0 * k3.d_velocity + k4.d_velocity) / 6.0;
  d.d_attitude = (k1.d_attitude + 2.0 * k2.d_attitude + 2.0 * k3.d_attitude + k4.d_attitude) / 6.0;
  d.d_body_rate =
      (k1.d_body_rate + 2.0 * k2.d_body_rate + 2.0 * k3.d_body_rate + k4.d_body_rate) / 6.0;
  return d;
}

/// Classical RK4 over an arbitrary derivative function with zero-order-hold
/// external signals; attitude renormalized after the step.
template <typename DerivFn>
QuadState rk4_generic(const QuadState& x, double dt, DerivFn&& f) {
  const StateDeriv k1 = f(x);
  const StateDeriv k2 = f(state_add(x, k1, 0.5 * dt));
  const StateDeriv k3 = f(state_add(x, k2, 0.5 * dt));
  const StateDeriv k4 = f(state_add(x, k3, dt));
  QuadState y = state_add(x, deriv_combine(k1, k2, k3, k4), dt);
  y.renormalize();
  return y;
}

}  // namespace detail

/// One RK4 step of the nominal dynamics with zero-order-hold input and
/// disturbance.
inline QuadState rk4_step(const QuadState& x, const RotorInput& u, const Disturbance& e_f,
                          double dt, const QuadParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  return detail::rk4_generic(
      x, dt, [&](const QuadState& s) { return continuous_deriv(s, u, e_f, params); });
}

/// Discrete model: RK4 step plus the selected residual acceleration applied
/// additively to the velocity as residual * dt.
inline QuadState discrete_model(const QuadState& x, const RotorInput& u, const Disturbance& e_f,
                                const std::optional<Vec3>& residual,
                                const ResidualSelector& selector, double dt,
                                const QuadParams& params) {
  QuadState y = rk4_step(x, u, e_f, dt, params);
  if (residual) {
    for (int i = 0; i < 3; ++i)
      if (selector.velocity_axes[i]) y.velocity(i) += (*residual)(i)*dt;
  }
  return y;
}

}  // namespace kinojump
