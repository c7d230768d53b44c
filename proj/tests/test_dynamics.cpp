#include <doctest.h>

#include "kinojump/dynamics.hpp"
#include "kinojump/rng.hpp"
#include "oracles.hpp"

using namespace kinojump;

namespace {

QuadState random_state(RngStream& rng) {
  QuadState x;
  x.position = rng.normal3(2.0);
  x.velocity = rng.normal3(1.0);
  Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  x.attitude = q;
  x.body_rate = rng.normal3(1.0);
  return x;
}

RotorInput random_input(RngStream& rng, const QuadParams& p) {
  RotorInput u;
  for (int i = 0; i < 4; ++i) u.thrusts(i) = rng.uniform(0.5, 0.9 * p.rotor_thrust_max);
  return u;
}

double state_distance(const QuadState& a, const QuadState& b) {
  return (a.position - b.position).norm() + (a.velocity - b.velocity).norm() +
         (a.attitude.coeffs() - b.attitude.coeffs()).norm() + (a.body_rate - b.body_rate).norm();
}

}  // namespace

TEST_CASE("hover is an equilibrium of the continuous dynamics") {
  QuadParams p;
  QuadState x;
  const StateDeriv d = continuous_deriv(x, RotorInput::hover(p), Disturbance{}, p);
  CHECK(d.d_position.norm() == 0.0);
  CHECK(d.d_velocity.norm() < 1e-12);
  CHECK(d.d_attitude.norm() == 0.0);
  CHECK(d.d_body_rate.norm() == 0.0);
}

TEST_CASE("free fall and disturbance passthrough") {
  QuadParams p;
  QuadState x;
  const StateDeriv ff = continuous_deriv(x, RotorInput{}, Disturbance{}, p);
  CHECK(ff.d_velocity.isApprox(Vec3(0, 0, -9.81), 1e-12));

  Disturbance e;
  e.accel = Vec3(0, 2, 0);
  const StateDeriv d = continuous_deriv(x, RotorInput::hover(p), e, p);
  CHECK(d.d_velocity.isApprox(Vec3(0, 2, 0), 1e-12));
}

TEST_CASE("continuous_deriv is affine in the disturbance with unit coefficient") {
  QuadParams p;
  RngStream rng(5, 0);
  for (int i = 0; i < 20; ++i) {
    const QuadState x = random_state(rng);
    const RotorInput u = random_input(rng, p);
    Disturbance e0, e1;
    e0.accel = rng.normal3(1.0);
    const Vec3 delta = rng.normal3(1.0);
    e1.accel = e0.accel + delta;
    const StateDeriv d0 = continuous_deriv(x, u, e0, p);
    const StateDeriv d1 = continuous_deriv(x, u, e1, p);
    CHECK((d1.d_velocity - d0.d_velocity - delta).norm() < 1e-12);
    CHECK((d1.d_position - d0.d_position).norm() == 0.0);
    CHECK((d1.d_body_rate - d0.d_body_rate).norm() == 0.0);
  }
}

TEST_CASE("rk4 preserves the hover equilibrium") {
  QuadParams p;
  QuadState x;
  const QuadState y = rk4_step(x, RotorInput::hover(p), Disturbance{}, 0.05, p);
  CHECK(state_distance(x, y) < 1e-12);
}

TEST_CASE("rk4 reproduces the ballistic closed form") {
  QuadParams p;
  QuadState x;
  const QuadState y = rk4_step(x, RotorInput{}, Disturbance{}, 0.05, p);
  CHECK(y.velocity.z() == doctest::Approx(-0.4905).epsilon(1e-12));
  CHECK(y.position.z() == doctest::Approx(-0.0122625).epsilon(1e-12));
}

TEST_CASE("rk4 matches the quaternion exponential for constant yaw rate") {
  QuadParams p;
  QuadState x;
  x.body_rate = Vec3(0, 0, 1);
  // hover thrust keeps the translational part quiet; yaw is torque free for a
  // diagonal inertia with wz only
  const QuadState y = rk4_step(x, RotorInput::hover(p), Disturbance{}, 0.05, p);
  const Quat expect = quat_from_axis_angle(Vec3::UnitZ(), 0.05);
  CHECK((y.attitude.coeffs() - expect.coeffs()).norm() < 1e-8);
  CHECK((y.body_rate - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("rk4 attitude stays unit norm") {
  QuadParams p;
  RngStream rng(17, 0);
  for (int i = 0; i < 50; ++i) {
    QuadState x = random_state(rng);
    const RotorInput u = random_input(rng, p);
    for (int k = 0; k < 20; ++k) {
      x = rk4_step(x, u, Disturbance{}, 0.05, p);
      CHECK(std::abs(x.attitude.norm() - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("rk4 one-step error contracts at fourth order") {
  QuadParams p;
  RngStream rng(23, 0);
  int checked = 0;
  for (int i = 0; i < 30; ++i) {
    const QuadState x = random_state(rng);
    const RotorInput u = random_input(rng, p);
    Disturbance e;
    e.accel = rng.normal3(0.5);
    const double dt = 0.08;
    auto reference = [&](double h, int n) {
      QuadState s = x;
      for (int k = 0; k < n; ++k) s = rk4_step(s, u, e, h, p);
      return s;
    };
    // fixed interval: one dt step vs two dt/2 steps, each against a dt/10
    // sub-stepped reference of the same interval
    const double err_full = state_distance(rk4_step(x, u, e, dt, p), reference(dt / 10, 10));
    const QuadState two_half = rk4_step(rk4_step(x, u, e, dt / 2, p), u, e, dt / 2, p);
    const double err_half = state_distance(two_half, reference(dt / 20, 20));
    if (err_full < 1e-13) continue;  // too smooth to measure the order
    const double ratio = err_full / std::max(err_half, 1e-300);
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("trajectories are translation invariant") {
  QuadParams p;
  RngStream rng(29, 0);
  QuadState a = random_state(rng);
  QuadState b = a;
  const Vec3 shift(5.0, -3.0, 11.0);
  b.position += shift;
  const RotorInput u = random_input(rng, p);
  Disturbance e;
  e.accel = Vec3(0.3, -0.2, 0.1);
  for (int k = 0; k < 40; ++k) {
    a = rk4_step(a, u, e, 0.05, p);
    b = rk4_step(b, u, e, 0.05, p);
    CHECK((b.position - a.position - shift).norm() < 1e-12);
    CHECK((b.velocity - a.velocity).norm() < 1e-12);
    CHECK((b.attitude.coeffs() - a.attitude.coeffs()).norm() < 1e-12);
    CHECK((b.body_rate - a.body_rate).norm() < 1e-12);
  }
}

TEST_CASE("discrete model without residual equals plain rk4") {
  QuadParams p;
  RngStream rng(31, 0);
  const QuadState x = random_state(rng);
  const RotorInput u = random_input(rng, p);
  Disturbance e;
  e.accel = Vec3(0.5, 0.1, -0.2);
  const QuadState a = discrete_model(x, u, e, std::nullopt, ResidualSelector{}, 0.05, p);
  const QuadState b = rk4_step(x, u, e, 0.05, p);
  CHECK(state_distance(a, b) == 0.0);
}

TEST_CASE("discrete model injects the residual as a velocity increment") {
  QuadParams p;
  QuadState x;
  const RotorInput u = RotorInput::hover(p);
  const QuadState base = rk4_step(x, u, Disturbance{}, 0.05, p);
  const QuadState with =
      discrete_model(x, u, Disturbance{}, Vec3(0, 1, 0), ResidualSelector{}, 0.05, p);
  CHECK(with.velocity.y() == doctest::Approx(base.velocity.y() + 0.05).epsilon(1e-12));
  CHECK(with.velocity.x() == base.velocity.x());
  CHECK((with.position - base.position).norm() == 0.0);

  ResidualSelector only_x;
  only_x.velocity_axes = {true, false, false};
  const QuadState masked =
      discrete_model(x, u, Disturbance{}, Vec3(1, 1, 0), only_x, 0.05, p);
  CHECK(masked.velocity.x() == doctest::Approx(base.velocity.x() + 0.05).epsilon(1e-12));
  CHECK(masked.velocity.y() == base.velocity.y());
}

TEST_CASE("a residual equal to -e_f cancels the disturbance in the velocity update") {
  QuadParams p;
  RngStream rng(37, 0);
  const QuadState x = random_state(rng);
  const RotorInput u = random_input(rng, p);
  Disturbance e;
  e.accel = Vec3(0, 2, 0);
  const QuadState corrected =
      discrete_model(x, u, e, Vec3(-e.accel), ResidualSelector{}, 0.05, p);
  const QuadState clean = rk4_step(x, u, Disturbance{}, 0.05, p);
  // The selection matrix touches velocity only: the velocity cancellation is
  // exact, while the in-step position contribution of e_f (0.5*e*dt^2) stays.
  CHECK((corrected.velocity - clean.velocity).norm() < 1e-6);
  CHECK((corrected.position - clean.position).norm() < 0.5 * e.accel.norm() * 0.05 * 0.05 + 1e-9);
  CHECK((corrected.attitude.coeffs() - clean.attitude.coeffs()).norm() < 1e-12);
}
