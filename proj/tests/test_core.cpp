#include <doctest.h>

#include "kinojump/rng.hpp"
#include "kinojump/types.hpp"
#include "oracles.hpp"

using namespace kinojump;

TEST_CASE("quat_rotate identity and canonical axis") {
  CHECK(quat_rotate(Quat::Identity(), Vec3(1, 2, 3)).isApprox(Vec3(1, 2, 3), 1e-15));
  const Quat qz = quat_from_axis_angle(Vec3::UnitZ(), M_PI / 2.0);
  const Vec3 r = quat_rotate(qz, Vec3(1, 0, 0));
  CHECK(r.isApprox(Vec3(0, 1, 0), 1e-12));
}

TEST_CASE("quat_rotate matches rotation-matrix product on random quaternions") {
  RngStream rng(42, 0);
  for (int i = 0; i < 200; ++i) {
    Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    const Vec3 v = rng.normal3(2.0);
    const Eigen::Matrix3d R = oracles::rotation_from_quat(q.w(), q.x(), q.y(), q.z());
    CHECK((quat_rotate(q, v) - R * v).norm() < 1e-12);
  }
}

TEST_CASE("quat_rotate preserves norm and is linear in v") {
  RngStream rng(7, 0);
  for (int i = 0; i < 100; ++i) {
    Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    const Vec3 a = rng.normal3(1.0), b = rng.normal3(1.0);
    CHECK(std::abs(quat_rotate(q, a).norm() - a.norm()) < 1e-9);
    const Vec3 lhs = quat_rotate(q, 2.0 * a + 3.0 * b);
    const Vec3 rhs = 2.0 * quat_rotate(q, a) + 3.0 * quat_rotate(q, b);
    CHECK((lhs - rhs).norm() < 1e-9);
  }
}

TEST_CASE("quat_rotate rejects non-finite input") {
  CHECK_THROWS_AS(quat_rotate(Quat::Identity(), Vec3(std::nan(""), 0, 0)), std::invalid_argument);
}

TEST_CASE("quat_deriv zero rate and canonical case") {
  RngStream rng(3, 0);
  Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  CHECK(quat_deriv(q, Vec3::Zero()).norm() == 0.0);
  const Vec4 d = quat_deriv(Quat::Identity(), Vec3(0, 0, 1));
  CHECK(d.isApprox(Vec4(0, 0, 0, 0.5), 1e-15));
}

TEST_CASE("quat_deriv is orthogonal to q") {
  RngStream rng(11, 0);
  for (int i = 0; i < 200; ++i) {
    Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    const Vec3 w = rng.normal3(3.0);
    const Vec4 d = quat_deriv(q, w);
    const double dot = d(0) * q.w() + d(1) * q.x() + d(2) * q.y() + d(3) * q.z();
    CHECK(std::abs(dot) < 1e-12);
  }
}

TEST_CASE("rng streams are reproducible") {
  RngStream a(1234, 5), b(1234, 5), c(1234, 6);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 10000; ++i) {
    const double x = a.uniform01();
    all_equal = all_equal && x == b.uniform01();
    any_diff = any_diff || x != c.uniform01();
  }
  CHECK(all_equal);
  CHECK(any_diff);
  // normal draws too
  RngStream d(99, 0), e(99, 0);
  for (int i = 0; i < 1000; ++i) CHECK(d.normal() == e.normal());
}

TEST_CASE("quad params validation") {
  QuadParams p;
  CHECK_NOTHROW(p.validate());
  QuadParams bad = p;
  bad.mass = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.rotor_thrust_max = 1.0;  // 4 N total < 9.81 N hover
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("rotor mixing: hover produces zero torque, thrust sums") {
  QuadParams p;
  const RotorInput u = RotorInput::hover(p);
  const BodyWrench w = mix_rotors(u, p);
  CHECK(w.collective_thrust == doctest::Approx(p.mass * p.gravity));
  CHECK(w.torque.norm() < 1e-12);
}

TEST_CASE("rotor mixing: differential thrust gives the expected torque signs") {
  QuadParams p;
  RotorInput u = RotorInput::hover(p);
  // raise the left rotors (1: back-left, 2: front-left) -> positive roll torque
  u.thrusts(1) += 0.1;
  u.thrusts(2) += 0.1;
  CHECK(mix_rotors(u, p).torque.x() > 0.0);
  u = RotorInput::hover(p);
  // raise the CW rotors (2, 3) -> positive yaw torque
  u.thrusts(2) += 0.1;
  u.thrusts(3) += 0.1;
  CHECK(mix_rotors(u, p).torque.z() > 0.0);
}
