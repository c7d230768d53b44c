// Independent reference computations used by the test suites. Everything here
// is deliberately brute-force or closed-form and shares no code with the
// implementation paths it checks.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracles {

/// Minimum time for a 1-D double integrator to cover displacement d starting
/// at velocity v0, with free terminal velocity, |a| <= a_max, |v| <= v_max.
/// Closed form: full acceleration toward the target, cruise at v_max.
inline double axis_min_time(double d, double v0, double a_max, double v_max) {
  if (d < 0.0) return axis_min_time(-d, -v0, a_max, v_max);
  if (d == 0.0) return 0.0;
  double t = 0.0;
  // If moving away from the target, first brake to rest.
  if (v0 < 0.0) {
    t += -v0 / a_max;
    d += 0.5 * v0 * v0 / a_max;  // distance lost while braking
    v0 = 0.0;
  }
  const double d_to_vmax = (v_max * v_max - v0 * v0) / (2.0 * a_max);
  if (d <= d_to_vmax) {
    t += (std::sqrt(v0 * v0 + 2.0 * a_max * d) - v0) / a_max;
  } else {
    t += (v_max - v0) / a_max + (d - d_to_vmax) / v_max;
  }
  return t;
}

/// Per-axis lower bound on point-to-point travel time (axes are independent
/// under the infinity-norm limits): the slowest axis dominates.
inline double min_travel_time(const Eigen::Vector3d& from_p, const Eigen::Vector3d& from_v,
                              const Eigen::Vector3d& to_p, double a_max, double v_max) {
  double t = 0.0;
  for (int i = 0; i < 3; ++i)
    t = std::max(t, axis_min_time(to_p(i) - from_p(i), from_v(i), a_max, v_max));
  return t;
}

/// Rotation matrix from a unit quaternion (w, x, y, z), textbook formula.
inline Eigen::Matrix3d rotation_from_quat(double w, double x, double y, double z) {
  Eigen::Matrix3d R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

/// Equality-constrained QP oracle: solves min 0.5 x'Hx + g'x s.t. Ax = b by a
/// dense KKT factorization.
inline Eigen::VectorXd kkt_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                 const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(g.size());
  const int m = static_cast<int>(b.size());
  Eigen::MatrixXd K(n + m, n + m);
  K.setZero();
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, m) = A.transpose();
  K.bottomLeftCorner(m, n) = A;
  Eigen::VectorXd rhs(n + m);
  rhs.head(n) = -g;
  rhs.tail(m) = b;
  const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
  return sol.head(n);
}

/// Brute-force point-in-cylinder occupancy for forest rasterization checks.
struct CylinderRef {
  double cx, cy, radius, height;
};

inline bool point_in_any_cylinder(const Eigen::Vector3d& p, const std::vector<CylinderRef>& cyls) {
  for (const CylinderRef& c : cyls) {
    const double dx = p.x() - c.cx, dy = p.y() - c.cy;
    if (dx * dx + dy * dy <= c.radius * c.radius && p.z() >= 0.0 && p.z() <= c.height)
      return true;
  }
  return false;
}

}  // namespace oracles
