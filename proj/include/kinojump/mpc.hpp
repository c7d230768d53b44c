#pragma once

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kinojump/corridor.hpp"
#include "kinojump/dynamics.hpp"
#include "kinojump/gp.hpp"
#include "kinojump/qp.hpp"
#include "kinojump/search.hpp"
#include "kinojump/types.hpp"

namespace kinojump {

struct OcpConfig {
  int horizon = 20;   // N steps
  double dt = 0.05;   // s
  Vec3 q_position{10.0, 10.0, 10.0};
  Vec3 q_velocity{1.0, 1.0, 1.0};
  Vec3 q_attitude{5.0, 5.0, 5.0};
  Vec3 q_body_rate{0.1, 0.1, 0.1};
  double r_input = 0.1;
  double terminal_weight_scale = 10.0;
  double u_min = 0.0;  // N per rotor
  double u_max = 5.0;
  int sqp_max_iters = 5;
  double kkt_tol = 1e-6;
  double soft_constraint_weight = 50.0;   // corridor penalty weight
  double corridor_activation = 0.05;      // m inside the face where the penalty arms
  double merit_defect_penalty = 1000.0;
  bool linear_test_dynamics = false;      // double-integrator reduction (oracle tests)
  QpSettings qp{/*rho=*/0.1, /*sigma=*/1e-6, /*relax=*/1.6,
                /*eps_abs=*/1e-7, /*eps_rel=*/1e-7, /*max_iters=*/1500,
                /*rho_update_every=*/100};

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("OcpConfig: horizon must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("OcpConfig: dt must be positive");
    if (!(r_input > 0.0)) throw std::invalid_argument("OcpConfig: R must be positive definite");
    if ((q_position.array() < 0.0).any() || (q_velocity.array() < 0.0).any() ||
        (q_attitude.array() < 0.0).any() || (q_body_rate.array() < 0.0).any())
      throw std::invalid_argument("OcpConfig: Q must be positive semidefinite");
    if (!(u_max > u_min)) throw std::invalid_argument("OcpConfig: empty input box");
  }
};

/// Per-step tracking target sampled from the committed route plus the
/// corridor polyhedron it must stay inside (-1 when unconstrained).
struct Reference {
  struct Target {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    double yaw = 0.0;
  };
  std::vector<Target> targets;  // length N+1
  std::vector<int> polyhedron;  // length N+1, index into corridor
};

/// Samples position/velocity on a route at elapsed time t (clamped to the
/// ends; beyond the terminal node the target holds position at zero speed).
inline Reference::Target route_sample(const Route& route, double t) {
  Reference::Target out;
  if (route.nodes.empty()) return out;
  if (t <= 0.0 || route.nodes.size() == 1) {
    out.position = route.nodes.front().state.position;
    out.velocity = t <= 0.0 ? route.nodes.front().state.velocity : Vec3::Zero();
    if (route.nodes.size() == 1) out.velocity = Vec3::Zero();
    return out;
  }
  double acc = 0.0;
  for (std::size_t i = 1; i < route.nodes.size(); ++i) {
    const Motion& m = route.nodes[i].motion_from_parent;
    if (t <= acc + m.duration + 1e-12) {
      const double tau = t - acc;
      const SearchState& a = route.nodes[i - 1].state;
      out.position = a.position + tau * a.velocity + 0.5 * tau * tau * m.accel;
      out.velocity = a.velocity + tau * m.accel;
      return out;
    }
    acc += m.duration;
  }
  out.position = route.nodes.back().state.position;
  out.velocity = Vec3::Zero();
  return out;
}

inline int route_segment_at(const Route& route, double t) {
  if (route.nodes.size() <= 1) return 0;
  double acc = 0.0;
  for (std::size_t i = 1; i < route.nodes.size(); ++i) {
    acc += route.nodes[i].motion_from_parent.duration;
    if (t <= acc + 1e-12) return static_cast<int>(i) - 1;
  }
  return static_cast<int>(route.nodes.size()) - 2;
}

/// Builds the N+1 step reference from the committed route starting at
/// `route_time` seconds into it.
inline Reference build_reference(const Route& committed, const Corridor* corridor,
                                 double route_time, const OcpConfig& cfg) {
  Reference ref;
  const int n = cfg.horizon;
  ref.targets.reserve(n + 1);
  ref.polyhedron.reserve(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = route_time + k * cfg.dt;
    ref.targets.push_back(route_sample(committed, t));
    int poly = -1;
    if (corridor && !corridor->segment_index.empty()) {
      const int seg = route_segment_at(committed, t);
      poly = corridor->segment_index[std::min<std::size_t>(seg, corridor->segment_index.size() - 1)];
    }
    ref.polyhedron.push_back(poly);
  }
  return ref;
}

struct SolverFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OcpSolution {
  std::vector<Eigen::VectorXd> states;  // N+1 raw model states
  std::vector<Eigen::VectorXd> inputs;  // N inputs, within bounds
  double cost = 0.0;
  double kkt_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool merit_monotone = true;
  double solve_ms = 0.0;

  QuadState state_at(int k) const;
  RotorInput input_at(int k) const;
};

/// Multiple-shooting transcription of the tracking OCP. Decision variables
/// are all shooting states and inputs; dynamics defects are equality
/// constraints, input bounds are hard, corridor half-spaces are one-sided
/// quadratic penalties on position.
class Ocp {
 public:
  static Ocp build(const QuadState& x0, const Reference& ref, const Disturbance& e_f_est,
                   const GpModel* gp, const Corridor* corridor, const QuadParams& params,
                   const OcpConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(ref.targets.size()) != cfg.horizon + 1 ||
        ref.polyhedron.size() != ref.targets.size())
      throw std::invalid_argument("Ocp: reference length must be horizon + 1");
    Ocp ocp;
    ocp.cfg_ = cfg;
    ocp.params_ = params;
    ocp.ref_ = ref;
    ocp.e_f_ = e_f_est;
    ocp.gp_ = gp;
    ocp.corridor_ = corridor;
    if (cfg.linear_test_dynamics) {
      ocp.nx_ = 6;
      ocp.nu_ = 3;
      ocp.x0_.resize(6);
      ocp.x0_ << x0.position, x0.velocity;
      ocp.u_ref_ = Eigen::VectorXd::Zero(3);
    } else {
      ocp.nx_ = 13;
      ocp.nu_ = 4;
      ocp.x0_ = pack(x0);
      ocp.u_ref_ = RotorInput::hover(params).thrusts;
    }
    ocp.residuals_.assign(cfg.horizon, Vec3::Zero());
    return ocp;
  }

  int nx() const { return nx_; }
  int nu() const { return nu_; }
  int horizon() const { return cfg_.horizon; }
  const Eigen::VectorXd& x0() const { return x0_; }
  const Eigen::VectorXd& u_ref() const { return u_ref_; }
  const OcpConfig& config() const { return cfg_; }
  const Reference& reference() const { return ref_; }

  static Eigen::VectorXd pack(const QuadState& s) {
    Eigen::VectorXd x(13);
    x << s.position, s.velocity, s.attitude.w(), s.attitude.x(), s.attitude.y(), s.attitude.z(),
        s.body_rate;
    return x;
  }

  static QuadState unpack(const Eigen::VectorXd& x) {
    QuadState s;
    s.position = x.segment<3>(0);
    s.velocity = x.segment<3>(3);
    s.attitude = Quat(x(6), x(7), x(8), x(9));
    s.body_rate = x.segment<3>(10);
    return s;
  }

  /// Discrete dynamics with the step-k frozen GP residual.
  Eigen::VectorXd step(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    if (cfg_.linear_test_dynamics) {
      Eigen::VectorXd y(6);
      const double dt = cfg_.dt;
      y.segment<3>(0) = x.segment<3>(0) + dt * x.segment<3>(3) + 0.5 * dt * dt * u;
      y.segment<3>(3) = x.segment<3>(3) + dt * u;
      return y;
    }
    QuadState s = unpack(x);
    RotorInput in;
    in.thrusts = u;
    const std::optional<Vec3> res =
        gp_ ? std::optional<Vec3>(residuals_[k]) : std::nullopt;
    return pack(discrete_model(s, in, e_f_, res, ResidualSelector{}, cfg_.dt, params_));
  }

  /// Re-evaluates the frozen residuals at the iterate's velocities. No-op
  /// without a GP model.
  void refresh_residuals(const std::vector<Eigen::VectorXd>& states) {
    if (!gp_ || cfg_.linear_test_dynamics) return;
    for (int k = 0; k < cfg_.horizon; ++k) {
      const QuadState s = unpack(states[k]);
      const Vec3 body_vel = s.attitude.conjugate() * s.velocity;
      residuals_[k] = gp_->predict(body_vel).mean;
    }
  }

  /// Exact stage cost at (x, u), including the corridor penalty.
  double stage_cost(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    double c = error_cost(k, x);
    if (k < cfg_.horizon) {
      const Eigen::VectorXd du = u - u_ref_;
      c += 0.5 * cfg_.r_input * du.squaredNorm();
    }
    return c;
  }

  double trajectory_cost(const std::vector<Eigen::VectorXd>& xs,
                         const std::vector<Eigen::VectorXd>& us) const {
    double c = 0.0;
    for (int k = 0; k <= cfg_.horizon; ++k)
      c += stage_cost(k, xs[k], k < cfg_.horizon ? us[k] : u_ref_);
    return c;
  }

  /// Gauss-Newton expansion of the stage cost around x: H += J^T W J,
  /// g += J^T W e, plus the active corridor penalty terms.
  void state_expansion(int k, const Eigen::VectorXd& x, Eigen::MatrixXd& H,
                       Eigen::VectorXd& g) const {
    const double scale = k == cfg_.horizon ? cfg_.terminal_weight_scale : 1.0;
    H.setZero(nx_, nx_);
    g.setZero(nx_);
    if (cfg_.linear_test_dynamics) {
      const Reference::Target& t = ref_.targets[k];
      for (int i = 0; i < 3; ++i) {
        H(i, i) = scale * cfg_.q_position(i);
        H(3 + i, 3 + i) = scale * cfg_.q_velocity(i);
        g(i) = scale * cfg_.q_position(i) * (x(i) - t.position(i));
        g(3 + i) = scale * cfg_.q_velocity(i) * (x(3 + i) - t.velocity(i));
      }
    } else {
      const Reference::Target& t = ref_.targets[k];
      for (int i = 0; i < 3; ++i) {
        H(i, i) = scale * cfg_.q_position(i);
        H(3 + i, 3 + i) = scale * cfg_.q_velocity(i);
        H(10 + i, 10 + i) = scale * cfg_.q_body_rate(i);
        g(i) = scale * cfg_.q_position(i) * (x(i) - t.position(i));
        g(3 + i) = scale * cfg_.q_velocity(i) * (x(3 + i) - t.velocity(i));
        g(10 + i) = scale * cfg_.q_body_rate(i) * x(10 + i);
      }
      // attitude error e = vec(q_ref^-1 (x) q) is linear in q
      Eigen::Matrix<double, 3, 4> J;
      Vec3 e;
      attitude_error(k, x, e, J);
      const Eigen::Matrix<double, 3, 3> W =
          (scale * cfg_.q_attitude).asDiagonal();
      H.block<4, 4>(6, 6) += J.transpose() * W * J;
      g.segment<4>(6) += J.transpose() * W * e;
    }
    corridor_expansion(k, x, H, g);
  }

  void input_expansion(const Eigen::VectorXd& u, Eigen::MatrixXd& H, Eigen::VectorXd& g) const {
    H = cfg_.r_input * Eigen::MatrixXd::Identity(nu_, nu_);
    g = cfg_.r_input * (u - u_ref_);
  }

  bool has_input_bounds() const { return !cfg_.linear_test_dynamics; }

 private:
  double error_cost(int k, const Eigen::VectorXd& x) const {
    const double scale = k == cfg_.horizon ? cfg_.terminal_weight_scale : 1.0;
    const Reference::Target& t = ref_.targets[k];
    double c = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double ep = x(i) - t.position(i);
      const double ev = x(3 + i) - t.velocity(i);
      c += 0.5 * scale * (cfg_.q_position(i) * ep * ep + cfg_.q_velocity(i) * ev * ev);
    }
    if (!cfg_.linear_test_dynamics) {
      Vec3 e;
      Eigen::Matrix<double, 3, 4> J;
      attitude_error(k, x, e, J);
      for (int i = 0; i < 3; ++i) {
        c += 0.5 * scale * cfg_.q_attitude(i) * e(i) * e(i);
        const double w = x(10 + i);
        c += 0.5 * scale * cfg_.q_body_rate(i) * w * w;
      }
    }
    c += corridor_penalty(k, x);
    return c;
  }

  void attitude_error(int k, const Eigen::VectorXd& x, Vec3& e,
                      Eigen::Matrix<double, 3, 4>& J) const {
    const double yaw = ref_.targets[k].yaw;
    const Quat q_ref(std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw));
    // vec(q_ref^-1 (x) q) as a linear map of (qw, qx, qy, qz)
    const double rw = q_ref.w(), rz = q_ref.z();
    // q_err = conj(q_ref) (x) q with conj(q_ref) = (rw, 0, 0, -rz):
    //   q_err.w = rw*qw + rz*qz ; q_err.x = rw*qx + rz*qy
    //   q_err.y = -rz*qx + rw*qy ; q_err.z = -rz*qw + rw*qz
    J.setZero();
    J(0, 1) = rw;
    J(0, 2) = rz;
    J(1, 1) = -rz;
    J(1, 2) = rw;
    J(2, 0) = -rz;
    J(2, 3) = rw;
    const Eigen::Vector4d q = x.segment<4>(6);
    e = J * q;
    const double ew = rw * q(0) + rz * q(3);
    if (ew < 0.0) {
      e = -e;
      J = -J;
    }
  }

  double corridor_penalty(int k, const Eigen::VectorXd& x) const {
    if (!corridor_ || ref_.polyhedron[k] < 0) return 0.0;
    const Polyhedron& poly = corridor_->polyhedra[ref_.polyhedron[k]];
    const Vec3 p = x.segment<3>(0);
    double c = 0.0;
    for (const Polyhedron::Halfspace& h : poly.halfspaces) {
      const double v = h.normal.dot(p) - h.offset;
      if (v > 0.0) c += 0.5 * cfg_.soft_constraint_weight * v * v;
    }
    return c;
  }

  void corridor_expansion(int k, const Eigen::VectorXd& x, Eigen::MatrixXd& H,
                          Eigen::VectorXd& g) const {
    if (!corridor_ || ref_.polyhedron[k] < 0) return;
    const Polyhedron& poly = corridor_->polyhedra[ref_.polyhedron[k]];
    const Vec3 p = x.segment<3>(0);
    for (const Polyhedron::Halfspace& h : poly.halfspaces) {
      const double v = h.normal.dot(p) - h.offset;
      if (v > -cfg_.corridor_activation) {
        const double w = cfg_.soft_constraint_weight;
        H.block<3, 3>(0, 0) += w * h.normal * h.normal.transpose();
        if (v > 0.0) g.segment<3>(0) += w * v * h.normal;
      }
    }
  }

  OcpConfig cfg_;
  QuadParams params_;
  Reference ref_;
  Disturbance e_f_;
  const GpModel* gp_ = nullptr;
  const Corridor* corridor_ = nullptr;
  Eigen::VectorXd x0_;
  Eigen::VectorXd u_ref_;
  int nx_ = 13;
  int nu_ = 4;
  std::vector<Vec3> residuals_;
};

inline QuadState OcpSolution::state_at(int k) const {
  QuadState s = Ocp::unpack(states[k]);
  s.renormalize();
  return s;
}

inline RotorInput OcpSolution::input_at(int k) const {
  RotorInput u;
  u.thrusts = inputs[k];
  return u;
}

namespace detail {

inline double defect_l1(const std::vector<Eigen::VectorXd>& defects) {
  double s = 0.0;
  for (const auto& d : defects) s += d.lpNorm<1>();
  return s;
}

inline double defect_inf(const std::vector<Eigen::VectorXd>& defects) {
  double s = 0.0;
  for (const auto& d : defects) s = std::max(s, d.lpNorm<Eigen::Infinity>());
  return s;
}

}  // namespace detail

/// Sequential quadratic programming over the multiple-shooting OCP:
/// Gauss-Newton Hessian, finite-difference dynamics Jacobians, convex QP
/// subproblems, merit line search, warm start from a previous solution.
inline OcpSolution solve_sqp(Ocp& ocp, const OcpSolution* warm = nullptr) {
  const auto t_start = std::chrono::steady_clock::now();
  const int N = ocp.horizon();
  const int nx = ocp.nx();
  const int nu = ocp.nu();
  const OcpConfig& cfg = ocp.config();

  // Initial iterate: warm-started inputs shifted one step, states re-rolled
  // from the measured state so the initial defects vanish.
  std::vector<Eigen::VectorXd> us(N);
  for (int k = 0; k < N; ++k) {
    if (warm && static_cast<int>(warm->inputs.size()) == N)
      us[k] = warm->inputs[std::min(k + 1, N - 1)];
    else
      us[k] = ocp.u_ref();
    if (ocp.has_input_bounds())
      us[k] = us[k].cwiseMax(cfg.u_min).cwiseMin(cfg.u_max);
  }
  std::vector<Eigen::VectorXd> xs(N + 1);
  xs[0] = ocp.x0();
  for (int k = 0; k < N; ++k) xs[k + 1] = ocp.step(k, xs[k], us[k]);
  ocp.refresh_residuals(xs);
  for (int k = 0; k < N; ++k) xs[k + 1] = ocp.step(k, xs[k], us[k]);

  OcpSolution sol;
  sol.merit_monotone = true;

  std::vector<Eigen::VectorXd> defects(N);
  auto compute_defects = [&](const std::vector<Eigen::VectorXd>& x,
                             const std::vector<Eigen::VectorXd>& u) {
    std::vector<Eigen::VectorXd> d(N);
    for (int k = 0; k < N; ++k) d[k] = ocp.step(k, x[k], u[k]) - x[k + 1];
    return d;
  };

  auto merit = [&](const std::vector<Eigen::VectorXd>& x, const std::vector<Eigen::VectorXd>& u,
                   const std::vector<Eigen::VectorXd>& d) {
    return ocp.trajectory_cost(x, u) + cfg.merit_defect_penalty * detail::defect_l1(d);
  };

  const double fd_h = 1e-6;
  double prev_merit = std::numeric_limits<double>::infinity();
  int it = 0;
  for (it = 1; it <= cfg.sqp_max_iters; ++it) {
    ocp.refresh_residuals(xs);
    defects = compute_defects(xs, us);
    const double cur_merit = merit(xs, us, defects);
    if (cur_merit > prev_merit + 1e-9) sol.merit_monotone = false;
    prev_merit = cur_merit;

    // Dynamics Jacobians by forward differences around the iterate.
    std::vector<Eigen::MatrixXd> As(N), Bs(N);
    for (int k = 0; k < N; ++k) {
      const Eigen::VectorXd base = ocp.step(k, xs[k], us[k]);
      As[k].resize(nx, nx);
      Bs[k].resize(nx, nu);
      for (int j = 0; j < nx; ++j) {
        Eigen::VectorXd xp = xs[k];
        xp(j) += fd_h;
        As[k].col(j) = (ocp.step(k, xp, us[k]) - base) / fd_h;
      }
      for (int j = 0; j < nu; ++j) {
        Eigen::VectorXd up = us[k];
        up(j) += fd_h;
        Bs[k].col(j) = (ocp.step(k, xs[k], up) - base) / fd_h;
      }
    }

    // Assemble the QP over [dx_0..dx_N, du_0..du_{N-1}].
    const int n_var = nx * (N + 1) + nu * N;
    const int n_eq = nx * (N + 1);
    std::vector<Eigen::Triplet<double>> h_trips, a_trips;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n_var);
    Eigen::VectorXd b_eq(n_eq);
    const auto xi = [&](int k) { return nx * k; };
    const auto ui = [&](int k) { return nx * (N + 1) + nu * k; };

    Eigen::MatrixXd Hb;
    Eigen::VectorXd gb;
    for (int k = 0; k <= N; ++k) {
      ocp.state_expansion(k, xs[k], Hb, gb);
      for (int i = 0; i < nx; ++i) {
        g(xi(k) + i) += gb(i);
        for (int j = 0; j < nx; ++j)
          if (Hb(i, j) != 0.0) h_trips.emplace_back(xi(k) + i, xi(k) + j, Hb(i, j));
      }
    }
    for (int k = 0; k < N; ++k) {
      ocp.input_expansion(us[k], Hb, gb);
      for (int i = 0; i < nu; ++i) {
        g(ui(k) + i) += gb(i);
        for (int j = 0; j < nu; ++j)
          if (Hb(i, j) != 0.0) h_trips.emplace_back(ui(k) + i, ui(k) + j, Hb(i, j));
      }
    }
    // dx_0 = x0 - xs[0] (zero once rolled out, kept for generality)
    for (int i = 0; i < nx; ++i) {
      a_trips.emplace_back(i, xi(0) + i, 1.0);
      b_eq(i) = ocp.x0()(i) - xs[0](i);
    }
    for (int k = 0; k < N; ++k) {
      const int row = nx * (k + 1);
      for (int i = 0; i < nx; ++i) {
        a_trips.emplace_back(row + i, xi(k + 1) + i, -1.0);
        b_eq(row + i) = -defects[k](i);
        for (int j = 0; j < nx; ++j)
          if (As[k](i, j) != 0.0) a_trips.emplace_back(row + i, xi(k) + j, As[k](i, j));
        for (int j = 0; j < nu; ++j)
          if (Bs[k](i, j) != 0.0) a_trips.emplace_back(row + i, ui(k) + j, Bs[k](i, j));
      }
    }
    int n_in = 0;
    std::vector<Eigen::Triplet<double>> in_trips;
    Eigen::VectorXd l_in, u_in;
    if (ocp.has_input_bounds()) {
      n_in = nu * N;
      l_in.resize(n_in);
      u_in.resize(n_in);
      for (int k = 0; k < N; ++k)
        for (int i = 0; i < nu; ++i) {
          in_trips.emplace_back(nu * k + i, ui(k) + i, 1.0);
          l_in(nu * k + i) = cfg.u_min - us[k](i);
          u_in(nu * k + i) = cfg.u_max - us[k](i);
        }
    } else {
      l_in.resize(0);
      u_in.resize(0);
    }

    Eigen::SparseMatrix<double> H(n_var, n_var), A_eq(n_eq, n_var), A_in(n_in, n_var);
    H.setFromTriplets(h_trips.begin(), h_trips.end());
    A_eq.setFromTriplets(a_trips.begin(), a_trips.end());
    A_in.setFromTriplets(in_trips.begin(), in_trips.end());

    const QpResult qp = qp_solve(H, g, A_eq, b_eq, A_in, l_in, u_in, cfg.qp);
    if (qp.status == QpStatus::PrimalInfeasible)
      throw SolverFault("solve_sqp: QP subproblem infeasible");

    // Merit line search on the full step.
    double alpha = 1.0;
    bool accepted = false;
    std::vector<Eigen::VectorXd> x_new(N + 1), u_new(N);
    for (int ls = 0; ls < 8; ++ls, alpha *= 0.5) {
      for (int k = 0; k <= N; ++k) x_new[k] = xs[k] + alpha * qp.x.segment(xi(k), nx);
      for (int k = 0; k < N; ++k) {
        u_new[k] = us[k] + alpha * qp.x.segment(ui(k), nu);
        if (ocp.has_input_bounds())
          u_new[k] = u_new[k].cwiseMax(cfg.u_min).cwiseMin(cfg.u_max);
      }
      const auto d_new = compute_defects(x_new, u_new);
      if (merit(x_new, u_new, d_new) <= cur_merit + 1e-12) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no progress; keep the current iterate

    const double step_inf = alpha * qp.x.lpNorm<Eigen::Infinity>();
    xs = std::move(x_new);
    us = std::move(u_new);
    defects = compute_defects(xs, us);
    sol.kkt_residual = std::max(detail::defect_inf(defects), step_inf);
    if (sol.kkt_residual < cfg.kkt_tol) {
      sol.converged = true;
      break;
    }
  }
  sol.iterations = std::min(it, cfg.sqp_max_iters);

  // Projection rollout: re-simulate the accepted inputs from x0 so the
  // returned trajectory satisfies the dynamics exactly.
  xs[0] = ocp.x0();
  for (int k = 0; k < N; ++k) {
    if (ocp.has_input_bounds()) us[k] = us[k].cwiseMax(cfg.u_min).cwiseMin(cfg.u_max);
    xs[k + 1] = ocp.step(k, xs[k], us[k]);
  }
  sol.states = xs;
  sol.inputs = us;
  sol.cost = ocp.trajectory_cost(xs, us);
  if (!sol.converged)
    sol.kkt_residual = std::min(sol.kkt_residual, detail::defect_inf(compute_defects(xs, us)));
  sol.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
          .count();
  return sol;
}

/// Convenience wrapper mirroring the module operation list.
inline Ocp build_ocp(const QuadState& x0, const Reference& ref, const Disturbance& e_f_est,
                     const GpModel* gp, const Corridor* corridor, const QuadParams& params,
                     const OcpConfig& cfg) {
  return Ocp::build(x0, ref, e_f_est, gp, corridor, params, cfg);
}

/// Receding-horizon controller: samples the reference from the committed
/// route, solves the OCP, returns the first input, keeps the solution for
/// warm starting.
class MpcController {
 public:
  MpcController(const QuadParams& params, const OcpConfig& cfg) : params_(params), cfg_(cfg) {}

  void set_gp(std::shared_ptr<const GpModel> gp) { gp_ = std::move(gp); }
  void reset() { last_.reset(); }
  const std::optional<OcpSolution>& last_solution() const { return last_; }

  RotorInput control_step(const QuadState& x_measured, const Route& committed,
                          double route_time, const Corridor& corridor,
                          const Disturbance& e_f_est) {
    if (committed.nodes.empty())
      throw std::invalid_argument("control_step: committed route is empty");
    const Reference ref = build_reference(committed, &corridor, route_time, cfg_);
    Ocp ocp = Ocp::build(x_measured, ref, e_f_est, gp_ ? gp_.get() : nullptr, &corridor,
                         params_, cfg_);
    OcpSolution sol = solve_sqp(ocp, last_ ? &*last_ : nullptr);
    last_ = sol;
    return sol.input_at(0);
  }

 private:
  QuadParams params_;
  OcpConfig cfg_;
  std::shared_ptr<const GpModel> gp_;
  std::optional<OcpSolution> last_;
};

}  // namespace kinojump
