#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "kinojump/corridor.hpp"
#include "kinojump/disturbance.hpp"
#include "kinojump/dynamics.hpp"
#include "kinojump/gp.hpp"
#include "kinojump/mpc.hpp"
#include "kinojump/rng.hpp"
#include "kinojump/search.hpp"
#include "kinojump/types.hpp"
#include "kinojump/voxel_map.hpp"

namespace kinojump {

struct SimConfig {
  double dt = 0.05;                    // s, control and plant step
  double timeout = 60.0;               // s
  double success_radius = 0.5;         // m
  double commit_horizon = 2.0;         // s
  double replan_fraction = 0.5;        // replan when this much of the committed route is consumed
  double drag_coeff = 0.3;             // 1/s, linear drag injected into the plant only
  double est_sigma = 0.1;              // m/s^2, estimator noise
  double est_tau = 0.2;                // s, estimator filter time constant
  Vec3 window_half_extent{10.0, 10.0, 5.0};  // m, sliding window half extent
};

enum class PlannerKind { KinoJss, BaselineAstar };
enum class ControllerKind { GpMpc, NominalMpc };

struct EpisodeConfig {
  QuadParams params;
  SearchConfig search;
  OcpConfig ocp;
  SimConfig sim;
  DisturbanceSpec disturbance;
  PlannerKind planner = PlannerKind::KinoJss;
  ControllerKind controller = ControllerKind::NominalMpc;
  Vec3 start{2.0, 20.0, 2.5};
  Vec3 goal{38.0, 20.0, 2.5};
  std::uint64_t seed = 0;
  std::shared_ptr<const GpModel> gp;  // required for GpMpc
};

struct TraceRow {
  double t = 0.0;
  QuadState state;
  Vec3 ref_position = Vec3::Zero();
  Vec3 ref_velocity = Vec3::Zero();
  Vec4 input = Vec4::Zero();
  Vec3 e_f_true = Vec3::Zero();
  Vec3 e_f_est = Vec3::Zero();
  int solver_iterations = 0;
  double solver_kkt = 0.0;
  double solver_ms = 0.0;
  bool solver_converged = false;
  bool replanned = false;
};

struct EpisodeResult {
  bool success = false;
  bool collision = false;
  bool left_map = false;
  double completion_time = 0.0;        // s (simulated)
  double mean_position_error = 0.0;    // m, vs committed reference
  double max_position_error = 0.0;     // m
  double control_cost = 0.0;           // sum |a_cmd|^2 dt
  std::vector<double> search_time_per_replan_ms;
  std::vector<std::int64_t> search_propagations;
  int steps = 0;
  int replans = 0;
  int search_failures = 0;
  int solver_faults = 0;
  int route_violations = 0;            // failed route validity checks
  bool solver_merit_monotone = true;
  double mean_solver_iters = 0.0;
  double mean_solver_ms = 0.0;
};

namespace detail {

inline QuadState plant_step(const QuadState& x, const RotorInput& u, const Disturbance& e_f,
                            double drag_coeff, double dt, const QuadParams& params) {
  return rk4_generic(x, dt, [&](const QuadState& s) {
    StateDeriv d = continuous_deriv(s, u, e_f, params);
    d.d_velocity -= drag_coeff * s.velocity;
    return d;
  });
}

inline Vec3 clamp_window_center(const VoxelMap& map, const Vec3& p) {
  const Vec3 lo = map.origin() + Vec3::Constant(0.5 * map.resolution());
  const Vec3 hi = map.max_corner() - Vec3::Constant(0.5 * map.resolution());
  return p.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace detail

/// Closed-loop episode: recenter window, replan when the committed route is
/// consumed or invalidated, split + corridor, MPC step, plant propagation
/// under the true sampled disturbance. Failures are recorded outcomes.
/// `tuples`, when given, collects (state, input, estimate, next state)
/// transitions for GP training.
inline EpisodeResult run_episode(const EpisodeConfig& cfg, const VoxelMap& base_map,
                                 std::vector<TraceRow>* trace = nullptr,
                                 std::vector<TrainingTuple>* tuples = nullptr) {
  cfg.params.validate();
  if (cfg.controller == ControllerKind::GpMpc && !cfg.gp)
    throw std::invalid_argument("run_episode: GpMpc requires a trained GP model");

  RngStream rng_dist(cfg.seed, 1);
  DisturbanceEstimator estimator(cfg.sim.est_sigma, cfg.sim.est_tau, RngStream(cfg.seed, 2));

  VoxelMap map = base_map.with_window_half_extent(cfg.sim.window_half_extent)
                     .recenter_window(detail::clamp_window_center(base_map, cfg.start));

  QuadState x;
  x.position = cfg.start;

  MpcController controller(cfg.params, cfg.ocp);
  if (cfg.controller == ControllerKind::GpMpc) controller.set_gp(cfg.gp);

  PlannerConfig pcfg;
  pcfg.commit_horizon = cfg.sim.commit_horizon;
  pcfg.inflate = cfg.search.inflate;

  EpisodeResult res;
  std::optional<RouteSplit> split;
  std::optional<Corridor> corridor;
  double route_time = 0.0;
  RotorInput u_prev = RotorInput::hover(cfg.params);
  double err_sum = 0.0;
  std::int64_t err_count = 0;
  double iter_sum = 0.0, solver_ms_sum = 0.0;
  std::int64_t solve_count = 0;

  const int max_steps = static_cast<int>(std::ceil(cfg.sim.timeout / cfg.sim.dt));
  for (int step = 0; step < max_steps; ++step) {
    const double t = step * cfg.sim.dt;
    map = map.recenter_window(detail::clamp_window_center(map, x.position));

    const Disturbance e_f_true = sample_disturbance(cfg.disturbance, t, rng_dist);
    const Disturbance e_f_est = estimator.update(cfg.disturbance.nominal_at(t), cfg.sim.dt);

    bool need_replan = !split.has_value();
    if (split) {
      if (route_time > cfg.sim.replan_fraction * std::max(1e-9, split->committed.total_time))
        need_replan = true;
      for (const SearchNode& n : split->committed.nodes)
        if (map.is_free(n.state.position, cfg.search.inflate) == Occupancy::Occupied) {
          need_replan = true;
          break;
        }
    }

    bool replanned = false;
    if (need_replan) {
      SearchState s0;
      s0.position = x.position;
      s0.velocity =
          x.velocity.cwiseMax(-cfg.params.v_max + 1e-9).cwiseMin(cfg.params.v_max - 1e-9);
      if (map.is_free(s0.position, cfg.search.inflate) == Occupancy::Free) {
        SearchConfig scfg = cfg.search;
        scfg.seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (res.replans + 1));
        const SearchOutcome out =
            cfg.planner == PlannerKind::KinoJss
                ? kino_jss_search(s0, cfg.goal, map, e_f_est, cfg.params, scfg)
                : baseline_kino_astar(s0, cfg.goal, map, e_f_est, cfg.params, scfg);
        if (out.ok()) {
          if (!validate_route(*out.route, map, cfg.params, cfg.search).ok())
            ++res.route_violations;
          try {
            RouteSplit sp = split_route(*out.route, map, pcfg);
            Corridor co = build_corridor(sp, map, pcfg);
            split = std::move(sp);
            corridor = std::move(co);
            route_time = 0.0;
            ++res.replans;
            replanned = true;
            res.search_time_per_replan_ms.push_back(out.stats.wall_ms);
            res.search_propagations.push_back(out.stats.propagations);
          } catch (const std::exception&) {
            ++res.search_failures;  // corridor fault: keep the previous plan
          }
        } else {
          ++res.search_failures;
        }
      } else {
        ++res.search_failures;
      }
    }

    TraceRow row;
    row.t = t;
    row.state = x;
    row.e_f_true = e_f_true.accel;
    row.e_f_est = e_f_est.accel;
    row.replanned = replanned;

    RotorInput u = u_prev;
    if (split) {
      const Reference::Target target = route_sample(split->committed, route_time);
      const double err = (x.position - target.position).norm();
      err_sum += err;
      ++err_count;
      res.max_position_error = std::max(res.max_position_error, err);
      row.ref_position = target.position;
      row.ref_velocity = target.velocity;
      try {
        u = controller.control_step(x, split->committed, route_time, *corridor, e_f_est);
        const OcpSolution& sol = *controller.last_solution();
        row.solver_iterations = sol.iterations;
        row.solver_kkt = sol.kkt_residual;
        row.solver_ms = sol.solve_ms;
        row.solver_converged = sol.converged;
        res.solver_merit_monotone = res.solver_merit_monotone && sol.merit_monotone;
        iter_sum += sol.iterations;
        solver_ms_sum += sol.solve_ms;
        ++solve_count;
      } catch (const SolverFault&) {
        ++res.solver_faults;
        u = u_prev;  // declared fallback
      }
    }
    u.clamp(cfg.params);
    row.input = u.thrusts;
    if (trace) trace->push_back(row);

    const Vec3 a_cmd = quat_rotate(x.attitude, Vec3(0, 0, u.thrusts.sum() / cfg.params.mass)) +
                       Vec3(0, 0, -cfg.params.gravity);
    res.control_cost += a_cmd.squaredNorm() * cfg.sim.dt;

    const QuadState x_next =
        detail::plant_step(x, u, e_f_true, cfg.sim.drag_coeff, cfg.sim.dt, cfg.params);
    if (tuples) tuples->push_back({x, u, e_f_est, x_next});
    x = x_next;
    u_prev = u;
    route_time += cfg.sim.dt;
    ++res.steps;

    if (!base_map.contains(x.position)) {
      res.left_map = true;
      break;
    }
    if (base_map.ground_truth(x.position, cfg.search.inflate) == Occupancy::Occupied) {
      res.collision = true;
      break;
    }
    if ((x.position - cfg.goal).norm() <= cfg.sim.success_radius) {
      res.success = true;
      res.completion_time = (step + 1) * cfg.sim.dt;
      break;
    }
  }
  if (!res.success) res.completion_time = res.steps * cfg.sim.dt;
  res.mean_position_error = err_count > 0 ? err_sum / static_cast<double>(err_count) : 0.0;
  res.mean_solver_iters = solve_count > 0 ? iter_sum / static_cast<double>(solve_count) : 0.0;
  res.mean_solver_ms = solve_count > 0 ? solver_ms_sum / static_cast<double>(solve_count) : 0.0;
  return res;
}

}  // namespace kinojump
