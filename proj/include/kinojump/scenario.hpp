#pragma once

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinojump/disturbance.hpp"
#include "kinojump/episode.hpp"
#include "kinojump/forest.hpp"
#include "kinojump/gp.hpp"
#include "kinojump/mpc.hpp"
#include "kinojump/search.hpp"
#include "kinojump/types.hpp"

namespace kinojump {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// GP training/tuning knobs beyond the kernel hyperparameters.
struct GpTrainConfig {
  KernelHyper hyper;
  std::size_t max_points = 50;
  bool tune = false;            // small marginal-likelihood grid search
  int episodes = 4;             // excitation episodes
  int excitation_waypoints = 6; // random waypoints per episode
  double holdout_fraction = 0.3;
};

/// Benchmark sweep parameters (Table-style experiment matrices).
struct BenchConfig {
  std::vector<int> obstacle_counts{499, 249, 149};
  std::vector<Vec3> disturbances{Vec3(0, 2, 0), Vec3(-1, 2, 0)};
  std::vector<ControllerKind> tracking_controllers{ControllerKind::GpMpc,
                                                   ControllerKind::NominalMpc};
  PlannerKind tracking_planner = PlannerKind::KinoJss;
  int tracking_obstacles = 149;
};

/// Full experiment description: everything a benchmark command needs,
/// loadable from a strict JSON file.
struct Scenario {
  QuadParams quad;
  ForestSpec forest;
  SearchConfig search;
  OcpConfig ocp;
  GpTrainConfig gp;
  DisturbanceSpec disturbance;
  SimConfig sim;
  PlannerKind planner = PlannerKind::KinoJss;
  ControllerKind controller = ControllerKind::GpMpc;
  std::vector<std::uint64_t> seeds{0,  1,  2,  3,  4,  5,  6,  7,  8,  9,
                                   10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
  BenchConfig bench;

  static Scenario load(const std::string& path);
  static Scenario from_json(const nlohmann::json& j);

  EpisodeConfig episode_config(std::uint64_t seed) const {
    EpisodeConfig e;
    e.params = quad;
    e.search = search;
    e.ocp = ocp;
    e.sim = sim;
    e.disturbance = disturbance;
    e.planner = planner;
    e.controller = controller;
    e.start = forest.start;
    e.goal = forest.goal;
    e.seed = seed;
    return e;
  }
};

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

class JsonCursor {
 public:
  JsonCursor(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {}

  /// Strict-unknown: every key in the object must be consumed by a getter.
  ~JsonCursor() = default;

  void check_no_unknown() const {
    if (!j_.is_object())
      throw ScenarioError(path_ + ": expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key()))
        throw ScenarioError(path_ + ": unknown key '" + it.key() + "'");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  nlohmann::json child(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ScenarioError(path_ + "." + key + ": " + e.what());
    }
  }

  void get(const std::string& key, Vec3& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const auto& a = j_.at(key);
    if (!a.is_array() || a.size() != 3)
      throw ScenarioError(path_ + "." + key + ": expected an array of 3 numbers");
    for (int i = 0; i < 3; ++i) out(i) = a.at(i).get<double>();
  }

  void get(const std::string& key, std::array<double, 2>& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const auto& a = j_.at(key);
    if (!a.is_array() || a.size() != 2)
      throw ScenarioError(path_ + "." + key + ": expected an array of 2 numbers");
    out[0] = a.at(0).get<double>();
    out[1] = a.at(1).get<double>();
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline PlannerKind planner_from_string(const std::string& s, const std::string& where) {
  if (s == "kino_jss") return PlannerKind::KinoJss;
  if (s == "baseline_astar") return PlannerKind::BaselineAstar;
  throw ScenarioError(where + ": planner must be 'kino_jss' or 'baseline_astar', got '" + s + "'");
}

inline ControllerKind controller_from_string(const std::string& s, const std::string& where) {
  if (s == "gp_mpc") return ControllerKind::GpMpc;
  if (s == "nominal_mpc") return ControllerKind::NominalMpc;
  throw ScenarioError(where + ": controller must be 'gp_mpc' or 'nominal_mpc', got '" + s + "'");
}

inline const char* planner_name(PlannerKind k) {
  return k == PlannerKind::KinoJss ? "kino_jss" : "baseline_astar";
}

inline const char* controller_name(ControllerKind k) {
  return k == ControllerKind::GpMpc ? "gp_mpc" : "nominal_mpc";
}

}  // namespace detail

inline Scenario Scenario::from_json(const nlohmann::json& j) {
  Scenario s;
  detail::JsonCursor root(j, "scenario");

  if (root.has("quad")) {
    auto jq = root.child("quad");
    detail::JsonCursor c(jq, "quad");
    c.get("mass", s.quad.mass);
    c.get("inertia", s.quad.inertia);
    c.get("gravity", s.quad.gravity);
    c.get("arm_length", s.quad.arm_length);
    c.get("thrust_to_torque", s.quad.thrust_to_torque);
    c.get("rotor_thrust_max", s.quad.rotor_thrust_max);
    c.get("v_max", s.quad.v_max);
    c.get("a_max", s.quad.a_max);
    c.check_no_unknown();
  }
  if (root.has("forest")) {
    auto jf = root.child("forest");
    detail::JsonCursor c(jf, "forest");
    c.get("extent", s.forest.extent);
    c.get("resolution", s.forest.resolution);
    c.get("n_obstacles", s.forest.n_obstacles);
    c.get("obstacle_radius_range", s.forest.obstacle_radius_range);
    c.get("obstacle_height_range", s.forest.obstacle_height_range);
    c.get("seed", s.forest.seed);
    c.get("start", s.forest.start);
    c.get("goal", s.forest.goal);
    c.get("keepout_radius", s.forest.keepout_radius);
    c.check_no_unknown();
  }
  if (root.has("search")) {
    auto js = root.child("search");
    detail::JsonCursor c(js, "search");
    c.get("primitive_duration", s.search.primitive_duration);
    c.get("lateral_samples", s.search.lateral_samples);
    c.get("forward_fraction", s.search.forward_fraction);
    c.get("spread", s.search.spread);
    c.get("rho", s.search.rho);
    c.get("goal_radius", s.search.goal_radius);
    c.get("inflate", s.search.inflate);
    c.get("around_margin", s.search.around_margin);
    c.get("efcor_sigma", s.search.efcor_sigma);
    c.get("max_jump_depth", s.search.max_jump_depth);
    c.get("max_propagations", s.search.max_propagations);
    c.get("vel_bin", s.search.vel_bin);
    c.get("max_forced_neighbors", s.search.max_forced_neighbors);
    c.check_no_unknown();
  }
  if (root.has("ocp")) {
    auto jo = root.child("ocp");
    detail::JsonCursor c(jo, "ocp");
    c.get("horizon", s.ocp.horizon);
    c.get("dt", s.ocp.dt);
    c.get("q_position", s.ocp.q_position);
    c.get("q_velocity", s.ocp.q_velocity);
    c.get("q_attitude", s.ocp.q_attitude);
    c.get("q_body_rate", s.ocp.q_body_rate);
    c.get("r_input", s.ocp.r_input);
    c.get("terminal_weight_scale", s.ocp.terminal_weight_scale);
    c.get("u_min", s.ocp.u_min);
    c.get("u_max", s.ocp.u_max);
    c.get("sqp_max_iters", s.ocp.sqp_max_iters);
    c.get("kkt_tol", s.ocp.kkt_tol);
    c.get("soft_constraint_weight", s.ocp.soft_constraint_weight);
    c.check_no_unknown();
  }
  if (root.has("gp")) {
    auto jg = root.child("gp");
    detail::JsonCursor c(jg, "gp");
    c.get("sigma_f", s.gp.hyper.sigma_f);
    c.get("sigma_n", s.gp.hyper.sigma_n);
    c.get("length_scales", s.gp.hyper.length_scales);
    c.get("alpha", s.gp.hyper.alpha);
    c.get("max_points", s.gp.max_points);
    c.get("tune", s.gp.tune);
    c.get("episodes", s.gp.episodes);
    c.get("excitation_waypoints", s.gp.excitation_waypoints);
    c.get("holdout_fraction", s.gp.holdout_fraction);
    c.check_no_unknown();
  }
  if (root.has("disturbance")) {
    auto jd = root.child("disturbance");
    detail::JsonCursor c(jd, "disturbance");
    Vec3 nominal = s.disturbance.schedule.front().nominal;
    c.get("nominal", nominal);
    s.disturbance.schedule = {{0.0, nominal}};
    if (c.has("schedule")) {
      auto js = c.child("schedule");
      s.disturbance.schedule.clear();
      for (const auto& seg : js) {
        DisturbanceSpec::Segment seg_out;
        detail::JsonCursor cs(seg, "disturbance.schedule[]");
        cs.get("t_start", seg_out.t_start);
        cs.get("nominal", seg_out.nominal);
        cs.check_no_unknown();
        s.disturbance.schedule.push_back(seg_out);
      }
    }
    c.get("noise_sigma", s.disturbance.noise_sigma);
    c.get("noise_bound", s.disturbance.noise_bound);
    c.check_no_unknown();
  }
  if (root.has("sim")) {
    auto js = root.child("sim");
    detail::JsonCursor c(js, "sim");
    c.get("dt", s.sim.dt);
    c.get("timeout", s.sim.timeout);
    c.get("success_radius", s.sim.success_radius);
    c.get("commit_horizon", s.sim.commit_horizon);
    c.get("replan_fraction", s.sim.replan_fraction);
    c.get("drag_coeff", s.sim.drag_coeff);
    c.get("est_sigma", s.sim.est_sigma);
    c.get("est_tau", s.sim.est_tau);
    c.get("window_half_extent", s.sim.window_half_extent);
    c.check_no_unknown();
  }
  if (root.has("method")) {
    auto jm = root.child("method");
    detail::JsonCursor c(jm, "method");
    std::string planner = detail::planner_name(s.planner);
    std::string controller = detail::controller_name(s.controller);
    c.get("planner", planner);
    c.get("controller", controller);
    c.check_no_unknown();
    s.planner = detail::planner_from_string(planner, "method.planner");
    s.controller = detail::controller_from_string(controller, "method.controller");
  }
  if (root.has("seeds")) {
    auto js = root.child("seeds");
    if (!js.is_array()) throw ScenarioError("seeds: expected an array of integers");
    s.seeds.clear();
    for (const auto& v : js) s.seeds.push_back(v.get<std::uint64_t>());
    if (s.seeds.empty()) throw ScenarioError("seeds: must not be empty");
  }
  if (root.has("bench")) {
    auto jb = root.child("bench");
    detail::JsonCursor c(jb, "bench");
    c.get("obstacle_counts", s.bench.obstacle_counts);
    if (c.has("disturbances")) {
      auto jd = c.child("disturbances");
      s.bench.disturbances.clear();
      for (const auto& v : jd) {
        if (!v.is_array() || v.size() != 3)
          throw ScenarioError("bench.disturbances: expected arrays of 3 numbers");
        s.bench.disturbances.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(),
                                          v.at(2).get<double>());
      }
    }
    if (c.has("tracking_controllers")) {
      auto jt = c.child("tracking_controllers");
      s.bench.tracking_controllers.clear();
      for (const auto& v : jt)
        s.bench.tracking_controllers.push_back(
            detail::controller_from_string(v.get<std::string>(), "bench.tracking_controllers"));
    }
    if (c.has("tracking_planner")) {
      std::string p = detail::planner_name(s.bench.tracking_planner);
      c.get("tracking_planner", p);
      s.bench.tracking_planner = detail::planner_from_string(p, "bench.tracking_planner");
    }
    c.get("tracking_obstacles", s.bench.tracking_obstacles);
    c.check_no_unknown();
  }
  root.check_no_unknown();

  s.quad.validate();
  s.forest.validate();
  s.ocp.validate();
  s.gp.hyper.validate();
  s.disturbance.validate();
  return s;
}

inline Scenario Scenario::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(path + ":" + std::to_string(detail::line_of_offset(text, e.byte)) +
                        ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const ScenarioError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

}  // namespace kinojump
