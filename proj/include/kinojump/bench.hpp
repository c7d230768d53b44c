#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "kinojump/csv.hpp"
#include "kinojump/episode.hpp"
#include "kinojump/forest.hpp"
#include "kinojump/scenario.hpp"
#include "kinojump/search.hpp"

namespace kinojump {

/// Runs fn(0..n-1) on a small worker pool. Tasks write results by index, so
/// output order is independent of scheduling.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Route-search benchmark (obstacle count x seed x planner)

struct SearchRun {
  int obstacles = 0;
  PlannerKind planner = PlannerKind::KinoJss;
  std::uint64_t seed = 0;
  SearchStatus status = SearchStatus::NoRoute;
  double route_cost = 0.0;
  double route_time = 0.0;
  double control_cost = 0.0;
  std::int64_t open_inserts = 0;
  std::int64_t pops = 0;
  std::int64_t propagations = 0;
  bool route_valid = true;
  double wall_ms = 0.0;

  bool success() const { return status == SearchStatus::Success; }
};

struct SearchCell {
  int obstacles = 0;
  PlannerKind planner = PlannerKind::KinoJss;
  int n_runs = 0;
  int n_success = 0;
  double success_rate = 0.0;
  double mean_ctrl_cost = 0.0, std_ctrl_cost = 0.0, max_ctrl_cost = 0.0;
  double mean_open_inserts = 0.0;
  double mean_propagations = 0.0;
  double mean_wall_ms = 0.0, std_wall_ms = 0.0, max_wall_ms = 0.0;
};

struct SearchBenchOutput {
  std::vector<SearchRun> runs;    // ordered: count-major, then seed, then planner
  std::vector<SearchCell> cells;  // ordered: count-major, then planner
};

namespace detail {

struct Stats1 {
  double mean = 0.0, stddev = 0.0, maxv = 0.0;
};

inline Stats1 summarize(const std::vector<double>& xs) {
  Stats1 s;
  if (xs.empty()) return s;
  double sum = 0.0, sum2 = 0.0;
  for (double x : xs) {
    sum += x;
    sum2 += x * x;
    s.maxv = std::max(s.maxv, x);
  }
  s.mean = sum / xs.size();
  s.stddev = std::sqrt(std::max(0.0, sum2 / xs.size() - s.mean * s.mean));
  return s;
}

}  // namespace detail

inline SearchBenchOutput search_bench(const Scenario& scenario, int workers) {
  SearchBenchOutput out;
  const auto& counts = scenario.bench.obstacle_counts;
  const auto& seeds = scenario.seeds;
  const std::array<PlannerKind, 2> planners{PlannerKind::KinoJss, PlannerKind::BaselineAstar};
  const int n_pairs = static_cast<int>(counts.size() * seeds.size());
  out.runs.resize(static_cast<std::size_t>(n_pairs) * 2);

  parallel_for(n_pairs, workers, [&](int i) {
    const int count = counts[i / seeds.size()];
    const std::uint64_t seed = seeds[i % seeds.size()];
    ForestSpec fs = scenario.forest;
    fs.n_obstacles = count;
    fs.seed = seed;
    const VoxelMap map = generate_forest(fs).with_full_window();
    SearchState start;
    start.position = fs.start;
    for (int p = 0; p < 2; ++p) {
      SearchConfig cfg = scenario.search;
      cfg.seed = seed;
      SearchRun run;
      run.obstacles = count;
      run.planner = planners[p];
      run.seed = seed;
      const SearchOutcome o = planners[p] == PlannerKind::KinoJss
                                  ? kino_jss_search(start, fs.goal, map, Disturbance{},
                                                    scenario.quad, cfg)
                                  : baseline_kino_astar(start, fs.goal, map, Disturbance{},
                                                        scenario.quad, cfg);
      run.status = o.status;
      run.wall_ms = o.stats.wall_ms;
      run.open_inserts = o.stats.open_inserts;
      run.pops = o.stats.pops;
      run.propagations = o.stats.propagations;
      if (o.route) {
        run.route_cost = o.route->total_cost;
        run.route_time = o.route->total_time;
        run.control_cost = route_control_cost(*o.route);
        run.route_valid = validate_route(*o.route, map, scenario.quad, cfg).ok();
      }
      out.runs[static_cast<std::size_t>(i) * 2 + p] = run;
    }
  });

  for (int count : counts) {
    for (PlannerKind planner : planners) {
      SearchCell cell;
      cell.obstacles = count;
      cell.planner = planner;
      std::vector<double> costs, times, inserts, props;
      for (const SearchRun& r : out.runs) {
        if (r.obstacles != count || r.planner != planner) continue;
        ++cell.n_runs;
        if (r.success()) {
          ++cell.n_success;
          costs.push_back(r.control_cost);
          times.push_back(r.wall_ms);
          inserts.push_back(static_cast<double>(r.open_inserts));
          props.push_back(static_cast<double>(r.propagations));
        }
      }
      cell.success_rate = cell.n_runs ? static_cast<double>(cell.n_success) / cell.n_runs : 0.0;
      const auto c = detail::summarize(costs);
      const auto t = detail::summarize(times);
      cell.mean_ctrl_cost = c.mean;
      cell.std_ctrl_cost = c.stddev;
      cell.max_ctrl_cost = c.maxv;
      cell.mean_wall_ms = t.mean;
      cell.std_wall_ms = t.stddev;
      cell.max_wall_ms = t.maxv;
      cell.mean_open_inserts = detail::summarize(inserts).mean;
      cell.mean_propagations = detail::summarize(props).mean;
      out.cells.push_back(cell);
    }
  }
  return out;
}

inline const char* kSearchRunsCsvHeader =
    "obstacles,planner,seed,success,status,route_cost,route_time_s,control_cost,"
    "open_inserts,pops,propagations,route_valid,search_wall_ms";
inline const char* kSearchSummaryCsvHeader =
    "obstacles,planner,n_runs,n_success,success_rate,mean_ctrl_cost,std_ctrl_cost,"
    "max_ctrl_cost,mean_open_inserts,mean_propagations,mean_wall_ms,std_wall_ms,max_wall_ms";

inline void write_search_bench_csv(const SearchBenchOutput& out, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    CsvWriter w(dir + "/search_bench_runs.csv");
    w.row({"obstacles", "planner", "seed", "success", "status", "route_cost", "route_time_s",
           "control_cost", "open_inserts", "pops", "propagations", "route_valid",
           "search_wall_ms"});
    for (const SearchRun& r : out.runs) {
      const char* status = r.status == SearchStatus::Success
                               ? "success"
                               : (r.status == SearchStatus::Timeout ? "timeout" : "no_route");
      w.row({csv_num(r.obstacles), detail::planner_name(r.planner),
             std::to_string(r.seed), std::string(r.success() ? "1" : "0"), status,
             csv_num(r.route_cost), csv_num(r.route_time), csv_num(r.control_cost),
             csv_num(r.open_inserts), csv_num(r.pops), csv_num(r.propagations),
             std::string(r.route_valid ? "1" : "0"), csv_num(r.wall_ms)});
    }
  }
  {
    CsvWriter w(dir + "/search_bench_summary.csv");
    w.row({"obstacles", "planner", "n_runs", "n_success", "success_rate", "mean_ctrl_cost",
           "std_ctrl_cost", "max_ctrl_cost", "mean_open_inserts", "mean_propagations",
           "mean_wall_ms", "std_wall_ms", "max_wall_ms"});
    for (const SearchCell& c : out.cells)
      w.row({csv_num(c.obstacles), detail::planner_name(c.planner), csv_num(c.n_runs),
             csv_num(c.n_success), csv_num(c.success_rate), csv_num(c.mean_ctrl_cost),
             csv_num(c.std_ctrl_cost), csv_num(c.max_ctrl_cost), csv_num(c.mean_open_inserts),
             csv_num(c.mean_propagations), csv_num(c.mean_wall_ms), csv_num(c.std_wall_ms),
             csv_num(c.max_wall_ms)});
  }
}

// ---------------------------------------------------------------------------
// GP training (excitation episodes -> residual dataset -> fitted model)

struct GpTrainResult {
  GpDataset dataset;        // downsampled training set
  GpModel model;
  KernelHyper chosen_hyper;
  double holdout_rmse = 0.0;
  double residual_std = 0.0;
  std::size_t n_tuples = 0;
};

/// Collects residual data by flying planner+nominal-MPC episodes between
/// randomized waypoints on an empty map under the scenario's disturbance and
/// the drag-injected plant, then fits the per-axis GPs.
inline GpTrainResult gp_train(const Scenario& scenario) {
  ForestSpec fs = scenario.forest;
  fs.n_obstacles = 0;
  const VoxelMap empty_map = generate_forest(fs).with_full_window();

  std::vector<TrainingTuple> tuples;
  RngStream wp_rng(scenario.seeds.front(), 1001);
  const Vec3 lo = empty_map.origin() + Vec3::Constant(2.0);
  const Vec3 hi = empty_map.max_corner() - Vec3::Constant(2.0);
  for (int ep = 0; ep < scenario.gp.episodes; ++ep) {
    EpisodeConfig ec = scenario.episode_config(scenario.seeds.front() + 7919 * (ep + 1));
    ec.planner = PlannerKind::KinoJss;
    ec.controller = ControllerKind::NominalMpc;
    ec.gp.reset();
    Vec3 start, goal;
    do {
      for (int i = 0; i < 3; ++i) {
        start(i) = wp_rng.uniform(lo(i), hi(i));
        goal(i) = wp_rng.uniform(lo(i), hi(i));
      }
    } while ((goal - start).head<2>().norm() < 8.0);
    ec.start = start;
    ec.goal = goal;
    ec.sim.timeout = std::min(ec.sim.timeout, 25.0);
    run_episode(ec, empty_map, nullptr, &tuples);
  }
  if (tuples.size() < 10)
    throw std::runtime_error("gp_train: excitation produced too few transitions");

  // Deterministic holdout split: every k-th tuple is held out.
  const int k_holdout =
      std::max(2, static_cast<int>(std::llround(1.0 / std::max(0.05, scenario.gp.holdout_fraction))));
  std::vector<TrainingTuple> train, hold;
  for (std::size_t i = 0; i < tuples.size(); ++i)
    (i % k_holdout == 0 ? hold : train).push_back(tuples[i]);

  GpTrainResult out;
  out.n_tuples = tuples.size();
  out.dataset = collect_training(train, scenario.quad, scenario.sim.dt, scenario.gp.max_points);

  out.chosen_hyper = scenario.gp.hyper;
  if (scenario.gp.tune) {
    double best = -std::numeric_limits<double>::infinity();
    for (double sf : {0.5, 1.0, 2.0})
      for (double ls : {0.5, 1.0, 2.0})
        for (double al : {0.5, 1.0, 2.0}) {
          KernelHyper h = scenario.gp.hyper;
          h.sigma_f = sf;
          h.length_scales = Vec3::Constant(ls);
          h.alpha = al;
          try {
            const double ev = GpModel::fit(out.dataset, h).log_evidence();
            if (ev > best) {
              best = ev;
              out.chosen_hyper = h;
            }
          } catch (const IllConditionedKernel&) {
          }
        }
  }
  out.model = GpModel::fit(out.dataset, out.chosen_hyper);

  const GpDataset holdout =
      collect_training(hold, scenario.quad, scenario.sim.dt, std::numeric_limits<std::size_t>::max());
  double se = 0.0, means[3] = {0, 0, 0}, sq = 0.0;
  for (const Vec3& t : holdout.targets)
    for (int i = 0; i < 3; ++i) means[i] += t(i);
  for (int i = 0; i < 3; ++i) means[i] /= std::max<std::size_t>(1, holdout.size());
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    const Vec3 pred = out.model.predict(holdout.inputs[i]).mean;
    se += (pred - holdout.targets[i]).squaredNorm();
    for (int a = 0; a < 3; ++a) {
      const double c = holdout.targets[i](a) - means[a];
      sq += c * c;
    }
  }
  const double n3 = 3.0 * std::max<std::size_t>(1, holdout.size());
  out.holdout_rmse = std::sqrt(se / n3);
  out.residual_std = std::sqrt(sq / n3);
  return out;
}

inline void write_gp_dataset_csv(const GpDataset& ds, const std::string& path) {
  CsvWriter w(path);
  w.row({"feature_vx", "feature_vy", "feature_vz", "target_ax", "target_ay", "target_az"});
  for (std::size_t i = 0; i < ds.size(); ++i)
    w.row({csv_num(ds.inputs[i].x()), csv_num(ds.inputs[i].y()), csv_num(ds.inputs[i].z()),
           csv_num(ds.targets[i].x()), csv_num(ds.targets[i].y()), csv_num(ds.targets[i].z())});
}

// ---------------------------------------------------------------------------
// Tracking benchmark (disturbance x controller x seed)

struct TrackingRun {
  Vec3 disturbance = Vec3::Zero();
  PlannerKind planner = PlannerKind::KinoJss;
  ControllerKind controller = ControllerKind::NominalMpc;
  std::uint64_t seed = 0;
  EpisodeResult episode;
};

struct TrackingCell {
  Vec3 disturbance = Vec3::Zero();
  PlannerKind planner = PlannerKind::KinoJss;
  ControllerKind controller = ControllerKind::NominalMpc;
  int n_runs = 0;
  int n_success = 0;
  double success_rate = 0.0;
  double mean_completion_time = 0.0;  // over successful runs
  double mean_err = 0.0;              // over successful runs
  double mean_solver_iters = 0.0;
  double mean_solver_ms = 0.0;
};

struct TrackingBenchOutput {
  std::vector<TrackingRun> runs;
  std::vector<TrackingCell> cells;
  bool merit_monotone = true;
  int route_violations = 0;
};

inline TrackingBenchOutput tracking_bench(const Scenario& scenario,
                                          std::shared_ptr<const GpModel> gp, int workers) {
  TrackingBenchOutput out;
  const auto& dists = scenario.bench.disturbances;
  const auto& ctrls = scenario.bench.tracking_controllers;
  const auto& seeds = scenario.seeds;
  const int n = static_cast<int>(dists.size() * ctrls.size() * seeds.size());
  out.runs.resize(n);

  parallel_for(n, workers, [&](int i) {
    const int di = i / static_cast<int>(ctrls.size() * seeds.size());
    const int ci = (i / static_cast<int>(seeds.size())) % static_cast<int>(ctrls.size());
    const std::uint64_t seed = seeds[i % seeds.size()];
    ForestSpec fs = scenario.forest;
    fs.n_obstacles = scenario.bench.tracking_obstacles;
    fs.seed = seed;
    const VoxelMap map = generate_forest(fs);
    EpisodeConfig ec = scenario.episode_config(seed);
    ec.planner = scenario.bench.tracking_planner;
    ec.controller = ctrls[ci];
    ec.disturbance.schedule = {{0.0, dists[di]}};
    if (ec.controller == ControllerKind::GpMpc) ec.gp = gp;
    TrackingRun run;
    run.disturbance = dists[di];
    run.planner = ec.planner;
    run.controller = ec.controller;
    run.seed = seed;
    run.episode = run_episode(ec, map);
    out.runs[i] = run;
  });

  for (const Vec3& d : dists) {
    for (ControllerKind c : ctrls) {
      TrackingCell cell;
      cell.disturbance = d;
      cell.planner = scenario.bench.tracking_planner;
      cell.controller = c;
      std::vector<double> times, errs, iters, ms;
      for (const TrackingRun& r : out.runs) {
        if (r.controller != c || (r.disturbance - d).norm() > 1e-12) continue;
        ++cell.n_runs;
        out.merit_monotone = out.merit_monotone && r.episode.solver_merit_monotone;
        out.route_violations += r.episode.route_violations;
        if (r.episode.success) {
          ++cell.n_success;
          times.push_back(r.episode.completion_time);
          errs.push_back(r.episode.mean_position_error);
          iters.push_back(r.episode.mean_solver_iters);
          ms.push_back(r.episode.mean_solver_ms);
        }
      }
      cell.success_rate = cell.n_runs ? static_cast<double>(cell.n_success) / cell.n_runs : 0.0;
      cell.mean_completion_time = detail::summarize(times).mean;
      cell.mean_err = detail::summarize(errs).mean;
      cell.mean_solver_iters = detail::summarize(iters).mean;
      cell.mean_solver_ms = detail::summarize(ms).mean;
      out.cells.push_back(cell);
    }
  }
  return out;
}

inline const char* kTrackingRunsCsvHeader =
    "dist_x,dist_y,dist_z,planner,controller,seed,success,collision,completion_time_s,"
    "mean_err_m,max_err_m,control_cost,replans,search_failures,solver_faults,"
    "route_violations,merit_monotone,mean_solver_iters,mean_solver_ms,mean_search_ms";
inline const char* kTrackingSummaryCsvHeader =
    "dist_x,dist_y,dist_z,planner,controller,n_runs,n_success,success_rate,"
    "mean_completion_time_s,mean_err_m,mean_solver_iters,mean_solver_ms";

inline void write_tracking_bench_csv(const TrackingBenchOutput& out, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    CsvWriter w(dir + "/tracking_runs.csv");
    w.row({"dist_x", "dist_y", "dist_z", "planner", "controller", "seed", "success", "collision",
           "completion_time_s", "mean_err_m", "max_err_m", "control_cost", "replans",
           "search_failures", "solver_faults", "route_violations", "merit_monotone",
           "mean_solver_iters", "mean_solver_ms", "mean_search_ms"});
    for (const TrackingRun& r : out.runs) {
      const EpisodeResult& e = r.episode;
      double search_ms = 0.0;
      for (double m : e.search_time_per_replan_ms) search_ms += m;
      if (!e.search_time_per_replan_ms.empty()) search_ms /= e.search_time_per_replan_ms.size();
      w.row({csv_num(r.disturbance.x()), csv_num(r.disturbance.y()), csv_num(r.disturbance.z()),
             detail::planner_name(r.planner), detail::controller_name(r.controller),
             std::to_string(r.seed), std::string(e.success ? "1" : "0"),
             std::string(e.collision ? "1" : "0"), csv_num(e.completion_time),
             csv_num(e.mean_position_error), csv_num(e.max_position_error),
             csv_num(e.control_cost), csv_num(e.replans), csv_num(e.search_failures),
             csv_num(e.solver_faults), csv_num(e.route_violations),
             std::string(e.solver_merit_monotone ? "1" : "0"), csv_num(e.mean_solver_iters),
             csv_num(e.mean_solver_ms), csv_num(search_ms)});
    }
  }
  {
    CsvWriter w(dir + "/tracking_summary.csv");
    w.row({"dist_x", "dist_y", "dist_z", "planner", "controller", "n_runs", "n_success",
           "success_rate", "mean_completion_time_s", "mean_err_m", "mean_solver_iters",
           "mean_solver_ms"});
    for (const TrackingCell& c : out.cells)
      w.row({csv_num(c.disturbance.x()), csv_num(c.disturbance.y()), csv_num(c.disturbance.z()),
             detail::planner_name(c.planner), detail::controller_name(c.controller),
             csv_num(c.n_runs), csv_num(c.n_success), csv_num(c.success_rate),
             csv_num(c.mean_completion_time), csv_num(c.mean_err), csv_num(c.mean_solver_iters),
             csv_num(c.mean_solver_ms)});
  }
}

}  // namespace kinojump
