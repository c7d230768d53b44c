// Command-line entry points: route-search and tracking benchmarks, GP
// training, and trace plotting.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "kinojump/bench.hpp"
#include "kinojump/csv.hpp"
#include "kinojump/scenario.hpp"
#include "kinojump/svg.hpp"

namespace {

using namespace kinojump;

std::vector<std::uint64_t> parse_seeds(const std::string& arg) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto dash = tok.find('-');
    if (dash != std::string::npos && dash > 0) {
      const std::uint64_t a = std::stoull(tok.substr(0, dash));
      const std::uint64_t b = std::stoull(tok.substr(dash + 1));
      for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
    } else if (!tok.empty()) {
      seeds.push_back(std::stoull(tok));
    }
  }
  return seeds;
}

Scenario load_scenario(const std::string& path, const std::string& seeds_arg) {
  Scenario s = Scenario::load(path);
  if (!seeds_arg.empty()) {
    s.seeds = parse_seeds(seeds_arg);
    if (s.seeds.empty()) throw ScenarioError("--seeds: no seeds parsed from '" + seeds_arg + "'");
  }
  return s;
}

int cmd_search_bench(const std::string& scenario_path, const std::string& seeds_arg, int workers,
                     const std::string& out_dir) {
  const Scenario s = load_scenario(scenario_path, seeds_arg);
  const SearchBenchOutput out = search_bench(s, workers);
  write_search_bench_csv(out, out_dir);
  std::cout << "obstacles  planner         n    succ    mean_ms   mean_cost  mean_inserts\n";
  for (const SearchCell& c : out.cells) {
    std::printf("%9d  %-14s %3d  %5.1f%%  %9.3f  %10.3f  %12.1f\n", c.obstacles,
                detail::planner_name(c.planner), c.n_runs, 100.0 * c.success_rate, c.mean_wall_ms,
                c.mean_ctrl_cost, c.mean_open_inserts);
  }
  std::cout << "wrote " << out_dir << "/search_bench_runs.csv and search_bench_summary.csv\n";
  return 0;
}

int cmd_gp_train(const std::string& scenario_path, const std::string& seeds_arg,
                 const std::string& out_dir) {
  const Scenario s = load_scenario(scenario_path, seeds_arg);
  const GpTrainResult r = gp_train(s);
  std::filesystem::create_directories(out_dir);
  write_gp_dataset_csv(r.dataset, out_dir + "/gp_dataset.csv");
  std::ofstream rep(out_dir + "/gp_report.txt");
  rep << "transitions: " << r.n_tuples << "\n"
      << "training_points: " << r.dataset.size() << "\n"
      << "sigma_f: " << r.chosen_hyper.sigma_f << "\n"
      << "sigma_n: " << r.chosen_hyper.sigma_n << "\n"
      << "length_scales: " << r.chosen_hyper.length_scales.transpose() << "\n"
      << "alpha: " << r.chosen_hyper.alpha << "\n"
      << "holdout_rmse: " << r.holdout_rmse << "\n"
      << "residual_std: " << r.residual_std << "\n"
      << "rmse_over_std: " << (r.residual_std > 0 ? r.holdout_rmse / r.residual_std : 0.0) << "\n";
  if (r.residual_std < 1e-3)
    rep << "note: residual signal is near zero (no model mismatch to learn)\n";
  std::cout << "gp-train: " << r.dataset.size() << " points, holdout rmse " << r.holdout_rmse
            << " (residual std " << r.residual_std << ")\n"
            << "wrote " << out_dir << "/gp_dataset.csv and gp_report.txt\n";
  return 0;
}

int cmd_tracking_bench(const std::string& scenario_path, const std::string& seeds_arg, int workers,
                       const std::string& out_dir) {
  const Scenario s = load_scenario(scenario_path, seeds_arg);
  const GpTrainResult gp = gp_train(s);
  const TrackingBenchOutput out =
      tracking_bench(s, std::make_shared<GpModel>(gp.model), workers);
  write_tracking_bench_csv(out, out_dir);
  std::cout << "disturbance        controller     n    succ    time_s    err_m\n";
  for (const TrackingCell& c : out.cells) {
    std::printf("[%4.1f %4.1f %4.1f]  %-12s %3d  %5.1f%%  %8.2f  %7.3f\n", c.disturbance.x(),
                c.disturbance.y(), c.disturbance.z(), detail::controller_name(c.controller),
                c.n_runs, 100.0 * c.success_rate, c.mean_completion_time, c.mean_err);
  }
  std::cout << "wrote " << out_dir << "/tracking_runs.csv and tracking_summary.csv\n";
  return 0;
}

int cmd_plot(const std::string& trace_path, const std::string& out_dir) {
  const auto rows = read_csv(trace_path);
  if (rows.size() < 2) throw std::runtime_error("plot: trace has no data rows: " + trace_path);
  const std::vector<std::string> expected = [] {
    std::vector<std::string> h;
    std::stringstream ss(kTraceCsvHeader);
    std::string c;
    while (std::getline(ss, c, ',')) h.push_back(c);
    return h;
  }();
  if (rows[0] != expected)
    throw std::runtime_error("plot: unexpected trace header in " + trace_path);

  const std::size_t ncol = expected.size();
  std::vector<std::vector<double>> col(ncol);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != ncol)
      throw std::runtime_error("plot: malformed row " + std::to_string(r + 1) + " in " +
                               trace_path);
    for (std::size_t c = 0; c < ncol; ++c) {
      try {
        col[c].push_back(std::stod(rows[r][c]));
      } catch (const std::exception&) {
        throw std::runtime_error("plot: bad number at row " + std::to_string(r + 1) + " column " +
                                 expected[c]);
      }
    }
  }
  auto idx = [&](const std::string& name) {
    for (std::size_t i = 0; i < expected.size(); ++i)
      if (expected[i] == name) return i;
    throw std::logic_error("plot: missing column " + name);
  };

  std::filesystem::create_directories(out_dir);
  const auto& t = col[idx("t")];
  {
    std::vector<double> err(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double dx = col[idx("px")][i] - col[idx("ref_px")][i];
      const double dy = col[idx("py")][i] - col[idx("ref_py")][i];
      const double dz = col[idx("pz")][i] - col[idx("ref_pz")][i];
      err[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    SvgPlot p("Position error", "time (s)", "error (m)");
    p.add_series("|p - p_ref|", t, err);
    p.write(out_dir + "/position_error.svg");
  }
  {
    SvgPlot p("Velocity", "time (s)", "velocity (m/s)");
    p.add_series("vx", t, col[idx("vx")]);
    p.add_series("vy", t, col[idx("vy")]);
    p.add_series("vz", t, col[idx("vz")]);
    p.write(out_dir + "/velocity.svg");
  }
  {
    SvgPlot p("Disturbance", "time (s)", "accel (m/s^2)");
    p.add_series("true_x", t, col[idx("ef_true_x")]);
    p.add_series("true_y", t, col[idx("ef_true_y")]);
    p.add_series("true_z", t, col[idx("ef_true_z")]);
    p.add_series("est_x", t, col[idx("ef_est_x")]);
    p.add_series("est_y", t, col[idx("ef_est_y")]);
    p.add_series("est_z", t, col[idx("ef_est_z")]);
    p.write(out_dir + "/disturbance.svg");
  }
  {
    SvgPlot p("Route overlay (top-down)", "x (m)", "y (m)");
    p.add_series("plant", col[idx("px")], col[idx("py")]);
    p.add_series("committed ref", col[idx("ref_px")], col[idx("ref_py")]);
    p.write(out_dir + "/route_overlay.svg");
  }
  std::cout << "wrote 4 SVG files under " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinodynamic jump-space planning and GP-MPC tracking benchmarks"};
  app.require_subcommand(1);

  std::string scenario_path, seeds_arg, out_dir = "out", trace_path;
  int workers = 2;

  auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    if (needs_scenario)
      cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    cmd->add_option("--seeds", seeds_arg, "seed list, e.g. 0,1,2 or 0-19");
    cmd->add_option("--workers", workers, "parallel episodes");
    cmd->add_option("--out", out_dir, "output directory");
  };

  auto* sb = app.add_subcommand("search-bench", "route searching comparison");
  add_common(sb, true);
  auto* tb = app.add_subcommand("tracking-bench", "trajectory optimization and tracking comparison");
  add_common(tb, true);
  auto* gt = app.add_subcommand("gp-train", "collect residual data and fit the GP");
  add_common(gt, true);
  auto* pl = app.add_subcommand("plot", "emit SVG plots from a trace CSV");
  pl->add_option("--trace", trace_path, "episode trace CSV")->required();
  pl->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sb->parsed()) return cmd_search_bench(scenario_path, seeds_arg, workers, out_dir);
    if (tb->parsed()) return cmd_tracking_bench(scenario_path, seeds_arg, workers, out_dir);
    if (gt->parsed()) return cmd_gp_train(scenario_path, seeds_arg, out_dir);
    if (pl->parsed()) return cmd_plot(trace_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
