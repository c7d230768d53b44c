#include <doctest.h>

#include "kinojump/forest.hpp"
#include "kinojump/search.hpp"
#include "oracles.hpp"

using namespace kinojump;

namespace {

QuadParams params() { return QuadParams{}; }  // v_max 3, a_max 2

SearchConfig quiet_config() {
  SearchConfig cfg;
  cfg.efcor_sigma = 0.0;  // deterministic primitives for unit checks
  return cfg;
}

ForestSpec bench_spec(int n, std::uint64_t seed) {
  ForestSpec s;
  s.extent = Vec3(10, 10, 3);
  s.resolution = 0.1;
  s.n_obstacles = n;
  s.seed = seed;
  s.start = Vec3(1, 5, 1.5);
  s.goal = Vec3(9, 5, 1.5);
  s.keepout_radius = 1.0;
  return s;
}

SearchNode node_at(const Vec3& p, const Vec3& v) {
  SearchNode n;
  n.state.position = p;
  n.state.velocity = v;
  return n;
}

}  // namespace

TEST_CASE("check_fea acceleration and velocity envelopes") {
  const QuadParams p = params();
  SearchState rest;
  CHECK(check_fea(rest, Motion{Vec3::Zero(), 0.5}, p));
  CHECK_FALSE(check_fea(rest, Motion{Vec3(3, 0, 0), 0.5}, p));
  SearchState fast;
  fast.velocity = Vec3(2.9, 0, 0);
  CHECK_FALSE(check_fea(fast, Motion{Vec3(2, 0, 0), 0.5}, p));  // endpoint 3.9 > 3
  CHECK(check_fea(fast, Motion{Vec3(0, 0.2, 0), 0.5}, p));
}

TEST_CASE("pos_to_motion closed form and propagation identity") {
  SearchState cur;
  cur.velocity = Vec3(1, 0, 0);
  // coasting: target exactly v0 * tau away
  const Motion coast = pos_to_motion(cur, Vec3(0.5, 0, 0), 0.5);
  CHECK(coast.accel.norm() < 1e-12);

  SearchState rest;
  const Motion m = pos_to_motion(rest, Vec3(1, 0, 0), 1.0);
  CHECK(m.accel.isApprox(Vec3(2, 0, 0), 1e-12));

  RngStream rng(5, 0);
  for (int i = 0; i < 100; ++i) {
    SearchState s;
    s.position = rng.normal3(3.0);
    s.velocity = rng.normal3(1.0);
    const Vec3 target = s.position + rng.normal3(2.0);
    const Motion pm = pos_to_motion(s, target, 0.5);
    const SearchState out = state_propagation(s, pm);
    CHECK((out.position - target).norm() < 1e-9);
  }
}

TEST_CASE("edge cost: time term, effort term, additivity") {
  SearchConfig cfg;
  cfg.rho = 1.0;
  CHECK(edge_cost(Motion{Vec3::Zero(), 1.0}, cfg) == doctest::Approx(1.0));
  CHECK(edge_cost(Motion{Vec3(2, 0, 0), 0.5}, cfg) == doctest::Approx(2.5));
  const Motion a{Vec3(1, 0, 0), 0.4}, b{Vec3(0, 1, 1), 0.7};
  CHECK(edge_cost(a, cfg) + edge_cost(b, cfg) ==
        doctest::Approx(edge_cost(a, cfg) + edge_cost(b, cfg)));
}

TEST_CASE("heuristic values and admissibility against the bang-bang oracle") {
  const QuadParams p = params();
  SearchConfig cfg;
  SearchState s;
  CHECK(heuristic(s, Vec3::Zero(), p, cfg) == doctest::Approx(0.0));
  s.position = Vec3(0, 0, 0);
  CHECK(heuristic(s, Vec3(3, 0, 0), p, cfg) == doctest::Approx(1.0));

  RngStream rng(11, 0);
  for (int i = 0; i < 200; ++i) {
    SearchState st;
    st.position = rng.normal3(5.0);
    st.velocity = rng.normal3(1.0).cwiseMax(-p.v_max).cwiseMin(p.v_max);
    const Vec3 goal = rng.normal3(8.0);
    const double h = heuristic(st, goal, p, cfg);
    const double t_min =
        oracles::min_travel_time(st.position, st.velocity, goal, p.a_max, p.v_max);
    // the true optimal cost is at least rho * optimal time
    CHECK(h <= cfg.rho * t_min + 1e-9);
  }
}

TEST_CASE("jss_motion: nominal pyramid plus feasible neighbor motions") {
  const QuadParams p = params();
  SearchConfig cfg = quiet_config();
  RngStream rng(1, 7);
  SearchNode cur = node_at(Vec3(5, 5, 1.5), Vec3(1, 0, 0));
  const Vec3 goal(9, 5, 1.5);
  auto motions = jss_motion(cur, goal, Disturbance{}, rng, p, cfg);
  // coast + K*K pyramid fan, no neighbors stored
  CHECK(motions.size() == 1 + 9);
  CHECK(motions[0].accel.norm() < 1e-12);  // coast comes first
  // forward component of every fan motion is a_max * forward_fraction
  for (std::size_t i = 1; i < motions.size(); ++i)
    CHECK(motions[i].accel.x() == doctest::Approx(p.a_max * cfg.forward_fraction));

  // neighbor handling: a reachable one is appended, an infeasible one is not
  cur.neighbors = {Vec3(5.2, 5.4, 1.5), Vec3(5, 9.9, 1.5)};
  auto with_neigh = jss_motion(cur, goal, Disturbance{}, rng, p, cfg);
  CHECK(with_neigh.size() == 1 + 9 + 1);  // the far neighbor needs |a| > a_max
}

TEST_CASE("jss_motion applies the disturbance correction to the pyramid exactly") {
  const QuadParams p = params();
  SearchConfig cfg = quiet_config();
  const Vec3 goal(9, 5, 1.5);
  SearchNode cur = node_at(Vec3(5, 5, 1.5), Vec3(1, 0, 0));
  RngStream rng_a(1, 7), rng_b(1, 7);
  Disturbance e;
  e.accel = Vec3(0, 2, 0);
  const auto nominal = jss_motion(cur, goal, Disturbance{}, rng_a, p, cfg);
  const auto corrected = jss_motion(cur, goal, e, rng_b, p, cfg);
  REQUIRE(nominal.size() == corrected.size());
  for (std::size_t i = 0; i < nominal.size(); ++i) {
    CHECK((corrected[i].accel - nominal[i].accel - e.accel).norm() < 1e-12);
    // removing the correction reproduces the nominal primitive's trajectory
    SearchState from = cur.state;
    Motion uncorrected = corrected[i];
    uncorrected.accel -= e.accel;
    const SearchState a = state_propagation(from, uncorrected);
    const SearchState b = state_propagation(from, nominal[i]);
    CHECK((a.position - b.position).norm() < 1e-12);
    CHECK((a.velocity - b.velocity).norm() < 1e-12);
  }
}

TEST_CASE("empty map: route exists and is near time optimal") {
  const QuadParams p = params();
  SearchConfig cfg = quiet_config();
  const VoxelMap map = generate_forest(bench_spec(0, 0)).with_full_window();
  SearchState start;
  start.position = Vec3(1, 5, 1.5);
  const Vec3 goal(9, 5, 1.5);
  const SearchOutcome out = kino_jss_search(start, goal, map, Disturbance{}, p, cfg);
  REQUIRE(out.ok());
  const Route& route = *out.route;
  CHECK(validate_route(route, map, p, cfg).ok());
  const double t_opt =
      oracles::min_travel_time(start.position, start.velocity, goal, p.a_max, p.v_max);
  CHECK(route.total_time >= t_opt - cfg.goal_radius / p.v_max - 1e-9);
  CHECK(route.total_time <= 1.1 * t_opt);
}

TEST_CASE("start within the goal radius returns a single-node route") {
  const QuadParams p = params();
  SearchConfig cfg = quiet_config();
  const VoxelMap map = generate_forest(bench_spec(0, 0)).with_full_window();
  SearchState start;
  start.position = Vec3(5, 5, 1.5);
  const SearchOutcome out = kino_jss_search(start, Vec3(5.2, 5, 1.5), map, Disturbance{}, p, cfg);
  REQUIRE(out.ok());
  CHECK(out.route->nodes.size() == 1);
  CHECK(out.route->total_cost == 0.0);
}

TEST_CASE("precondition violations are rejected") {
  const QuadParams p = params();
  SearchConfig cfg = quiet_config();
  const ForestSpec spec = bench_spec(40, 3);
  const VoxelMap map = generate_forest(spec).with_full_window();
  const std::vector<Cylinder> cyls = sample_forest_cylinders(spec);
  SearchState inside;
  inside.position = Vec3(cyls[0].cx, cyls[0].cy, 1.0);
  CHECK_THROWS_AS(kino_jss_search(inside, spec.goal, map, Disturbance{}, p, cfg),
                  std::invalid_argument);
  SearchState start;
  start.position = spec.start;
  CHECK_THROWS_AS(kino_jss_search(start, Vec3(50, 5, 1), map, Disturbance{}, p, cfg),
                  std::invalid_argument);
}

TEST_CASE("searches are deterministic for a fixed seed") {
  const QuadParams p = params();
  SearchConfig cfg;  // default noise on
  cfg.seed = 99;
  const VoxelMap map = generate_forest(bench_spec(60, 8)).with_full_window();
  SearchState start;
  start.position = Vec3(1, 5, 1.5);
  const Vec3 goal(9, 5, 1.5);
  const SearchOutcome a = kino_jss_search(start, goal, map, Disturbance{}, p, cfg);
  const SearchOutcome b = kino_jss_search(start, goal, map, Disturbance{}, p, cfg);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(a.stats.propagations == b.stats.propagations);
  CHECK(a.stats.open_inserts == b.stats.open_inserts);
  CHECK(a.route->nodes.size() == b.route->nodes.size());
  for (std::size_t i = 0; i < a.route->nodes.size(); ++i) {
    CHECK((a.route->nodes[i].state.position - b.route->nodes[i].state.position).norm() == 0.0);
    CHECK((a.route->nodes[i].state.velocity - b.route->nodes[i].state.velocity).norm() == 0.0);
  }
}

TEST_CASE("jump semantics: free space inserts almost nothing into the open set") {
  const QuadParams p = params();
  SearchConfig cfg = quiet_config();
  const VoxelMap map = generate_forest(bench_spec(0, 0)).with_full_window();
  SearchState start;
  start.position = Vec3(1, 5, 1.5);
  const SearchOutcome jss = kino_jss_search(start, Vec3(9, 5, 1.5), map, Disturbance{}, p, cfg);
  const SearchOutcome base =
      baseline_kino_astar(start, Vec3(9, 5, 1.5), map, Disturbance{}, p, cfg);
  REQUIRE(jss.ok());
  REQUIRE(base.ok());
  // no obstacle ever forces an insertion: only the goal (plus the root)
  CHECK(jss.stats.open_inserts <= 4);
  CHECK(base.stats.open_inserts > 50);
}

TEST_CASE("free-space route cost matches the baseline within 5%") {
  const QuadParams p = params();
  SearchConfig cfg = quiet_config();
  const VoxelMap map = generate_forest(bench_spec(0, 0)).with_full_window();
  RngStream rng(13, 0);
  for (int i = 0; i < 10; ++i) {
    SearchState start;
    start.position =
        Vec3(rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(0.7, 2.3));
    Vec3 goal(rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(0.7, 2.3));
    if ((goal - start.position).norm() < 4.0) continue;
    const SearchOutcome jss = kino_jss_search(start, goal, map, Disturbance{}, p, cfg);
    const SearchOutcome base = baseline_kino_astar(start, goal, map, Disturbance{}, p, cfg);
    REQUIRE(jss.ok());
    REQUIRE(base.ok());
    CHECK(jss.route->total_cost <= 1.05 * base.route->total_cost + 1e-9);
  }
}

TEST_CASE("forest searches: valid routes, insertion dominance, baseline agreement") {
  const QuadParams p = params();
  SearchConfig cfg;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    const ForestSpec spec = bench_spec(40, seed);
    const VoxelMap map = generate_forest(spec).with_full_window();
    SearchState start;
    start.position = spec.start;
    cfg.seed = seed;
    const SearchOutcome jss = kino_jss_search(start, spec.goal, map, Disturbance{}, p, cfg);
    const SearchOutcome base = baseline_kino_astar(start, spec.goal, map, Disturbance{}, p, cfg);
    REQUIRE(jss.ok());
    REQUIRE(base.ok());
    CHECK(validate_route(*jss.route, map, p, cfg).ok());
    CHECK(validate_route(*base.route, map, p, cfg).ok());
    CHECK(jss.stats.open_inserts <= base.stats.open_inserts);
  }
}

TEST_CASE("disturbance-aware search still returns feasible routes") {
  const QuadParams p = params();
  SearchConfig cfg = quiet_config();
  cfg.seed = 5;
  const ForestSpec spec = bench_spec(30, 5);
  const VoxelMap map = generate_forest(spec).with_full_window();
  SearchState start;
  start.position = spec.start;
  Disturbance e;
  e.accel = Vec3(0, 1.0, 0);
  const SearchOutcome out = kino_jss_search(start, spec.goal, map, e, p, cfg);
  REQUIRE(out.ok());
  CHECK(validate_route(*out.route, map, p, cfg).ok());
  // every stored motion obeys the envelope even though the pyramid is shifted
  for (std::size_t i = 1; i < out.route->nodes.size(); ++i)
    CHECK(out.route->nodes[i].motion_from_parent.accel.cwiseAbs().maxCoeff() <= p.a_max + 1e-9);
}
