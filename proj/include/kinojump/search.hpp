#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kinojump/rng.hpp"
#include "kinojump/types.hpp"
#include "kinojump/voxel_map.hpp"

namespace kinojump {

/// Double-integrator search state. Attitude is owned by the tracker, not the
/// route search.
struct SearchState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

/// Constant-acceleration primitive of fixed duration. The stored acceleration
/// is the disturbance-corrected value actually used for propagation.
struct Motion {
  Vec3 accel = Vec3::Zero();
  double duration = 0.0;
};

struct SearchNode {
  SearchState state;
  double cost = 0.0;       // accumulated g
  double heuristic = 0.0;  // cost-to-go estimate
  int parent = -1;         // index into Route::nodes after extraction
  Motion motion_from_parent;
  std::vector<Vec3> neighbors;  // forced-neighbor positions
};

struct Route {
  std::vector<SearchNode> nodes;  // start..terminal, parent = previous index
  double total_cost = 0.0;
  double total_time = 0.0;

  bool empty() const { return nodes.empty(); }
  const SearchState& back_state() const { return nodes.back().state; }
};

struct SearchConfig {
  double primitive_duration = 0.5;  // s
  int lateral_samples = 3;          // K: KxK grid across the motion pyramid
  double forward_fraction = 0.9;    // forward accel = a_max * forward_fraction
                                    // (headroom keeps the noisy correction feasible)
  double spread = 0.5;              // lateral/vertical accel up to a_max * spread
  double rho = 1.0;                 // time weight in the edge cost
  double goal_radius = 0.5;         // m
  double inflate = 0.3;             // m, collision inflation
  double around_margin = 0.2;       // m beyond inflate for the occupied-around shell
  double efcor_sigma = 0.1;         // m/s^2, noise added to the disturbance estimate
  double heuristic_weight = 5.0;    // open-set ordering uses g + weight * h
  int max_jump_depth = 8;
  std::int64_t max_propagations = 2'000'000;
  double vel_bin = 0.6;             // m/s, closed-set velocity quantization
  int max_forced_neighbors = 8;
  std::uint64_t seed = 0;           // rng stream for the expansion noise
};

enum class SearchStatus { Success, NoRoute, Timeout };

struct SearchStats {
  std::int64_t propagations = 0;
  std::int64_t open_inserts = 0;
  std::int64_t pops = 0;
  double wall_ms = 0.0;
};

struct SearchOutcome {
  SearchStatus status = SearchStatus::NoRoute;
  std::optional<Route> route;
  SearchStats stats;

  bool ok() const { return status == SearchStatus::Success; }
};

/// Exact propagation of a double-integrator state under a constant
/// acceleration for the motion's duration.
inline SearchState state_propagation(const SearchState& s, const Motion& m) {
  SearchState out;
  out.position = s.position + m.duration * s.velocity + 0.5 * m.duration * m.duration * m.accel;
  out.velocity = s.velocity + m.duration * m.accel;
  return out;
}

/// Visits the primitive's sample points (excluding the start, including the
/// endpoint) at spacing <= step along the arc; stops early when the visitor
/// returns false. Every swept-collision check in the planner and its
/// validators shares these exact sample points.
template <typename Visitor>
inline bool sweep_primitive(const SearchState& from, const Motion& m, double step,
                            Visitor&& visit) {
  const double len =
      m.duration * from.velocity.norm() + 0.5 * m.duration * m.duration * m.accel.norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int i = 1; i <= n; ++i) {
    const double t = m.duration * i / n;
    const Vec3 p = from.position + t * from.velocity + 0.5 * t * t * m.accel;
    if (!visit(p)) return false;
  }
  return true;
}


/// Feasibility: acceleration within the per-axis envelope and the velocity
/// profile within the per-axis speed limit for the whole primitive. The
/// profile is linear in time, so checking both endpoints suffices.
inline bool check_fea(const SearchState& state, const Motion& m, const QuadParams& params) {
  constexpr double kTol = 1e-9;
  if (m.accel.cwiseAbs().maxCoeff() > params.a_max + kTol) return false;
  const Vec3 v_end = state.velocity + m.duration * m.accel;
  if (state.velocity.cwiseAbs().maxCoeff() > params.v_max + kTol) return false;
  if (v_end.cwiseAbs().maxCoeff() > params.v_max + kTol) return false;
  return true;
}

/// Fixed-duration boundary solve: the constant acceleration that moves `cur`
/// to `neighbor_pos` in `duration` seconds.
inline Motion pos_to_motion(const SearchState& cur, const Vec3& neighbor_pos, double duration) {
  Motion m;
  m.duration = duration;
  m.accel = 2.0 * (neighbor_pos - cur.position - cur.velocity * duration) / (duration * duration);
  return m;
}

/// Edge cost: control effort plus time penalty.
inline double edge_cost(const Motion& m, const SearchConfig& cfg) {
  return m.accel.squaredNorm() * m.duration + cfg.rho * m.duration;
}

/// Admissible cost-to-go: time lower bound from the per-axis speed limit.
inline double heuristic(const SearchState& state, const Vec3& goal, const QuadParams& params,
                        const SearchConfig& cfg) {
  return cfg.rho * (goal - state.position).cwiseAbs().maxCoeff() / params.v_max;
}

/// Route control cost: accumulated squared acceleration times duration
/// (without the time penalty term).
inline double route_control_cost(const Route& route) {
  double c = 0.0;
  for (std::size_t i = 1; i < route.nodes.size(); ++i) {
    const Motion& m = route.nodes[i].motion_from_parent;
    c += m.accel.squaredNorm() * m.duration;
  }
  return c;
}

namespace detail {

struct GridKey {
  std::int32_t c[6];
  bool operator==(const GridKey& o) const {
    for (int i = 0; i < 6; ++i)
      if (c[i] != o.c[i]) return false;
    return true;
  }
};

struct GridKeyHash {
  std::size_t operator()(const GridKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int i = 0; i < 6; ++i) {
      h ^= static_cast<std::uint32_t>(k.c[i]);
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

inline GridKey quantize(const SearchState& s, double pos_bin, double vel_bin) {
  GridKey k;
  for (int i = 0; i < 3; ++i) {
    k.c[i] = static_cast<std::int32_t>(std::floor(s.position(i) / pos_bin));
    k.c[3 + i] = static_cast<std::int32_t>(std::floor(s.velocity(i) / vel_bin));
  }
  return k;
}

// Right-handed orthonormal frame whose first axis is the motion direction:
// current velocity when moving, start-goal direction at rest.
inline void motion_frame(const SearchState& s, const Vec3& goal, Vec3& fwd, Vec3& lat, Vec3& up) {
  Vec3 dir = s.velocity;
  if (dir.norm() < 1e-6) dir = goal - s.position;
  if (dir.norm() < 1e-9) dir = Vec3::UnitX();
  fwd = dir.normalized();
  lat = fwd.cross(Vec3::UnitZ());
  if (lat.norm() < 1e-6) lat = fwd.cross(Vec3::UnitX());
  lat.normalize();
  up = fwd.cross(lat);
}

struct NodeRec {
  SearchState state;
  double g = 0.0;
  double h = 0.0;
  int parent = -1;
  Motion motion;
  std::vector<Vec3> neighbors;
  GridKey key{};
  bool closed = false;
  bool neighbors_computed = false;
};

struct HeapEntry {
  double f;
  std::uint64_t seq;  // tie-break: insertion order, keeps pops deterministic
  int node;
  bool operator<(const HeapEntry& o) const {
    if (f != o.f) return f > o.f;
    return seq > o.seq;
  }
};

class SearchContext {
 public:
  SearchContext(const VoxelMap& map, const Vec3& goal, const Disturbance& e_f,
                const QuadParams& params, const SearchConfig& cfg)
      : map_(map), goal_(goal), e_f_(e_f), params_(params), cfg_(cfg),
        rng_(cfg.seed, /*stream_id=*/7) {
    sample_step_ = 0.5 * map.resolution();
    around_radius_ = cfg.inflate + cfg.around_margin;
  }

  const VoxelMap& map_;
  Vec3 goal_;
  Disturbance e_f_;
  const QuadParams& params_;
  const SearchConfig& cfg_;
  RngStream rng_;
  double sample_step_;
  double around_radius_;

  std::vector<NodeRec> arena;
  std::priority_queue<HeapEntry> open;
  std::unordered_map<GridKey, int, GridKeyHash> open_table;
  // best g seen per pruning-grid cell, across popped and jump-traversed states
  std::unordered_map<GridKey, double, GridKeyHash> best_g;
  SearchStats stats;
  std::uint64_t seq = 0;
  bool timed_out = false;

  bool dominated(const GridKey& key, double g) const {
    const auto it = best_g.find(key);
    return it != best_g.end() && it->second <= g + 1e-12;
  }

  void record_g(const GridKey& key, double g) {
    auto [it, inserted] = best_g.try_emplace(key, g);
    if (!inserted && g < it->second) it->second = g;
  }

  bool near_goal(const SearchState& s) const {
    return (goal_ - s.position).norm() <= cfg_.goal_radius;
  }

  GridKey key_of(const SearchState& s) const {
    return quantize(s, map_.resolution(), cfg_.vel_bin);
  }

  bool budget_exceeded() const { return stats.propagations >= cfg_.max_propagations; }

  // Swept collision check over the shared primitive samples. Occupied voxels
  // block; unknown space is traversable (the safe-route split downstream
  // confines execution to known-free space).
  bool segment_clear(const SearchState& from, const Motion& m) const {
    const double r2 = cfg_.inflate * cfg_.inflate;
    return sweep_primitive(from, m, sample_step_, [&](const Vec3& p) {
      return map_.contains(p) && map_.occupied_distance_sq(p) > r2;
    });
  }

  bool occupied_around(const Vec3& p) const {
    return map_.occupied_distance_sq(p) <= around_radius_ * around_radius_;
  }

  int new_node(const SearchState& s, double g, int parent, const Motion& m) {
    NodeRec n;
    n.state = s;
    n.g = g;
    n.h = heuristic(s, goal_, params_, cfg_);
    n.parent = parent;
    n.motion = m;
    n.key = key_of(s);
    arena.push_back(std::move(n));
    return static_cast<int>(arena.size()) - 1;
  }

  double order_key(const NodeRec& n) const { return n.g + cfg_.heuristic_weight * n.h; }

  void push_open(int idx) {
    open.push(HeapEntry{order_key(arena[idx]), seq++, idx});
    ++stats.open_inserts;
    open_table[arena[idx].key] = idx;
  }

  // True when an insert-or-update with this key and cost would land (no
  // equal-or-cheaper open or closed node on the same cell).
  bool would_accept(const GridKey& key, double g) const {
    const auto it = open_table.find(key);
    if (it == open_table.end()) return true;
    const NodeRec& existing = arena[it->second];
    return !existing.closed && existing.g > g;
  }

  // Algorithm: insert-or-update against the open table. Returns the node
  // index actually representing the state, or -1 when skipped because an
  // equal-or-cheaper node already exists.
  int insert_or_update(const SearchState& s, double g, int parent, const Motion& m,
                       std::vector<Vec3> neighbors) {
    const GridKey key = key_of(s);
    auto it = open_table.find(key);
    if (it != open_table.end()) {
      NodeRec& existing = arena[it->second];
      if (!existing.closed) {
        if (existing.g <= g) return -1;
        existing.state = s;
        existing.g = g;
        existing.h = heuristic(s, goal_, params_, cfg_);
        existing.parent = parent;
        existing.motion = m;
        existing.neighbors = std::move(neighbors);
        open.push(HeapEntry{order_key(existing), seq++, it->second});
        return it->second;
      }
      return -1;
    }
    const int idx = new_node(s, g, parent, m);
    arena[idx].neighbors = std::move(neighbors);
    push_open(idx);
    return idx;
  }

  Route extract_route(int terminal) const {
    std::vector<int> chain;
    for (int i = terminal; i >= 0; i = arena[i].parent) chain.push_back(i);
    std::reverse(chain.begin(), chain.end());
    Route r;
    r.nodes.reserve(chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const NodeRec& n = arena[chain[i]];
      SearchNode out;
      out.state = n.state;
      out.cost = n.g;
      out.heuristic = n.h;
      out.parent = static_cast<int>(i) - 1;
      out.motion_from_parent = n.motion;
      out.neighbors = n.neighbors;
      r.nodes.push_back(std::move(out));
      if (i > 0) r.total_time += n.motion.duration;
    }
    r.total_cost = arena[terminal].g;
    return r;
  }
};

}  // namespace detail

namespace detail {

// Shell offsets around a voxel, sorted by distance; cached per reach radius.
inline const std::vector<Eigen::Vector3i>& shell_offsets(int reach) {
  thread_local std::unordered_map<int, std::vector<Eigen::Vector3i>> cache;
  auto it = cache.find(reach);
  if (it != cache.end()) return it->second;
  std::vector<Eigen::Vector3i> offs;
  for (int dz = -reach; dz <= reach; ++dz)
    for (int dy = -reach; dy <= reach; ++dy)
      for (int dx = -reach; dx <= reach; ++dx) offs.emplace_back(dx, dy, dz);
  std::sort(offs.begin(), offs.end(), [](const Eigen::Vector3i& a, const Eigen::Vector3i& b) {
    const int la = a.squaredNorm(), lb = b.squaredNorm();
    if (la != lb) return la < lb;
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.z() < b.z();
  });
  return cache.emplace(reach, std::move(offs)).first->second;
}

}  // namespace detail

/// Forced-neighbor rule: for occupied voxels in the shell just beyond the
/// inflation radius, emit free voxel centers diagonally adjacent to them that
/// the straight motion pyramid cannot reach. Deterministic and capped.
inline std::vector<Vec3> jss_neighbor(const SearchState& s, const Vec3& goal, const VoxelMap& map,
                                      const QuadParams& params, const SearchConfig& cfg) {
  Vec3 fwd, lat, up;
  detail::motion_frame(s, goal, fwd, lat, up);
  const double cone_cos = std::cos(std::atan2(cfg.spread * params.a_max,
                                              std::max(1e-9, cfg.forward_fraction * params.a_max)));
  const double res = map.resolution();
  const double shell = cfg.inflate + cfg.around_margin;
  const int reach = static_cast<int>(std::ceil(shell / res)) + 1;
  const Eigen::Vector3i center = map.voxel_of(s.position);

  std::vector<std::pair<double, Vec3>> found;
  int occupied_seen = 0;
  for (const Eigen::Vector3i& off : detail::shell_offsets(reach)) {
    const Eigen::Vector3i occ = center + off;
    if (!map.voxel_valid(occ) || !map.voxel_occupied(occ)) continue;
    if ((map.voxel_center(occ) - s.position).norm() > shell + res) continue;
    if (++occupied_seen > 16) break;  // nearest-first scan; farther ones add nothing new
    for (int nz = -1; nz <= 1; ++nz) {
      for (int ny = -1; ny <= 1; ++ny) {
        for (int nx = -1; nx <= 1; ++nx) {
          if (std::abs(nx) + std::abs(ny) + std::abs(nz) < 2) continue;  // diagonal only
          const Eigen::Vector3i cand = occ + Eigen::Vector3i(nx, ny, nz);
          if (!map.voxel_valid(cand)) continue;
          const Vec3 c = map.voxel_center(cand);
          if (map.is_free(c, cfg.inflate) != Occupancy::Free) continue;
          const Vec3 rel = c - s.position;
          const double dist = rel.norm();
          if (dist < 0.5 * res) continue;
          // skip candidates the straight pyramid covers anyway
          if (rel.dot(fwd) / dist >= cone_cos) continue;
          found.emplace_back(dist, c);
        }
      }
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return std::lexicographical_compare(b.second.data(), b.second.data() + 3,
                                        a.second.data(), a.second.data() + 3);
  });
  std::vector<Vec3> out;
  for (const auto& [d, c] : found) {
    bool dup = false;
    for (const Vec3& e : out) dup = dup || (e - c).norm() < 0.5 * res;
    if (dup) continue;
    out.push_back(c);
    if (static_cast<int>(out.size()) >= cfg.max_forced_neighbors) break;
  }
  return out;
}

/// Candidate motions for one expansion: the disturbance-corrected motion set
/// plus feasible motions toward stored forced neighbors. The motion set is
/// the velocity-aligned pyramid fan, its braking mirror, and the coasting
/// layer between them (forward accel in {-af, 0, +af} across a KxK
/// lateral/vertical grid); the brake and coast layers give the search stop
/// and turn authority at cruise speed. The correction E_fcor = e_f + noise is
/// added to every primitive, so stored accelerations are the
/// disturbance-shifted values; forced-neighbor motions are left uncorrected.
inline std::vector<Motion> jss_motion(const SearchNode& cur, const Vec3& goal,
                                      const Disturbance& e_f, RngStream& rng,
                                      const QuadParams& params, const SearchConfig& cfg) {
  const Vec3 efcor = e_f.accel + rng.normal3(cfg.efcor_sigma);
  Vec3 fwd, lat, up;
  detail::motion_frame(cur.state, goal, fwd, lat, up);
  const double af = params.a_max * cfg.forward_fraction;
  const double s = params.a_max * cfg.spread;
  const int k = std::max(1, cfg.lateral_samples);
  std::vector<Motion> motions;
  motions.reserve(3u * k * k + cur.neighbors.size());
  for (double gf : {0.0, af, -af}) {
    for (int iy = 0; iy < k; ++iy) {
      for (int iz = 0; iz < k; ++iz) {
        const double gy = k == 1 ? 0.0 : -s + 2.0 * s * iy / (k - 1);
        const double gz = k == 1 ? 0.0 : -s + 2.0 * s * iz / (k - 1);
        Motion m;
        m.duration = cfg.primitive_duration;
        m.accel = gf * fwd + gy * lat + gz * up + efcor;
        motions.push_back(m);
      }
    }
  }
  for (const Vec3& n : cur.neighbors) {
    if ((n - cur.state.position).norm() < 1e-9) continue;
    const Motion m = pos_to_motion(cur.state, n, cfg.primitive_duration);
    if (check_fea(cur.state, m, params)) motions.push_back(m);
  }
  return motions;
}

namespace detail {

// One expansion step shared by both searches: propagate, filter, classify.
struct Expansion {
  SearchState state;
  Motion motion;
  double g;
  bool forced;       // occupied neighborhood, goal, or depth cap
  bool at_goal;
};

inline bool expand_motions(SearchContext& ctx, int cur_idx, bool jump_depth_capped,
                           std::vector<Expansion>& out) {
  const NodeRec snapshot = ctx.arena[cur_idx];  // arena may reallocate
  SearchNode view;
  view.state = snapshot.state;
  view.neighbors = snapshot.neighbors;
  const std::vector<Motion> motions =
      jss_motion(view, ctx.goal_, ctx.e_f_, ctx.rng_, ctx.params_, ctx.cfg_);
  out.clear();
  for (const Motion& m : motions) {
    if (ctx.budget_exceeded()) {
      ctx.timed_out = true;
      return false;
    }
    ++ctx.stats.propagations;
    const SearchState s_pro = state_propagation(snapshot.state, m);
    if (!check_fea(snapshot.state, m, ctx.params_)) continue;
    if (!ctx.segment_clear(snapshot.state, m)) continue;
    const double g = snapshot.g + edge_cost(m, ctx.cfg_);
    if (ctx.dominated(ctx.key_of(s_pro), g)) continue;
    Expansion e;
    e.state = s_pro;
    e.motion = m;
    e.g = g;
    e.at_goal = ctx.near_goal(s_pro);
    e.forced = e.at_goal || jump_depth_capped || ctx.occupied_around(s_pro.position);
    out.push_back(e);
  }
  return true;
}

// One jump dive: starting from the popped node, keep applying the same
// motion class (pyramid grid coordinates re-oriented with the velocity
// frame, or a fixed acceleration for neighbor motions) through free space
// without open-set insertions. The dive inserts exactly one node where the
// free flow ends: an occupied neighborhood, the goal, the depth cap, or the
// dynamic envelope / an obstacle ahead (forced stop at the last valid
// state). Returns false when the budget is exhausted.
struct DiveClass {
  bool rotating = false;       // pyramid class in the velocity frame
  double gf = 0, gy = 0, gz = 0;
  Vec3 fixed_accel = Vec3::Zero();  // neighbor motions continue straight
};

inline bool jss_dive(SearchContext& ctx, int start_idx, const Motion& first,
                     const DiveClass& cls, const Vec3& efcor) {
  SearchState state = ctx.arena[start_idx].state;
  double g = ctx.arena[start_idx].g;
  int parent = start_idx;
  Motion m = first;
  for (int depth = 1; depth <= ctx.cfg_.max_jump_depth; ++depth) {
    if (ctx.budget_exceeded()) {
      ctx.timed_out = true;
      return false;
    }
    ++ctx.stats.propagations;
    const bool feasible = check_fea(state, m, ctx.params_) && ctx.segment_clear(state, m);
    if (!feasible) {
      // forced stop where free flow ends (not at the dive's first step:
      // the popped node is already closed)
      if (depth > 1 && ctx.would_accept(ctx.key_of(state), g))
        ctx.insert_or_update(state, g, ctx.arena[parent].parent, ctx.arena[parent].motion, {});
      return true;
    }
    const SearchState s_pro = state_propagation(state, m);
    const double g_pro = g + edge_cost(m, ctx.cfg_);
    if (ctx.dominated(ctx.key_of(s_pro), g_pro)) return true;  // region already covered
    const bool at_goal = ctx.near_goal(s_pro);
    if (at_goal || depth == ctx.cfg_.max_jump_depth) {
      if (ctx.would_accept(ctx.key_of(s_pro), g_pro))
        ctx.insert_or_update(s_pro, g_pro, parent, m, {});
      return true;
    }
    ctx.record_g(ctx.key_of(s_pro), g_pro);
    parent = ctx.new_node(s_pro, g_pro, parent, m);
    state = s_pro;
    g = g_pro;
    // continue with the same class
    if (cls.rotating) {
      Vec3 fwd, lat, up;
      motion_frame(state, ctx.goal_, fwd, lat, up);
      m.accel = cls.gf * fwd + cls.gy * lat + cls.gz * up + efcor;
    } else {
      m.accel = cls.fixed_accel;
    }
  }
  return true;
}

inline bool jss_recursion(SearchContext& ctx, int cur_idx) {
  if (!ctx.arena[cur_idx].neighbors_computed) {
    ctx.arena[cur_idx].neighbors_computed = true;
    if (ctx.occupied_around(ctx.arena[cur_idx].state.position))
      ctx.arena[cur_idx].neighbors =
          jss_neighbor(ctx.arena[cur_idx].state, ctx.goal_, ctx.map_, ctx.params_, ctx.cfg_);
  }
  const NodeRec snapshot = ctx.arena[cur_idx];
  const Vec3 efcor = ctx.e_f_.accel + ctx.rng_.normal3(ctx.cfg_.efcor_sigma);
  Vec3 fwd, lat, up;
  motion_frame(snapshot.state, ctx.goal_, fwd, lat, up);
  const double af = ctx.params_.a_max * ctx.cfg_.forward_fraction;
  const double s = ctx.params_.a_max * ctx.cfg_.spread;
  const int k = std::max(1, ctx.cfg_.lateral_samples);
  for (double gf : {0.0, af, -af}) {
    for (int iy = 0; iy < k; ++iy) {
      for (int iz = 0; iz < k; ++iz) {
        DiveClass cls;
        cls.rotating = true;
        cls.gf = gf;
        cls.gy = k == 1 ? 0.0 : -s + 2.0 * s * iy / (k - 1);
        cls.gz = k == 1 ? 0.0 : -s + 2.0 * s * iz / (k - 1);
        Motion first;
        first.duration = ctx.cfg_.primitive_duration;
        first.accel = cls.gf * fwd + cls.gy * lat + cls.gz * up + efcor;
        if (!jss_dive(ctx, cur_idx, first, cls, efcor)) return false;
      }
    }
  }
  for (const Vec3& n : snapshot.neighbors) {
    if ((n - snapshot.state.position).norm() < 1e-9) continue;
    const Motion m = pos_to_motion(snapshot.state, n, ctx.cfg_.primitive_duration);
    if (!check_fea(snapshot.state, m, ctx.params_)) continue;
    DiveClass cls;
    cls.fixed_accel = m.accel;
    if (!jss_dive(ctx, cur_idx, m, cls, efcor)) return false;
  }
  return true;
}

inline SearchOutcome run_search(const SearchState& start, const Vec3& goal, const VoxelMap& map,
                                const Disturbance& e_f, const QuadParams& params,
                                const SearchConfig& cfg, bool use_jump) {
  if (!map.finalized()) throw std::logic_error("search: map not finalized");
  if (!map.contains(goal)) throw std::invalid_argument("search: goal outside map extent");
  if (map.is_free(start.position, cfg.inflate) != Occupancy::Free)
    throw std::invalid_argument("search: start is not in free space");
  if (start.velocity.cwiseAbs().maxCoeff() > params.v_max + 1e-9)
    throw std::invalid_argument("search: start velocity exceeds v_max");

  const auto t0 = std::chrono::steady_clock::now();
  SearchContext ctx(map, goal, e_f, params, cfg);
  {
    const int root = ctx.new_node(start, 0.0, -1, Motion{});
    ctx.push_open(root);  // forced neighbors attach lazily at expansion
  }

  SearchOutcome out;
  while (!ctx.open.empty() && !ctx.timed_out) {
    const HeapEntry top = ctx.open.top();
    ctx.open.pop();
    NodeRec& cur = ctx.arena[top.node];
    if (cur.closed || top.f != ctx.order_key(cur)) continue;  // stale heap entry
    cur.closed = true;
    ctx.record_g(cur.key, cur.g);
    ++ctx.stats.pops;
    if (ctx.near_goal(cur.state)) {
      out.status = SearchStatus::Success;
      out.route = ctx.extract_route(top.node);
      break;
    }
    if (ctx.budget_exceeded()) {
      ctx.timed_out = true;
      break;
    }
    if (use_jump) {
      jss_recursion(ctx, top.node);
    } else {
      std::vector<Expansion> exps;
      if (!expand_motions(ctx, top.node, false, exps)) break;
      for (const Expansion& e : exps)
        ctx.insert_or_update(e.state, e.g, top.node, e.motion, {});
    }
  }
  ctx.stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  out.stats = ctx.stats;
  if (out.status != SearchStatus::Success)
    out.status = ctx.timed_out ? SearchStatus::Timeout : SearchStatus::NoRoute;
  return out;
}

}  // namespace detail

/// Kino-JSS: kinodynamic jump space search. Free-space states are traversed
/// recursively without open-set insertion; only states near obstacles, at the
/// goal, or at the jump depth cap enter the open set.
inline SearchOutcome kino_jss_search(const SearchState& start, const Vec3& goal,
                                     const VoxelMap& map, const Disturbance& e_f,
                                     const QuadParams& params, const SearchConfig& cfg) {
  return detail::run_search(start, goal, map, e_f, params, cfg, /*use_jump=*/true);
}

/// Kinodynamic hybrid-A* baseline: identical primitives, cost, heuristic and
/// pruning grid, but every propagated state is inserted into the open set.
inline SearchOutcome baseline_kino_astar(const SearchState& start, const Vec3& goal,
                                         const VoxelMap& map, const Disturbance& e_f,
                                         const QuadParams& params, const SearchConfig& cfg) {
  return detail::run_search(start, goal, map, e_f, params, cfg, /*use_jump=*/false);
}

/// Route validity: every segment propagates exactly onto the next node, passes
/// the feasibility check, and samples collision-free at the configured
/// inflation (unknown space counts as traversable).
struct RouteCheck {
  bool propagation_ok = true;
  bool feasibility_ok = true;
  bool collision_ok = true;
  bool ok() const { return propagation_ok && feasibility_ok && collision_ok; }
};

inline RouteCheck validate_route(const Route& route, const VoxelMap& map, const QuadParams& params,
                                 const SearchConfig& cfg) {
  RouteCheck rc;
  const double step = 0.5 * map.resolution();
  for (std::size_t i = 1; i < route.nodes.size(); ++i) {
    const SearchState& a = route.nodes[i - 1].state;
    const SearchState& b = route.nodes[i].state;
    const Motion& m = route.nodes[i].motion_from_parent;
    const SearchState prop = state_propagation(a, m);
    if ((prop.position - b.position).norm() > 1e-9 ||
        (prop.velocity - b.velocity).norm() > 1e-9)
      rc.propagation_ok = false;
    if (!check_fea(a, m, params)) rc.feasibility_ok = false;
    const bool clear = sweep_primitive(a, m, step, [&](const Vec3& p) {
      return map.contains(p) && map.ground_truth(p, cfg.inflate) != Occupancy::Occupied;
    });
    if (!clear) rc.collision_ok = false;
  }
  return rc;
}

}  // namespace kinojump
