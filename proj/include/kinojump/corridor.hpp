#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "kinojump/search.hpp"
#include "kinojump/types.hpp"
#include "kinojump/voxel_map.hpp"

namespace kinojump {

/// Convex half-space set {p : normal . p <= offset}.
struct Polyhedron {
  struct Halfspace {
    Vec3 normal;
    double offset;
  };
  std::vector<Halfspace> halfspaces;

  bool contains(const Vec3& p, double margin = 0.0) const {
    for (const Halfspace& h : halfspaces)
      if (h.normal.dot(p) > h.offset - margin) return false;
    return true;
  }
};

/// Ordered corridor: one polyhedron per committed route segment.
struct Corridor {
  std::vector<Polyhedron> polyhedra;
  std::vector<int> segment_index;  // committed segment i -> polyhedra index
};

/// Whole/safe/committed decomposition of a planned route.
struct RouteSplit {
  Route whole;      // full planned route
  Route safe;       // longest prefix through known-free space
  Route committed;  // safe prefix truncated to the commit horizon
};

struct PlannerConfig {
  double commit_horizon = 2.0;         // s
  double inflate = 0.3;                // m, robot radius used for checks
  double max_corridor_halfwidth = 3.0; // m, face growth cap beyond the seed box
};

struct PlannerFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Route route_prefix(const Route& route, std::size_t n_nodes) {
  Route r;
  r.nodes.assign(route.nodes.begin(), route.nodes.begin() + n_nodes);
  if (!r.nodes.empty()) {
    r.total_cost = r.nodes.back().cost;
    for (std::size_t i = 1; i < r.nodes.size(); ++i)
      r.total_time += r.nodes[i].motion_from_parent.duration;
  }
  return r;
}

inline bool segment_known_free(const VoxelMap& map, const SearchState& from, const Motion& m,
                               double inflate) {
  if (map.is_free(from.position, inflate) != Occupancy::Free) return false;
  return sweep_primitive(from, m, 0.5 * map.resolution(), [&](const Vec3& p) {
    return map.is_free(p, inflate) == Occupancy::Free;
  });
}

}  // namespace detail

/// Splits a route into whole / safe / committed prefixes. Safe is the longest
/// prefix whose inflated sweep stays in known-free voxels; committed clips
/// safe to the commit horizon at node granularity.
inline RouteSplit split_route(const Route& route, const VoxelMap& map, const PlannerConfig& cfg) {
  if (route.nodes.empty()) throw std::invalid_argument("split_route: empty route");
  if (map.is_free(route.nodes.front().state.position, cfg.inflate) != Occupancy::Free)
    throw PlannerFault("split_route: route start is not known-free");

  RouteSplit split;
  split.whole = route;

  std::size_t safe_nodes = 1;
  for (std::size_t i = 1; i < route.nodes.size(); ++i) {
    if (!detail::segment_known_free(map, route.nodes[i - 1].state,
                                    route.nodes[i].motion_from_parent, cfg.inflate))
      break;
    safe_nodes = i + 1;
  }
  split.safe = detail::route_prefix(route, safe_nodes);

  std::size_t committed_nodes = 1;
  double t = 0.0;
  for (std::size_t i = 1; i < safe_nodes; ++i) {
    t += route.nodes[i].motion_from_parent.duration;
    if (t > cfg.commit_horizon + 1e-12) break;
    committed_nodes = i + 1;
  }
  split.committed = detail::route_prefix(route, committed_nodes);
  return split;
}

/// Axis-aligned box corridor around each committed segment: the segment's
/// swept bounding box inflated by the robot radius, grown face by face one
/// voxel at a time through known-free space until blocked or capped.
inline Corridor build_corridor(const RouteSplit& split, const VoxelMap& map,
                               const PlannerConfig& cfg) {
  if (split.committed.nodes.empty())
    throw std::invalid_argument("build_corridor: committed route is empty");
  const double res = map.resolution();
  Corridor corridor;

  const std::size_t n_segments = std::max<std::size_t>(1, split.committed.nodes.size() - 1);
  for (std::size_t seg = 0; seg < n_segments; ++seg) {
    // Sample the segment (or the single node for a tip-only route).
    std::vector<Vec3> pts;
    if (split.committed.nodes.size() == 1) {
      pts.push_back(split.committed.nodes[0].state.position);
    } else {
      const SearchState& a = split.committed.nodes[seg].state;
      const Motion& m = split.committed.nodes[seg + 1].motion_from_parent;
      const double len =
          m.duration * a.velocity.norm() + 0.5 * m.duration * m.duration * m.accel.norm();
      const int n = std::max(1, static_cast<int>(std::ceil(len / (0.5 * res))));
      for (int i = 0; i <= n; ++i) {
        const double t = m.duration * i / n;
        pts.push_back(a.position + t * a.velocity + 0.5 * t * t * m.accel);
      }
    }
    Vec3 lo = pts[0], hi = pts[0];
    for (const Vec3& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    lo -= Vec3::Constant(cfg.inflate);
    hi += Vec3::Constant(cfg.inflate);

    // The inflated box of a diagonal segment can reach farther from the curve
    // than the route's Euclidean clearance: clip faces until no occupied
    // voxel center remains inside, keeping the sampled curve strictly inside.
    constexpr double kKeepMargin = 1e-3;
    bool clean = false;
    while (!clean) {
      clean = true;
      Eigen::Vector3i v0 = map.voxel_of(lo);
      Eigen::Vector3i v1 = map.voxel_of(hi - Vec3::Constant(1e-9));
      for (int x = v0.x(); x <= v1.x() && clean; ++x)
        for (int y = v0.y(); y <= v1.y() && clean; ++y)
          for (int z = v0.z(); z <= v1.z() && clean; ++z) {
            const Eigen::Vector3i v(x, y, z);
            if (!map.voxel_valid(v) || !map.voxel_occupied(v)) continue;
            const Vec3 c = map.voxel_center(v);
            if ((c.array() < lo.array()).any() || (c.array() > hi.array()).any()) continue;
            int best_face = -1;
            double best_lost = std::numeric_limits<double>::infinity();
            double best_plane = 0.0;
            for (int axis = 0; axis < 3; ++axis) {
              double plane = c(axis) - 1e-9;  // exclude the center from above
              double limit = lo(axis);
              for (const Vec3& p : pts) limit = std::max(limit, p(axis) + kKeepMargin);
              if (plane >= limit && hi(axis) - plane < best_lost) {
                best_lost = hi(axis) - plane;
                best_face = 2 * axis + 1;
                best_plane = plane;
              }
              plane = c(axis) + 1e-9;  // exclude the center from below
              limit = hi(axis);
              for (const Vec3& p : pts) limit = std::min(limit, p(axis) - kKeepMargin);
              if (plane <= limit && plane - lo(axis) < best_lost) {
                best_lost = plane - lo(axis);
                best_face = 2 * axis;
                best_plane = plane;
              }
            }
            if (best_face < 0)
              throw std::logic_error("build_corridor: cannot separate obstacle from segment");
            if (best_face % 2)
              hi(best_face / 2) = best_plane;
            else
              lo(best_face / 2) = best_plane;
            clean = false;
          }
    }
    const Vec3 seed_lo = lo;
    const Vec3 seed_hi = hi;

    // A slab is growable when every voxel center inside it is known-free.
    auto slab_clear = [&](const Vec3& slo, const Vec3& shi) {
      Eigen::Vector3i v0 = map.voxel_of(slo);
      Eigen::Vector3i v1 = map.voxel_of(shi - Vec3::Constant(1e-9));
      for (int x = v0.x(); x <= v1.x(); ++x)
        for (int y = v0.y(); y <= v1.y(); ++y)
          for (int z = v0.z(); z <= v1.z(); ++z) {
            const Eigen::Vector3i v(x, y, z);
            if (!map.voxel_valid(v)) return false;
            if (map.is_free(map.voxel_center(v), 0.0) != Occupancy::Free) return false;
          }
      return true;
    };

    bool frozen[6] = {false, false, false, false, false, false};
    bool any = true;
    while (any) {
      any = false;
      for (int face = 0; face < 6; ++face) {
        if (frozen[face]) continue;
        const int axis = face / 2;
        const bool positive = face % 2;
        Vec3 nlo = lo, nhi = hi;
        if (positive) {
          if (hi(axis) - seed_hi(axis) + res > cfg.max_corridor_halfwidth + 1e-12) {
            frozen[face] = true;
            continue;
          }
          nlo(axis) = hi(axis);
          nhi(axis) = hi(axis) + res;
        } else {
          if (seed_lo(axis) - lo(axis) + res > cfg.max_corridor_halfwidth + 1e-12) {
            frozen[face] = true;
            continue;
          }
          nhi(axis) = lo(axis);
          nlo(axis) = lo(axis) - res;
        }
        if (!slab_clear(nlo, nhi)) {
          frozen[face] = true;
          continue;
        }
        if (positive)
          hi(axis) += res;
        else
          lo(axis) -= res;
        any = true;
      }
    }

    Polyhedron poly;
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 n = Vec3::Zero();
      n(axis) = 1.0;
      poly.halfspaces.push_back({n, hi(axis)});
      poly.halfspaces.push_back({-n, -lo(axis)});
    }
    for (const Vec3& p : pts)
      if (!poly.contains(p, 1e-6))
        throw std::logic_error("build_corridor: segment escaped its polyhedron");
    corridor.segment_index.push_back(static_cast<int>(corridor.polyhedra.size()));
    corridor.polyhedra.push_back(std::move(poly));
  }
  return corridor;
}

}  // namespace kinojump
