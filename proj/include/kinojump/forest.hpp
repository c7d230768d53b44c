#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "kinojump/rng.hpp"
#include "kinojump/types.hpp"
#include "kinojump/voxel_map.hpp"

namespace kinojump {

/// Procedural pillar-forest specification. Obstacles are vertical cylinders
/// standing on the floor; start/goal keepout discs stay obstacle-free.
struct ForestSpec {
  Vec3 extent{40.0, 40.0, 5.0};            // m
  double resolution = 0.1;                  // m per voxel
  int n_obstacles = 499;
  std::array<double, 2> obstacle_radius_range{0.1, 0.3};   // m
  std::array<double, 2> obstacle_height_range{5.0, 5.0};   // m
  std::uint64_t seed = 0;
  Vec3 start{2.0, 20.0, 2.5};
  Vec3 goal{38.0, 20.0, 2.5};
  double keepout_radius = 2.0;              // m around start and goal

  void validate() const {
    if (n_obstacles < 0) throw std::invalid_argument("ForestSpec: n_obstacles must be >= 0");
    if (!(resolution > 0.0)) throw std::invalid_argument("ForestSpec: resolution must be positive");
    if ((extent.array() <= 0.0).any())
      throw std::invalid_argument("ForestSpec: extent must be positive");
    if (obstacle_radius_range[0] > obstacle_radius_range[1] || obstacle_radius_range[0] <= 0.0)
      throw std::invalid_argument("ForestSpec: bad obstacle_radius_range");
    if (obstacle_height_range[0] > obstacle_height_range[1] || obstacle_height_range[0] <= 0.0)
      throw std::invalid_argument("ForestSpec: bad obstacle_height_range");
  }
};

struct Cylinder {
  double cx, cy, radius, height;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Samples the cylinder list for a forest. Deterministic per seed: each
/// accepted or rejected candidate consumes exactly four uniform draws.
inline std::vector<Cylinder> sample_forest_cylinders(const ForestSpec& spec) {
  spec.validate();
  RngStream rng(spec.seed, /*stream_id=*/0);
  std::vector<Cylinder> cyls;
  cyls.reserve(spec.n_obstacles);
  const long max_attempts = 50L * spec.n_obstacles + 1000;
  long attempts = 0;
  while (static_cast<int>(cyls.size()) < spec.n_obstacles) {
    if (++attempts > max_attempts)
      throw GenerationError("generate_forest: could not place obstacles (overcrowded spec)");
    Cylinder c;
    c.cx = rng.uniform(0.0, spec.extent.x());
    c.cy = rng.uniform(0.0, spec.extent.y());
    c.radius = rng.uniform(spec.obstacle_radius_range[0], spec.obstacle_radius_range[1]);
    c.height = rng.uniform(spec.obstacle_height_range[0], spec.obstacle_height_range[1]);
    auto clear_of = [&](const Vec3& p) {
      const double dx = c.cx - p.x(), dy = c.cy - p.y();
      return std::sqrt(dx * dx + dy * dy) >= c.radius + spec.keepout_radius;
    };
    if (!clear_of(spec.start) || !clear_of(spec.goal)) continue;
    cyls.push_back(c);
  }
  return cyls;
}

/// Rasterizes the spec's cylinders into a finalized voxel map with origin at
/// (0,0,0). A voxel is occupied when its center lies inside some cylinder.
inline VoxelMap generate_forest(const ForestSpec& spec) {
  const std::vector<Cylinder> cyls = sample_forest_cylinders(spec);
  Eigen::Vector3i dims;
  for (int i = 0; i < 3; ++i)
    dims(i) = std::max(1, static_cast<int>(std::llround(spec.extent(i) / spec.resolution)));
  VoxelMap map(Vec3::Zero(), spec.resolution, dims);
  const double res = spec.resolution;
  for (const Cylinder& c : cyls) {
    const int x0 = std::max(0, static_cast<int>(std::floor((c.cx - c.radius) / res)));
    const int x1 = std::min(dims.x() - 1, static_cast<int>(std::floor((c.cx + c.radius) / res)));
    const int y0 = std::max(0, static_cast<int>(std::floor((c.cy - c.radius) / res)));
    const int y1 = std::min(dims.y() - 1, static_cast<int>(std::floor((c.cy + c.radius) / res)));
    const int z1 = std::min(dims.z() - 1, static_cast<int>(std::floor(c.height / res)));
    for (int x = x0; x <= x1; ++x) {
      for (int y = y0; y <= y1; ++y) {
        const double dx = (x + 0.5) * res - c.cx;
        const double dy = (y + 0.5) * res - c.cy;
        if (dx * dx + dy * dy > c.radius * c.radius) continue;
        for (int z = 0; z <= z1; ++z) map.set_occupied({x, y, z});
      }
    }
  }
  map.finalize();
  return map;
}

}  // namespace kinojump
