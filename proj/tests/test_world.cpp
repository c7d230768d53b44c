#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "kinojump/forest.hpp"
#include "kinojump/voxel_map.hpp"
#include "oracles.hpp"

using namespace kinojump;

namespace {

ForestSpec small_spec(int n, std::uint64_t seed) {
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

}  // namespace

TEST_CASE("empty forest is all free") {
  const VoxelMap map = generate_forest(small_spec(0, 0)).with_full_window();
  RngStream rng(1, 0);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(rng.uniform(0.05, 9.95), rng.uniform(0.05, 9.95), rng.uniform(0.05, 2.95));
    CHECK(map.is_free(p, 0.0) == Occupancy::Free);
  }
}

TEST_CASE("forest generation is deterministic per seed") {
  const ForestSpec spec = small_spec(60, 77);
  const VoxelMap a = generate_forest(spec);
  const VoxelMap b = generate_forest(spec);
  CHECK(a.raw_bitset() == b.raw_bitset());
  ForestSpec other = spec;
  other.seed = 78;
  CHECK(generate_forest(other).raw_bitset() != a.raw_bitset());
}

TEST_CASE("rasterization matches a brute-force point-in-cylinder oracle") {
  const ForestSpec spec = small_spec(25, 5);
  const std::vector<Cylinder> cyls = sample_forest_cylinders(spec);
  std::vector<oracles::CylinderRef> refs;
  for (const Cylinder& c : cyls) refs.push_back({c.cx, c.cy, c.radius, c.height});
  const VoxelMap map = generate_forest(spec);
  std::size_t mismatches = 0;
  for (int x = 0; x < map.dims().x(); ++x)
    for (int y = 0; y < map.dims().y(); ++y)
      for (int z = 0; z < map.dims().z(); ++z) {
        const Eigen::Vector3i v(x, y, z);
        const bool expect = oracles::point_in_any_cylinder(map.voxel_center(v), refs);
        if (expect != map.voxel_occupied(v)) ++mismatches;
      }
  CHECK(mismatches == 0);
}

TEST_CASE("keepout regions stay clear") {
  const ForestSpec spec = small_spec(80, 3);
  const VoxelMap map = generate_forest(spec).with_full_window();
  CHECK(map.is_free(spec.start, 0.3) == Occupancy::Free);
  CHECK(map.is_free(spec.goal, 0.3) == Occupancy::Free);
}

TEST_CASE("impossible placement fails with a generation error") {
  ForestSpec spec = small_spec(10, 0);
  spec.keepout_radius = 20.0;  // keepout discs cover the whole extent
  CHECK_THROWS_AS(generate_forest(spec), GenerationError);
}

TEST_CASE("is_free tri-state semantics") {
  const ForestSpec spec = small_spec(20, 9);
  const std::vector<Cylinder> cyls = sample_forest_cylinders(spec);
  VoxelMap map = generate_forest(spec);
  map = map.with_window_half_extent(Vec3(2, 2, 2)).recenter_window(Vec3(5, 5, 1.5));

  // point inside the first cylinder (ground truth occupied)
  const Vec3 inside(cyls[0].cx, cyls[0].cy, 0.5);
  CHECK(map.ground_truth(inside, 0.0) == Occupancy::Occupied);

  // outside the window -> unknown, outside the map -> unknown
  CHECK(map.is_free(Vec3(0.5, 0.5, 0.5), 0.0) == Occupancy::Unknown);
  CHECK(map.is_free(Vec3(-1, 5, 1), 0.0) == Occupancy::Unknown);
  CHECK(map.is_free(Vec3(11, 5, 1), 0.0) == Occupancy::Unknown);

  // in-window query reports ground truth
  CHECK(map.is_free(Vec3(5, 5, 1.5), 0.0) == map.ground_truth(Vec3(5, 5, 1.5), 0.0));
}

TEST_CASE("is_free is monotone in the inflation radius") {
  const VoxelMap map = generate_forest(small_spec(30, 21)).with_full_window();
  RngStream rng(4, 0);
  for (int i = 0; i < 300; ++i) {
    const Vec3 p(rng.uniform(0.2, 9.8), rng.uniform(0.2, 9.8), rng.uniform(0.2, 2.8));
    bool occupied_before = false;
    for (double r : {0.0, 0.1, 0.2, 0.4, 0.8}) {
      const bool occ = map.is_free(p, r) == Occupancy::Occupied;
      if (occupied_before) CHECK(occ);
      occupied_before = occ;
    }
  }
}

TEST_CASE("window recentering: idempotence and reveal semantics") {
  VoxelMap map = generate_forest(small_spec(15, 2));
  map = map.with_window_half_extent(Vec3(2, 2, 2)).recenter_window(Vec3(2, 5, 1.5));
  const Vec3 probe(2.2, 5.2, 1.4);
  const Occupancy before = map.is_free(probe, 0.0);
  const VoxelMap same = map.recenter_window(Vec3(2, 5, 1.5));
  CHECK(same.is_free(probe, 0.0) == before);

  const VoxelMap far = map.recenter_window(Vec3(8, 5, 1.5));
  CHECK(far.is_free(probe, 0.0) == Occupancy::Unknown);

  CHECK_THROWS_AS(map.recenter_window(Vec3(50, 5, 1.5)), std::invalid_argument);
}

TEST_CASE("window sweep along a path reveals ground truth") {
  const VoxelMap truth = generate_forest(small_spec(40, 13)).with_full_window();
  VoxelMap windowed = truth.with_window_half_extent(Vec3(1.5, 1.5, 1.5));
  for (double x = 1.0; x <= 9.0; x += 0.5) {
    const Vec3 center(x, 5.0, 1.5);
    windowed = windowed.recenter_window(center);
    RngStream rng(static_cast<std::uint64_t>(x * 10), 0);
    for (int i = 0; i < 50; ++i) {
      Vec3 p = center + rng.normal3(0.5);
      p = p.cwiseMax(Vec3(0.05, 0.05, 0.05)).cwiseMin(Vec3(9.95, 9.95, 2.95));
      if (!windowed.in_window(p)) continue;
      CHECK(windowed.is_free(p, 0.0) == truth.is_free(p, 0.0));
    }
  }
}

TEST_CASE("map save/load round-trips the occupancy bit-exactly") {
  const VoxelMap map = generate_forest(small_spec(35, 31));
  const std::string path = std::filesystem::temp_directory_path() / "kinojump_map_test.bin";
  map.save(path);
  const VoxelMap loaded = VoxelMap::load(path);
  CHECK(loaded.raw_bitset() == map.raw_bitset());
  CHECK(loaded.dims() == map.dims());
  CHECK(loaded.resolution() == map.resolution());
  CHECK(loaded.origin() == map.origin());
  std::remove(path.c_str());
}
