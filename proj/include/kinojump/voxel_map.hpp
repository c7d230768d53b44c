#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinojump/types.hpp"

namespace kinojump {

enum class Occupancy { Free, Occupied, Unknown };

/// Dense 3-D occupancy grid with a body-centered sliding window.
///
/// The grid stores ground-truth occupancy for the whole extent; the window
/// models what has been revealed to the vehicle. Queries outside the window
/// (or outside the extent) report Unknown. A squared Euclidean distance
/// transform to the nearest occupied voxel center is computed once so that
/// inflated queries cost a single lookup; distances are evaluated from the
/// center of the voxel containing the query point.
class VoxelMap {
 public:
  VoxelMap() = default;

  VoxelMap(const Vec3& origin, double resolution, const Eigen::Vector3i& dims)
      : origin_(origin), resolution_(resolution), dims_(dims) {
    if (!(resolution > 0.0)) throw std::invalid_argument("VoxelMap: resolution must be positive");
    if ((dims.array() <= 0).any()) throw std::invalid_argument("VoxelMap: dims must be positive");
    const std::size_t n = voxel_count();
    occupancy_ = std::make_shared<std::vector<std::uint8_t>>((n + 7) / 8, 0);
    window_center_ = origin + 0.5 * resolution * dims.cast<double>();
    window_half_extent_ = 0.5 * resolution * dims.cast<double>().maxCoeff() * Vec3::Ones() * 2.0;
  }

  const Vec3& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  const Eigen::Vector3i& dims() const { return dims_; }
  Vec3 extent() const { return resolution_ * dims_.cast<double>(); }
  Vec3 max_corner() const { return origin_ + extent(); }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims_.x()) * dims_.y() * dims_.z();
  }

  const Vec3& window_center() const { return window_center_; }
  const Vec3& window_half_extent() const { return window_half_extent_; }

  bool contains(const Vec3& p) const {
    return (p.array() >= origin_.array()).all() && (p.array() < max_corner().array()).all();
  }

  bool in_window(const Vec3& p) const {
    return contains(p) &&
           ((p - window_center_).cwiseAbs().array() <= window_half_extent_.array()).all();
  }

  Eigen::Vector3i voxel_of(const Vec3& p) const {
    Eigen::Vector3i v;
    for (int i = 0; i < 3; ++i)
      v(i) = static_cast<int>(std::floor((p(i) - origin_(i)) / resolution_));
    return v;
  }

  Vec3 voxel_center(const Eigen::Vector3i& v) const {
    return origin_ + resolution_ * (v.cast<double>() + Vec3::Constant(0.5));
  }

  bool voxel_valid(const Eigen::Vector3i& v) const {
    return (v.array() >= 0).all() && (v.array() < dims_.array()).all();
  }

  std::size_t index_of(const Eigen::Vector3i& v) const {
    return static_cast<std::size_t>(v.x()) +
           static_cast<std::size_t>(dims_.x()) *
               (static_cast<std::size_t>(v.y()) + static_cast<std::size_t>(dims_.y()) * v.z());
  }

  bool voxel_occupied(const Eigen::Vector3i& v) const {
    const std::size_t i = index_of(v);
    return ((*occupancy_)[i >> 3] >> (i & 7)) & 1;
  }

  void set_occupied(const Eigen::Vector3i& v) {
    if (!voxel_valid(v)) throw std::out_of_range("VoxelMap::set_occupied: voxel outside dims");
    const std::size_t i = index_of(v);
    occupancy_mut()[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    distance_sq_.reset();  // stale
  }

  /// Squared distance (in meters^2) from the center of the voxel containing p
  /// to the nearest occupied voxel center; infinity when no voxel is occupied.
  double occupied_distance_sq(const Vec3& p) const {
    if (!distance_sq_) throw std::logic_error("VoxelMap: finalize() not called");
    const Eigen::Vector3i v = voxel_of(p);
    const std::int64_t d2 = (*distance_sq_)[index_of(v)];
    if (d2 >= kFarAway) return std::numeric_limits<double>::infinity();
    return static_cast<double>(d2) * resolution_ * resolution_;
  }

  /// Tri-state collision query with inflation radius. Occupied when any
  /// occupied voxel center lies within `inflate` of p; Unknown outside the
  /// sliding window or the map extent; Free otherwise.
  Occupancy is_free(const Vec3& p, double inflate) const {
    if (inflate < 0.0) throw std::invalid_argument("is_free: inflate must be >= 0");
    if (!in_window(p)) return Occupancy::Unknown;
    return occupied_distance_sq(p) <= inflate * inflate ? Occupancy::Occupied : Occupancy::Free;
  }

  /// Same query against ground truth, ignoring the window (used by the
  /// simulator's collision referee and by map-level tests).
  Occupancy ground_truth(const Vec3& p, double inflate) const {
    if (!contains(p)) return Occupancy::Unknown;
    return occupied_distance_sq(p) <= inflate * inflate ? Occupancy::Occupied : Occupancy::Free;
  }

  /// Recomputes the distance transform. Call after the last set_occupied and
  /// before any query; the map is immutable from then on.
  void finalize() {
    const int nx = dims_.x(), ny = dims_.y(), nz = dims_.z();
    auto dist = std::make_shared<std::vector<std::int64_t>>(voxel_count());
    std::vector<std::int64_t>& d = *dist;
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = ((*occupancy_)[i >> 3] >> (i & 7)) & 1 ? 0 : kFarAway;
    // Felzenszwalb-Huttenlocher separable squared distance transform.
    std::vector<std::int64_t> f(std::max({nx, ny, nz}));
    std::vector<std::int64_t> dd(f.size());
    std::vector<int> v(f.size());
    std::vector<double> z(f.size() + 1);
    auto pass1d = [&](std::int64_t* row, int n, std::int64_t stride) {
      for (int i = 0; i < n; ++i) f[i] = row[static_cast<std::int64_t>(i) * stride];
      int k = 0;
      v[0] = 0;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
          const int p = v[k];
          s = (static_cast<double>(f[q] - f[p]) + static_cast<double>(q) * q -
               static_cast<double>(p) * p) /
              (2.0 * (q - p));
          if (s > z[k]) break;
          --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
      }
      k = 0;
      for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const std::int64_t dq = q - v[k];
        dd[q] = dq * dq + f[v[k]];
      }
      for (int i = 0; i < n; ++i)
        row[static_cast<std::int64_t>(i) * stride] = std::min(dd[i], kFarAway);
    };
    // x sweeps
    for (int zi = 0; zi < nz; ++zi)
      for (int yi = 0; yi < ny; ++yi)
        pass1d(&d[index_of({0, yi, zi})], nx, 1);
    // y sweeps
    for (int zi = 0; zi < nz; ++zi)
      for (int xi = 0; xi < nx; ++xi)
        pass1d(&d[index_of({xi, 0, zi})], ny, nx);
    // z sweeps
    for (int yi = 0; yi < ny; ++yi)
      for (int xi = 0; xi < nx; ++xi)
        pass1d(&d[index_of({xi, yi, 0})], nz, static_cast<std::int64_t>(nx) * ny);
    distance_sq_ = std::move(dist);
  }

  bool finalized() const { return distance_sq_ != nullptr; }

  /// Returns a copy of this map with the window translated. Occupancy and the
  /// distance transform are shared; only query gating changes.
  VoxelMap recenter_window(const Vec3& center) const {
    if (!contains(center))
      throw std::invalid_argument("recenter_window: center outside map extent");
    VoxelMap m = *this;
    m.window_center_ = center;
    return m;
  }

  VoxelMap with_window_half_extent(const Vec3& half) const {
    VoxelMap m = *this;
    m.window_half_extent_ = half;
    return m;
  }

  /// Opens the window to cover the whole extent (fully revealed map).
  VoxelMap with_full_window() const {
    VoxelMap m = *this;
    m.window_center_ = origin_ + 0.5 * extent();
    m.window_half_extent_ = extent();  // generous: covers everything
    return m;
  }

  /// Flat binary layout. Header: origin (3 doubles), resolution (1 double),
  /// dims (3 uint64), all little-endian 64-bit; body: row-major (x fastest)
  /// occupancy bitset packed LSB-first.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("VoxelMap::save: cannot open " + path);
    auto put_u64 = [&](std::uint64_t x) {
      std::uint8_t b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(x >> (8 * i));
      out.write(reinterpret_cast<const char*>(b), 8);
    };
    auto put_f64 = [&](double x) {
      std::uint64_t u;
      std::memcpy(&u, &x, 8);
      put_u64(u);
    };
    for (int i = 0; i < 3; ++i) put_f64(origin_(i));
    put_f64(resolution_);
    for (int i = 0; i < 3; ++i) put_u64(static_cast<std::uint64_t>(dims_(i)));
    out.write(reinterpret_cast<const char*>(occupancy_->data()),
              static_cast<std::streamsize>(occupancy_->size()));
    if (!out) throw std::runtime_error("VoxelMap::save: write failed for " + path);
  }

  static VoxelMap load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("VoxelMap::load: cannot open " + path);
    auto get_u64 = [&]() {
      std::uint8_t b[8];
      in.read(reinterpret_cast<char*>(b), 8);
      std::uint64_t x = 0;
      for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
      return x;
    };
    auto get_f64 = [&]() {
      const std::uint64_t u = get_u64();
      double x;
      std::memcpy(&x, &u, 8);
      return x;
    };
    Vec3 origin;
    for (int i = 0; i < 3; ++i) origin(i) = get_f64();
    const double res = get_f64();
    Eigen::Vector3i dims;
    for (int i = 0; i < 3; ++i) dims(i) = static_cast<int>(get_u64());
    if (!in) throw std::runtime_error("VoxelMap::load: truncated header in " + path);
    VoxelMap m(origin, res, dims);
    in.read(reinterpret_cast<char*>(m.occupancy_mut().data()),
            static_cast<std::streamsize>(m.occupancy_->size()));
    if (!in) throw std::runtime_error("VoxelMap::load: truncated body in " + path);
    m.finalize();
    return m;
  }

  const std::vector<std::uint8_t>& raw_bitset() const { return *occupancy_; }

 private:
  std::vector<std::uint8_t>& occupancy_mut() {
    if (occupancy_.use_count() > 1)
      occupancy_ = std::make_shared<std::vector<std::uint8_t>>(*occupancy_);
    return *occupancy_;
  }

  static constexpr std::int64_t kFarAway = std::int64_t{1} << 60;

  Vec3 origin_ = Vec3::Zero();
  double resolution_ = 0.1;
  Eigen::Vector3i dims_ = Eigen::Vector3i::Ones();
  std::shared_ptr<std::vector<std::uint8_t>> occupancy_;
  std::shared_ptr<const std::vector<std::int64_t>> distance_sq_;
  Vec3 window_center_ = Vec3::Zero();
  Vec3 window_half_extent_ = Vec3::Zero();
};

}  // namespace kinojump
