#pragma once

#include "polyrecon/geom.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace polyrecon {

/// Uniform hash grid over a point set for fixed-radius neighbor queries.
class SpatialGrid {
 public:
  SpatialGrid(std::span<const Point3> points, double cell_size)
      : points_(points), cell_(cell_size), inv_(1.0 / cell_size) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(points[i])].push_back(static_cast<int>(i));
  }
  /// Indexes only `subset` of `points`.
  SpatialGrid(std::span<const Point3> points, std::span<const int> subset, double cell_size)
      : points_(points), cell_(cell_size), inv_(1.0 / cell_size) {
    for (int i : subset) cells_[key(points[i])].push_back(i);
  }

  double cell_size() const { return cell_; }

  /// Calls f(index) for every indexed point within `radius` of p.
  template <class F>
  void for_each_within(const Point3& p, double radius, F&& f) const {
    const int r = static_cast<int>(std::ceil(radius * inv_));
    const auto c = coords(p);
    const double r2 = radius * radius;
    for (int dx = -r; dx <= r; ++dx) {
      for (int dy = -r; dy <= r; ++dy) {
        for (int dz = -r; dz <= r; ++dz) {
          auto it = cells_.find(pack(c[0] + dx, c[1] + dy, c[2] + dz));
          if (it == cells_.end()) continue;
          for (int i : it->second) {
            if ((points_[i] - p).squaredNorm() <= r2) f(i);
          }
        }
      }
    }
  }

  /// Indices stored in the cell `(dx,dy,dz)` away from p's cell; nullptr if empty.
  const std::vector<int>* cell_near(const Point3& p, int dx, int dy, int dz) const {
    const auto c = coords(p);
    auto it = cells_.find(pack(c[0] + dx, c[1] + dy, c[2] + dz));
    return it == cells_.end() ? nullptr : &it->second;
  }

 private:
  std::array<std::int64_t, 3> coords(const Point3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() * inv_)),
            static_cast<std::int64_t>(std::floor(p.y() * inv_)),
            static_cast<std::int64_t>(std::floor(p.z() * inv_))};
  }
  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    constexpr std::int64_t kBias = 1 << 20;
    constexpr std::uint64_t kMask = (1ULL << 21) - 1;
    return ((static_cast<std::uint64_t>(x + kBias) & kMask) << 42) |
           ((static_cast<std::uint64_t>(y + kBias) & kMask) << 21) |
           (static_cast<std::uint64_t>(z + kBias) & kMask);
  }
  std::uint64_t key(const Point3& p) const {
    const auto c = coords(p);
    return pack(c[0], c[1], c[2]);
  }

  std::span<const Point3> points_;
  double cell_;
  double inv_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace polyrecon
