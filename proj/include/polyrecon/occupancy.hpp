#pragma once

// Signed-distance providers (positive inside, negative outside) and
// per-cell occupancy.

#include "polyrecon/complex.hpp"
#include "polyrecon/mesh.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace polyrecon {

/// Maps a point to a signed distance: positive inside, negative outside.
/// Implementations must be safe for concurrent const calls.
class SdfProvider {
 public:
  virtual ~SdfProvider() = default;
  virtual double sdf(const Point3& p) const = 0;
};

/// Exact signed distance to a closed reference mesh.
class MeshSdfOracle : public SdfProvider {
 public:
  /// Throws std::invalid_argument when the mesh has boundary edges.
  explicit MeshSdfOracle(PolyMesh reference);

  double sdf(const Point3& p) const override;
  double unsigned_distance(const Point3& p) const;
  /// Ray parity along three fixed skew directions, majority vote.
  bool inside(const Point3& p) const;

  const PolyMesh& mesh() const { return mesh_; }
  const TriangleBvh& bvh() const { return bvh_; }

 private:
  PolyMesh mesh_;
  TriangleBvh bvh_;
};

/// Imported signed-distance samples: a regular grid (trilinear) or a
/// scattered point list (nearest sample).
class SampledSdfField : public SdfProvider {
 public:
  struct Query {
    double value = 0.0;
    bool clamped = false;  // p was outside the grid and was clamped onto it
  };

  /// `values` has dims[0]*dims[1]*dims[2] entries, x fastest.
  static SampledSdfField grid(const Point3& origin, double spacing, std::array<std::uint32_t, 3> dims,
                              std::vector<float> values);
  static SampledSdfField scattered(std::vector<Point3> points, std::vector<double> values);

  /// Binary grid (any extension but .csv) or CSV lines "x,y,z,d".
  static SampledSdfField read(const std::filesystem::path& path);
  void write_grid(const std::filesystem::path& path) const;

  double sdf(const Point3& p) const override { return query(p).value; }
  Query query(const Point3& p) const;

  bool is_grid() const { return is_grid_; }

 private:
  bool is_grid_ = true;
  Point3 origin_ = Point3::Zero();
  double spacing_ = 1.0;
  std::array<std::uint32_t, 3> dims_{};
  std::vector<float> grid_;
  std::vector<Point3> points_;
  std::vector<double> values_;
};

struct CellOccupancy {
  std::vector<double> occupancy;  // o_i in (0, 1)
  std::vector<double> sdf;        // provider value at each centroid
  double gain = 0.0;
  double mean_volume = 0.0;
};

inline constexpr double kDefaultGain = 40.0;

/// sigmoid(gain * d * v / mean_v).
double occupancy_value(double sdf, double volume, double mean_volume, double gain);

struct OccupancyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Queries the provider at every cell centroid. Throws OccupancyError naming
/// the offending cell when the provider fails or returns a non-finite value.
CellOccupancy cell_occupancy(const CellComplex& complex, const SdfProvider& provider, double gain = kDefaultGain);

}  // namespace polyrecon
