#include "polyrecon/occupancy.hpp"

#include "polyrecon/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace polyrecon {

MeshSdfOracle::MeshSdfOracle(PolyMesh reference) : mesh_(std::move(reference)) {
  mesh_.validate();
  const EdgeStats es = edge_stats(mesh_);
  if (mesh_.faces.empty() || es.boundary_edges != 0) {
    throw std::invalid_argument("MeshSdfOracle: reference mesh is not closed (" +
                                std::to_string(es.boundary_edges) + " boundary edges)");
  }
  bvh_ = TriangleBvh(triangulate(mesh_));
}

double MeshSdfOracle::unsigned_distance(const Point3& p) const { return bvh_.nearest(p).distance; }

bool MeshSdfOracle::inside(const Point3& p) const {
  static const std::array<Vec3, 3> dirs = {Vec3(0.5377, 0.8622, 0.3188).normalized(),
                                           Vec3(-0.7321, 0.2236, 0.6436).normalized(),
                                           Vec3(0.1414, -0.6180, -0.7729).normalized()};
  int votes = 0;
  for (const auto& d : dirs) votes += bvh_.count_hits(p, d) % 2;
  return votes >= 2;
}

double MeshSdfOracle::sdf(const Point3& p) const {
  const double d = unsigned_distance(p);
  if (d <= 1e-15) return 0.0;
  return inside(p) ? d : -d;
}

SampledSdfField SampledSdfField::grid(const Point3& origin, double spacing, std::array<std::uint32_t, 3> dims,
                                      std::vector<float> values) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw std::invalid_argument("SampledSdfField: spacing must be > 0");
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) throw std::invalid_argument("SampledSdfField: empty field");
  const std::size_t n = std::size_t{dims[0]} * dims[1] * dims[2];
  if (values.size() != n) throw std::invalid_argument("SampledSdfField: value count does not match dims");
  for (float v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("SampledSdfField: non-finite value");
  }
  SampledSdfField f;
  f.is_grid_ = true;
  f.origin_ = origin;
  f.spacing_ = spacing;
  f.dims_ = dims;
  f.grid_ = std::move(values);
  return f;
}

SampledSdfField SampledSdfField::scattered(std::vector<Point3> points, std::vector<double> values) {
  if (points.empty()) throw std::invalid_argument("SampledSdfField: empty field");
  if (points.size() != values.size()) throw std::invalid_argument("SampledSdfField: size mismatch");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("SampledSdfField: non-finite value");
  }
  SampledSdfField f;
  f.is_grid_ = false;
  f.points_ = std::move(points);
  f.values_ = std::move(values);
  return f;
}

SampledSdfField::Query SampledSdfField::query(const Point3& p) const {
  Query q;
  if (!is_grid_) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double d = (points_[i] - p).squaredNorm();
      if (d < best) {
        best = d;
        q.value = values_[i];
      }
    }
    return q;
  }
  double g[3];
  int i0[3];
  double t[3];
  for (int k = 0; k < 3; ++k) {
    g[k] = (p[k] - origin_[k]) / spacing_;
    const double hi = static_cast<double>(dims_[k] - 1);
    if (g[k] < 0.0 || g[k] > hi) {
      q.clamped = true;
      g[k] = std::clamp(g[k], 0.0, hi);
    }
    i0[k] = std::min(static_cast<int>(std::floor(g[k])), std::max(0, static_cast<int>(dims_[k]) - 2));
    t[k] = dims_[k] > 1 ? g[k] - i0[k] : 0.0;
  }
  auto at = [&](int x, int y, int z) {
    x = std::min(x, static_cast<int>(dims_[0]) - 1);
    y = std::min(y, static_cast<int>(dims_[1]) - 1);
    z = std::min(z, static_cast<int>(dims_[2]) - 1);
    return static_cast<double>(grid_[(std::size_t(z) * dims_[1] + y) * dims_[0] + x]);
  };
  double v = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double w = (dx ? t[0] : 1 - t[0]) * (dy ? t[1] : 1 - t[1]) * (dz ? t[2] : 1 - t[2]);
    if (w != 0.0) v += w * at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
  }
  q.value = v;
  return q;
}

namespace {

template <class T>
void put(std::string& out, const T& v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("sampled SDF: truncated grid file");
  return v;
}

}  // namespace

SampledSdfField SampledSdfField::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (path.extension() == ".csv") {
    std::vector<Point3> pts;
    std::vector<double> vals;
    std::string line;
    while (std::getline(in, line)) {
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      double x, y, z, d;
      if (ls >> x >> y >> z >> d) {
        pts.emplace_back(x, y, z);
        vals.push_back(d);
      }
    }
    return scattered(std::move(pts), std::move(vals));
  }
  Point3 origin;
  for (int k = 0; k < 3; ++k) origin[k] = get<double>(in);
  const double spacing = get<double>(in);
  std::array<std::uint32_t, 3> dims{};
  for (auto& d : dims) d = get<std::uint32_t>(in);
  const std::size_t n = std::size_t{dims[0]} * dims[1] * dims[2];
  std::vector<float> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw IoError("sampled SDF: truncated grid file");
  return grid(origin, spacing, dims, std::move(values));
}

void SampledSdfField::write_grid(const std::filesystem::path& path) const {
  if (!is_grid_) throw std::logic_error("write_grid: field is not a grid");
  std::string out;
  for (int k = 0; k < 3; ++k) put(out, origin_[k]);
  put(out, spacing_);
  for (auto d : dims_) put(out, d);
  out.append(reinterpret_cast<const char*>(grid_.data()), grid_.size() * sizeof(float));
  write_file_atomic(path, out);
}

double occupancy_value(double sdf, double volume, double mean_volume, double gain) {
  const double x = gain * sdf * volume / mean_volume;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

CellOccupancy cell_occupancy(const CellComplex& complex, const SdfProvider& provider, double gain) {
  if (!(gain > 0.0)) throw std::invalid_argument("cell_occupancy: gain must be > 0");
  const auto& cells = complex.cells();
  CellOccupancy out;
  out.gain = gain;
  out.mean_volume = complex.total_volume() / static_cast<double>(cells.size());
  out.sdf.resize(cells.size());
  out.occupancy.resize(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    double d;
    try {
      d = provider.sdf(cells[i].centroid());
    } catch (const std::exception& e) {
      throw OccupancyError("SDF provider failed on cell " + std::to_string(i) + ": " + e.what());
    }
    if (!std::isfinite(d)) throw OccupancyError("SDF provider returned a non-finite value on cell " + std::to_string(i));
    out.sdf[i] = d;
    out.occupancy[i] = occupancy_value(d, cells[i].volume(), out.mean_volume, gain);
  }
  return out;
}

}  // namespace polyrecon
