#pragma once

// Slow, independent reference implementations used to check the library.

#include "polyrecon/complex.hpp"
#include "polyrecon/mesh.hpp"
#include "polyrecon/mrf.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using polyrecon::Aabb;
using polyrecon::Plane;
using polyrecon::Point3;
using polyrecon::Polygon;
using polyrecon::Vec3;

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

/// Rejection-sampled volume of {p in box : every plane has p on its negative side}.
struct McEstimate {
  double volume = 0.0;
  double sigma = 0.0;
};
inline McEstimate mc_volume(const Aabb& box, const std::vector<std::pair<Plane, bool>>& inside_negative,
                            std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Point3 p = box.min + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(box.extent());
    bool in = true;
    for (const auto& [pl, neg] : inside_negative) {
      const double s = pl.signed_distance(p);
      if (neg ? s > 0.0 : s < 0.0) {
        in = false;
        break;
      }
    }
    hits += in;
  }
  const double f = static_cast<double>(hits) / static_cast<double>(n);
  const double bv = box.volume();
  return {f * bv, bv * std::sqrt(std::max(f * (1.0 - f), 1.0 / static_cast<double>(n)) / static_cast<double>(n))};
}

/// Generalized winding number by summed solid angles (Van Oosterom and Strackee).
inline double winding_number(const polyrecon::PolyMesh& mesh, const Point3& p) {
  double total = 0.0;
  for (const auto& t : polyrecon::triangulate(mesh)) {
    const Vec3 a = t.a - p, b = t.b - p, c = t.c - p;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    total += 2.0 * std::atan2(num, den);
  }
  return total / (4.0 * std::numbers::pi);
}

/// Unsigned distance by scanning every triangle.
inline double brute_distance(const polyrecon::PolyMesh& mesh, const Point3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : polyrecon::triangulate(mesh)) {
    best = std::min(best, (polyrecon::closest_point_on_triangle(p, t) - p).norm());
  }
  return best;
}

/// Energy written directly from the definition: mean |x - o| plus
/// lambda / A times the area of differently labeled pairs.
inline double energy_from_definition(const std::vector<double>& occ, const std::vector<polyrecon::Edge>& edges,
                                     double lambda, double max_area, const std::vector<int>& x) {
  double d = 0.0;
  for (std::size_t i = 0; i < occ.size(); ++i) d += std::abs(x[i] - occ[i]);
  d /= static_cast<double>(occ.size());
  double v = 0.0;
  for (const auto& e : edges) {
    if (x[e.i] != x[e.j]) v += e.area;
  }
  return d + lambda * v / max_area;
}

/// Minimum energy over all 2^n labelings.
inline double brute_force_minimum(const polyrecon::MrfProblem& p) {
  double best = std::numeric_limits<double>::infinity();
  polyrecon::Labeling x(p.n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << p.n); ++mask) {
    for (std::size_t i = 0; i < p.n; ++i) x[i] = (mask >> i) & 1 ? polyrecon::Label::In : polyrecon::Label::Out;
    best = std::min(best, polyrecon::energy(p, x));
  }
  return best;
}

/// Number of full-dimensional regions the planes cut the box into, by
/// testing each sign vector with a small linear program: maximize t subject
/// to s_k (n_k . x - d_k) >= t and x in the box. The optimum is attained at
/// a vertex, found by solving every 4-subset of active constraints.
inline int arrangement_regions(const std::vector<Plane>& planes, const Aabb& box, double tol = 1e-9) {
  const int n = static_cast<int>(planes.size());
  int regions = 0;
  for (int mask = 0; mask < (1 << n); ++mask) {
    // Constraints a . (x, t) <= b.
    std::vector<Eigen::Vector4d> A;
    std::vector<double> b;
    for (int k = 0; k < n; ++k) {
      const double s = (mask >> k) & 1 ? 1.0 : -1.0;
      Eigen::Vector4d row;
      row << -s * planes[k].normal, 1.0;
      A.push_back(row);
      b.push_back(-s * planes[k].offset);
    }
    for (int ax = 0; ax < 3; ++ax) {
      Eigen::Vector4d lo = Eigen::Vector4d::Zero(), hi = Eigen::Vector4d::Zero();
      lo[ax] = -1.0;
      hi[ax] = 1.0;
      A.push_back(lo);
      b.push_back(-box.min[ax]);
      A.push_back(hi);
      b.push_back(box.max[ax]);
    }
    Eigen::Vector4d cap = Eigen::Vector4d::Zero();
    cap[3] = 1.0;
    A.push_back(cap);
    b.push_back(1.0);
    const int m = static_cast<int>(A.size());
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        for (int k = j + 1; k < m; ++k) {
          for (int l = k + 1; l < m; ++l) {
            Eigen::Matrix4d M;
            M.row(0) = A[i];
            M.row(1) = A[j];
            M.row(2) = A[k];
            M.row(3) = A[l];
            Eigen::FullPivLU<Eigen::Matrix4d> lu(M);
            if (!lu.isInvertible()) continue;
            const Eigen::Vector4d y = lu.solve(Eigen::Vector4d(b[i], b[j], b[k], b[l]));
            bool feasible = true;
            for (int r = 0; r < m && feasible; ++r) feasible = A[r].dot(y) <= b[r] + 1e-9;
            if (feasible) best = std::max(best, y[3]);
          }
        }
      }
    }
    if (best > tol) ++regions;
  }
  return regions;
}

/// Area of the intersection of two convex planar polygons on the same plane.
inline double convex_overlap_area(const Polygon& a, const Polygon& b, const Vec3& normal) {
  // Sutherland-Hodgman: clip a by each edge of b (b's interior is to the left around `normal`).
  Polygon out = a;
  const Vec3 nb = polyrecon::polygon_normal(b);
  const double orient = nb.dot(normal) >= 0.0 ? 1.0 : -1.0;
  for (std::size_t e = 0; e < b.size() && !out.empty(); ++e) {
    const Point3& p = b[e];
    const Point3& q = b[(e + 1) % b.size()];
    const Vec3 inward = orient * normal.cross(q - p);
    auto side = [&](const Point3& x) { return inward.dot(x - p); };
    Polygon next;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Point3& u = out[i];
      const Point3& v = out[(i + 1) % out.size()];
      const double su = side(u), sv = side(v);
      if (su >= 0.0) next.push_back(u);
      if ((su >= 0.0) != (sv >= 0.0)) next.push_back(u + (v - u) * (su / (su - sv)));
    }
    out = std::move(next);
  }
  return polyrecon::polygon_area(out);
}

/// Adjacency recomputed from scratch: every pair of cells with coincident,
/// opposite facets of positive overlap. Keyed by (min, max) cell index.
inline std::map<std::pair<int, int>, double> adjacency_from_scratch(const polyrecon::CellComplex& cx,
                                                                     double area_eps) {
  std::map<std::pair<int, int>, double> out;
  const auto& cells = cx.cells();
  const double eps = 1e-7 * cx.scale();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = i + 1; j < cells.size(); ++j) {
      if (!cells[i].bounds().padded(eps).intersects(cells[j].bounds())) continue;
      double area = 0.0;
      for (std::size_t fi = 0; fi < cells[i].faces().size(); ++fi) {
        const Plane& pi = cells[i].faces()[fi].plane;
        for (std::size_t fj = 0; fj < cells[j].faces().size(); ++fj) {
          const Plane& pj = cells[j].faces()[fj].plane;
          if (pi.normal.dot(pj.normal) > -1.0 + 1e-9 || std::abs(pi.offset + pj.offset) > eps) continue;
          area += convex_overlap_area(cells[i].face_polygon(fi), cells[j].face_polygon(fj), pi.normal);
        }
      }
      if (area > area_eps) out[{static_cast<int>(i), static_cast<int>(j)}] = area;
    }
  }
  return out;
}

/// Random general-position planes: every triple meets at a well-conditioned
/// point inside a ball of radius 3 that stays clear of the other planes.
inline std::vector<Plane> general_planes(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> off(-0.5, 0.5);
  for (;;) {
    std::vector<Plane> planes;
    for (int k = 0; k < n; ++k) planes.emplace_back(random_unit(rng), off(rng));
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = i + 1; j < n && ok; ++j) {
        if (planes[i].normal.cross(planes[j].normal).norm() < 0.2) ok = false;
        for (int k = j + 1; k < n && ok; ++k) {
          Eigen::Matrix3d m;
          m.row(0) = planes[i].normal;
          m.row(1) = planes[j].normal;
          m.row(2) = planes[k].normal;
          if (std::abs(m.determinant()) < 0.1) {
            ok = false;
            break;
          }
          const Point3 x = m.inverse() * Vec3(planes[i].offset, planes[j].offset, planes[k].offset);
          ok = x.norm() < 3.0;
          // Keep vertices away from the remaining planes so no region is a sliver.
          for (int l = 0; l < n && ok; ++l) {
            if (l != i && l != j && l != k) ok = std::abs(planes[l].signed_distance(x)) > 0.05;
          }
        }
      }
    }
    if (ok) return planes;
  }
}

}  // namespace oracle
