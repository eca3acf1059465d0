#include "polyrecon/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace polyrecon {

Polygon PolyMesh::face_polygon(std::size_t f) const {
  Polygon poly;
  poly.reserve(faces[f].size());
  for (int i : faces[f]) poly.push_back(vertices[i]);
  return poly;
}

void PolyMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& f : faces) {
    if (f.size() < 3) throw std::invalid_argument("PolyMesh: face with fewer than 3 vertices");
    for (int i : f) {
      if (i < 0 || i >= n) throw std::invalid_argument("PolyMesh: vertex index out of range");
    }
  }
}

double surface_area(const PolyMesh& mesh) {
  double a = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) a += polygon_area(mesh.face_polygon(f));
  return a;
}

double signed_volume(const PolyMesh& mesh) {
  // Relative to the bounding-box center to keep the fan terms small.
  const Point3 o = mesh.bounds().center();
  double v = 0.0;
  for (const auto& f : mesh.faces) {
    if (f.size() < 3) continue;
    const Vec3 a = mesh.vertices[f[0]] - o;
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
      v += a.dot((mesh.vertices[f[i]] - o).cross(mesh.vertices[f[i + 1]] - o));
    }
  }
  return v / 6.0;
}

std::vector<std::array<int, 3>> triangulate_polygon(const Polygon& ring) {
  std::vector<std::array<int, 3>> out;
  const int n = static_cast<int>(ring.size());
  if (n < 3) return out;
  if (n == 3) return {{0, 1, 2}};
  const Vec3 normal = polygon_normal(ring);
  int drop = 0;
  normal.cwiseAbs().maxCoeff(&drop);
  const int ax = (drop + 1) % 3, ay = (drop + 2) % 3;
  const double sign = normal[drop] >= 0.0 ? 1.0 : -1.0;
  auto cross2 = [&](int a, int b, int c) {
    const Vec3 &pa = ring[a], &pb = ring[b], &pc = ring[c];
    return sign * ((pb[ax] - pa[ax]) * (pc[ay] - pa[ay]) - (pb[ay] - pa[ay]) * (pc[ax] - pa[ax]));
  };
  auto inside = [&](int p, int a, int b, int c) {
    return cross2(a, b, p) >= 0.0 && cross2(b, c, p) >= 0.0 && cross2(c, a, p) >= 0.0;
  };
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  int guard = 0;
  std::size_t k = 0;
  while (idx.size() > 3 && guard < 4 * n * n) {
    ++guard;
    const std::size_t m = idx.size();
    const int a = idx[(k + m - 1) % m], b = idx[k % m], c = idx[(k + 1) % m];
    const double turn = cross2(a, b, c);
    bool ear = turn > 0.0;
    for (std::size_t q = 0; ear && q < m; ++q) {
      const int p = idx[q];
      if (p == a || p == b || p == c) continue;
      if (inside(p, a, b, c)) ear = false;
    }
    if (ear || turn == 0.0) {
      // Collinear vertices are clipped without emitting a triangle.
      if (ear) out.push_back({a, b, c});
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k % m));
      k = k % idx.size();
      continue;
    }
    k = (k + 1) % m;
  }
  if (idx.size() == 3 && cross2(idx[0], idx[1], idx[2]) != 0.0) out.push_back({idx[0], idx[1], idx[2]});
  if (idx.size() > 3) {
    // Not simple in projection; fall back to a fan over what is left.
    for (std::size_t q = 1; q + 1 < idx.size(); ++q) out.push_back({idx[0], idx[q], idx[q + 1]});
  }
  return out;
}

std::vector<Triangle> triangulate(const PolyMesh& mesh, std::vector<int>* face_of) {
  std::vector<Triangle> tris;
  if (face_of) face_of->clear();
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Polygon ring = mesh.face_polygon(f);
    for (const auto& t : triangulate_polygon(ring)) {
      Triangle tri{ring[t[0]], ring[t[1]], ring[t[2]]};
      if (tri.normal().squaredNorm() <= 0.0) continue;
      tris.push_back(tri);
      if (face_of) face_of->push_back(static_cast<int>(f));
    }
  }
  return tris;
}

EdgeStats edge_stats(const PolyMesh& mesh) {
  std::map<std::array<double, 3>, int> weld;
  std::vector<int> id(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    id[i] = weld.emplace(std::array<double, 3>{v.x(), v.y(), v.z()}, static_cast<int>(weld.size())).first->second;
  }
  std::map<std::pair<int, int>, std::pair<int, int>> count;  // (lo,hi) -> (#lo->hi, #hi->lo)
  for (const auto& f : mesh.faces) {
    for (std::size_t k = 0; k < f.size(); ++k) {
      const int a = id[f[k]], b = id[f[(k + 1) % f.size()]];
      if (a == b) continue;
      auto& c = count[std::minmax(a, b)];
      (a < b ? c.first : c.second) += 1;
    }
  }
  EdgeStats s;
  s.edges = count.size();
  for (const auto& [e, c] : count) {
    if (c.first != c.second) ++s.boundary_edges;
    if (c.first + c.second > 2) ++s.nonmanifold_edges;
  }
  return s;
}

Point3 closest_point_on_triangle(const Point3& p, const Triangle& t) {
  // Region tests after Ericson, Real-Time Collision Detection 5.1.5.
  const Vec3 ab = t.b - t.a, ac = t.c - t.a, ap = p - t.a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return t.a;
  const Vec3 bp = p - t.b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return t.b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return t.a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - t.c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return t.c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return t.a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return t.b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (t.c - t.b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return t.a + ab * (vb * denom) + ac * (vc * denom);
}

std::optional<double> intersect_ray_triangle(const Point3& origin, const Vec3& dir, const Triangle& tri,
                                             double tmin) {
  const Vec3 e1 = tri.b - tri.a, e2 = tri.c - tri.a;
  const Vec3 pv = dir.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-300) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tv = origin - tri.a;
  const double u = tv.dot(pv) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qv = tv.cross(e1);
  const double v = dir.dot(qv) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(qv) * inv;
  if (t <= tmin) return std::nullopt;
  return t;
}

namespace {

double box_distance2(const Aabb& b, const Point3& p) {
  const Vec3 d = (b.min - p).cwiseMax(p - b.max).cwiseMax(Vec3::Zero());
  return d.squaredNorm();
}

bool ray_box(const Aabb& b, const Point3& o, const Vec3& inv_dir, double tmin, double tmax) {
  for (int k = 0; k < 3; ++k) {
    double t0 = (b.min[k] - o[k]) * inv_dir[k];
    double t1 = (b.max[k] - o[k]) * inv_dir[k];
    if (t0 > t1) std::swap(t0, t1);
    // NaN from 0*inf means the ray lies in the slab plane; keep the interval.
    if (!std::isnan(t0)) tmin = std::max(tmin, t0);
    if (!std::isnan(t1)) tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  return true;
}

}  // namespace

TriangleBvh::TriangleBvh(std::vector<Triangle> tris) : tris_(std::move(tris)) {
  if (tris_.empty()) return;
  order_.resize(tris_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::vector<Point3> centers;
  centers.reserve(tris_.size());
  for (const auto& t : tris_) centers.push_back((t.a + t.b + t.c) / 3.0);
  nodes_.reserve(2 * tris_.size());
  build(0, static_cast<int>(tris_.size()), centers);
}

int TriangleBvh::build(int begin, int end, std::vector<Point3>& centers) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box = Aabb::empty();
  Aabb cbox = Aabb::empty();
  for (int i = begin; i < end; ++i) {
    const Triangle& t = tris_[order_[i]];
    box.expand(t.a);
    box.expand(t.b);
    box.expand(t.c);
    cbox.expand(centers[order_[i]]);
  }
  nodes_[id].box = box;
  if (end - begin <= 4) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  cbox.extent().maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     return centers[a][axis] < centers[b][axis] ||
                            (centers[a][axis] == centers[b][axis] && a < b);
                   });
  const int l = build(begin, mid, centers);
  const int r = build(mid, end, centers);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

TriangleBvh::Nearest TriangleBvh::nearest(const Point3& p) const {
  Nearest best;
  best.distance = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return best;
  double best2 = std::numeric_limits<double>::infinity();
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (box_distance2(n.box, p) >= best2) continue;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const Point3 q = closest_point_on_triangle(p, tris_[order_[i]]);
        const double d2 = (q - p).squaredNorm();
        if (d2 < best2) {
          best2 = d2;
          best.point = q;
          best.triangle = order_[i];
        }
      }
      continue;
    }
    const double dl = box_distance2(nodes_[n.left].box, p);
    const double dr = box_distance2(nodes_[n.right].box, p);
    // Visit the nearer child first.
    if (dl < dr) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    } else {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  best.distance = std::sqrt(best2);
  return best;
}

std::optional<RayHit> TriangleBvh::first_hit(const Point3& origin, const Vec3& dir, double tmin) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv = dir.cwiseInverse();
  RayHit best;
  best.t = std::numeric_limits<double>::infinity();
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (!ray_box(n.box, origin, inv, tmin, best.t)) continue;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        if (auto t = intersect_ray_triangle(origin, dir, tris_[order_[i]], tmin);
            t && (*t < best.t || (*t == best.t && order_[i] < best.triangle))) {
          best.t = *t;
          best.triangle = order_[i];
        }
      }
      continue;
    }
    stack.push_back(n.right);
    stack.push_back(n.left);
  }
  if (best.triangle < 0) return std::nullopt;
  return best;
}

int TriangleBvh::count_hits(const Point3& origin, const Vec3& dir, double tmin) const {
  if (nodes_.empty()) return 0;
  const Vec3 inv = dir.cwiseInverse();
  const double inf = std::numeric_limits<double>::infinity();
  int hits = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (!ray_box(n.box, origin, inv, tmin, inf)) continue;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        if (intersect_ray_triangle(origin, dir, tris_[order_[i]], tmin)) ++hits;
      }
      continue;
    }
    stack.push_back(n.right);
    stack.push_back(n.left);
  }
  return hits;
}

}  // namespace polyrecon
