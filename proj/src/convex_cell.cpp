#include "polyrecon/convex_cell.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace polyrecon {

CellMeasures cell_measures(const std::vector<Point3>& vertices, const std::vector<CellFace>& faces) {
  if (vertices.size() < 4 || faces.size() < 4) {
    throw std::invalid_argument("cell_measures: degenerate or unbounded cell");
  }
  Point3 c0 = Point3::Zero();
  for (const auto& v : vertices) c0 += v;
  c0 /= static_cast<double>(vertices.size());

  double vol = 0.0;
  Point3 acc = Point3::Zero();
  for (const auto& f : faces) {
    if (f.ring.size() < 3) throw std::invalid_argument("cell_measures: face with < 3 vertices");
    const Vec3 a = vertices[f.ring[0]] - c0;
    for (std::size_t i = 1; i + 1 < f.ring.size(); ++i) {
      const Vec3 b = vertices[f.ring[i]] - c0;
      const Vec3 c = vertices[f.ring[i + 1]] - c0;
      const double v = a.dot(b.cross(c)) / 6.0;
      vol += v;
      acc += v * (a + b + c) / 4.0;
    }
  }
  if (!(vol > 0.0) || !std::isfinite(vol)) {
    throw std::invalid_argument("cell_measures: non-positive volume");
  }
  return {vol, c0 + acc / vol};
}

ConvexCell::ConvexCell(std::vector<Point3> vertices, std::vector<CellFace> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const CellMeasures m = cell_measures(vertices_, faces_);
  volume_ = m.volume;
  centroid_ = m.centroid;
  bounds_ = Aabb::of_points(vertices_);
}

ConvexCell ConvexCell::box(const Aabb& b) {
  if ((b.extent().array() <= 0.0).any()) {
    throw std::invalid_argument("ConvexCell::box: box must have positive extent");
  }
  std::vector<Point3> v;
  for (int k = 0; k < 8; ++k) {
    v.emplace_back((k & 1) ? b.max.x() : b.min.x(), (k & 2) ? b.max.y() : b.min.y(),
                   (k & 4) ? b.max.z() : b.min.z());
  }
  const auto walls = b.walls();
  // Rings counter-clockwise seen from outside, in wall order -x,+x,-y,+y,-z,+z.
  const std::array<std::array<int, 4>, 6> rings{{{0, 4, 6, 2},
                                                 {1, 3, 7, 5},
                                                 {0, 1, 5, 4},
                                                 {2, 6, 7, 3},
                                                 {0, 2, 3, 1},
                                                 {4, 5, 7, 6}}};
  std::vector<CellFace> faces;
  for (int k = 0; k < 6; ++k) {
    faces.push_back({{rings[k].begin(), rings[k].end()}, walls[k], wall_source(k)});
  }
  return ConvexCell(std::move(v), std::move(faces));
}

Polygon ConvexCell::face_polygon(std::size_t f) const {
  Polygon poly;
  poly.reserve(faces_[f].ring.size());
  for (int i : faces_[f].ring) poly.push_back(vertices_[i]);
  return poly;
}

std::vector<HalfSpace> ConvexCell::halfspaces() const {
  std::vector<HalfSpace> hs;
  hs.reserve(faces_.size());
  for (const auto& f : faces_) {
    const Plane c = f.plane.canonical();
    const bool same = c.normal.dot(f.plane.normal) > 0.0;
    hs.push_back({c, same ? Side::Negative : Side::Positive});
  }
  return hs;
}

bool ConvexCell::contains(const Point3& p, double eps) const {
  return std::all_of(faces_.begin(), faces_.end(),
                     [&](const CellFace& f) { return f.plane.signed_distance(p) <= eps; });
}

namespace {

struct ChildBuilder {
  std::vector<Point3> vertices;
  std::vector<CellFace> faces;
};

double ring_area(const std::vector<Point3>& verts, const std::vector<int>& ring) {
  Polygon poly;
  poly.reserve(ring.size());
  for (int i : ring) poly.push_back(verts[i]);
  return polygon_area(poly);
}

// Drops vertices not referenced by any face and remaps rings.
void compact(ChildBuilder& c) {
  std::vector<int> remap(c.vertices.size(), -1);
  std::vector<Point3> kept;
  for (auto& f : c.faces) {
    for (int& i : f.ring) {
      if (remap[i] < 0) {
        remap[i] = static_cast<int>(kept.size());
        kept.push_back(c.vertices[i]);
      }
      i = remap[i];
    }
  }
  c.vertices = std::move(kept);
}

}  // namespace

SplitResult clip_cell(const ConvexCell& cell, const Plane& plane, const ClipOptions& opts) {
  const auto& verts = cell.vertices();
  const std::size_t nv = verts.size();
  std::vector<double> s(nv);
  std::vector<Side> cls(nv);
  bool any_pos = false, any_neg = false;
  for (std::size_t i = 0; i < nv; ++i) {
    s[i] = plane.signed_distance(verts[i]);
    cls[i] = s[i] > opts.on_plane_eps    ? Side::Positive
             : s[i] < -opts.on_plane_eps ? Side::Negative
                                         : Side::On;
    any_pos |= cls[i] == Side::Positive;
    any_neg |= cls[i] == Side::Negative;
  }
  SplitResult res;
  if (!any_pos) {
    res.kind = SplitResult::Kind::AllNegative;
    return res;
  }
  if (!any_neg) {
    res.kind = SplitResult::Kind::AllPositive;
    return res;
  }

  ChildBuilder pos, neg;
  std::vector<int> pos_of(nv, -1), neg_of(nv, -1);
  std::vector<int> cap_pos, cap_neg;  // parallel index lists of on-plane points
  for (std::size_t i = 0; i < nv; ++i) {
    if (cls[i] != Side::Negative) {
      pos_of[i] = static_cast<int>(pos.vertices.size());
      pos.vertices.push_back(verts[i]);
    }
    if (cls[i] != Side::Positive) {
      neg_of[i] = static_cast<int>(neg.vertices.size());
      neg.vertices.push_back(verts[i]);
    }
    if (cls[i] == Side::On) {
      cap_pos.push_back(pos_of[i]);
      cap_neg.push_back(neg_of[i]);
    }
  }
  std::map<std::pair<int, int>, std::pair<int, int>> crossings;
  auto crossing = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = crossings.find(key);
    if (it != crossings.end()) return it->second;
    const int lo = key.first, hi = key.second;
    const double t = s[lo] / (s[lo] - s[hi]);
    const Point3 x = verts[lo] + t * (verts[hi] - verts[lo]);
    const std::pair<int, int> ids{static_cast<int>(pos.vertices.size()),
                                  static_cast<int>(neg.vertices.size())};
    pos.vertices.push_back(x);
    neg.vertices.push_back(x);
    cap_pos.push_back(ids.first);
    cap_neg.push_back(ids.second);
    crossings.emplace(key, ids);
    return ids;
  };

  const double area_eps = opts.on_plane_eps * opts.on_plane_eps;
  for (const auto& f : cell.faces()) {
    CellFace fp{{}, f.plane, f.source}, fn{{}, f.plane, f.source};
    const std::size_t m = f.ring.size();
    for (std::size_t k = 0; k < m; ++k) {
      const int a = f.ring[k];
      const int b = f.ring[(k + 1) % m];
      if (cls[a] != Side::Negative) fp.ring.push_back(pos_of[a]);
      if (cls[a] != Side::Positive) fn.ring.push_back(neg_of[a]);
      const bool crosses = (cls[a] == Side::Positive && cls[b] == Side::Negative) ||
                           (cls[a] == Side::Negative && cls[b] == Side::Positive);
      if (crosses) {
        const auto [xp, xn] = crossing(a, b);
        fp.ring.push_back(xp);
        fn.ring.push_back(xn);
      }
    }
    if (fp.ring.size() >= 3 && ring_area(pos.vertices, fp.ring) > area_eps) pos.faces.push_back(std::move(fp));
    if (fn.ring.size() >= 3 && ring_area(neg.vertices, fn.ring) > area_eps) neg.faces.push_back(std::move(fn));
  }

  // Order the cap counter-clockwise about the plane normal.
  const auto [u, v] = plane_basis(plane.normal);
  Point3 mid = Point3::Zero();
  for (int i : cap_pos) mid += pos.vertices[i];
  mid /= static_cast<double>(cap_pos.size());
  std::vector<std::size_t> order(cap_pos.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> ang(cap_pos.size());
  for (std::size_t k = 0; k < cap_pos.size(); ++k) {
    const Vec3 d = pos.vertices[cap_pos[k]] - mid;
    ang[k] = std::atan2(d.dot(v), d.dot(u));
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ang[a] < ang[b] || (ang[a] == ang[b] && a < b);
  });
  std::vector<int> ring_pos, ring_neg;
  const double dup2 = 1e-24 * std::max(1.0, cell.bounds().diagonal() * cell.bounds().diagonal());
  for (std::size_t k : order) {
    const Point3& p = pos.vertices[cap_pos[k]];
    if (!ring_pos.empty() && (pos.vertices[ring_pos.back()] - p).squaredNorm() <= dup2) continue;
    ring_pos.push_back(cap_pos[k]);
    ring_neg.push_back(cap_neg[k]);
  }
  while (ring_pos.size() > 1 &&
         (pos.vertices[ring_pos.front()] - pos.vertices[ring_pos.back()]).squaredNorm() <= dup2) {
    ring_pos.pop_back();
    ring_neg.pop_back();
  }

  auto as_both_or_majority = [&](double vp, double vn) {
    res.kind = vp >= vn ? SplitResult::Kind::AllPositive : SplitResult::Kind::AllNegative;
    res.positive.reset();
    res.negative.reset();
    res.shared_face.clear();
    return res;
  };
  if (ring_pos.size() < 3) {
    // Plane only grazes the cell within tolerance.
    return as_both_or_majority(any_pos ? 1.0 : 0.0, 0.0);
  }

  // Negative child's cap faces along +n, positive child's along -n.
  neg.faces.push_back({ring_neg, plane, opts.source});
  std::vector<int> rev(ring_pos.rbegin(), ring_pos.rend());
  pos.faces.push_back({rev, plane.flipped(), opts.source});
  for (int i : ring_pos) res.shared_face.push_back(pos.vertices[i]);

  compact(pos);
  compact(neg);

  auto volume_of = [](const ChildBuilder& c) {
    try {
      return cell_measures(c.vertices, c.faces).volume;
    } catch (const std::invalid_argument&) {
      return 0.0;
    }
  };
  const double vp = volume_of(pos);
  const double vn = volume_of(neg);
  if (vp < opts.volume_eps || vn < opts.volume_eps) return as_both_or_majority(vp, vn);

  res.kind = SplitResult::Kind::Both;
  res.positive.emplace(std::move(pos.vertices), std::move(pos.faces));
  res.negative.emplace(std::move(neg.vertices), std::move(neg.faces));
  return res;
}

}  // namespace polyrecon
