#include "polyrecon/shell.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace polyrecon {

namespace {

// Merges points closer than `tol`; the first point of a cluster is kept.
class Welder {
 public:
  explicit Welder(double tol) : tol_(tol), cell_(2.0 * tol) {}

  int add(const Point3& p) {
    const Key k = key(p);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = buckets_.find({k[0] + dx, k[1] + dy, k[2] + dz});
          if (it == buckets_.end()) continue;
          for (int i : it->second) {
            if ((points_[i] - p).norm() <= tol_) return i;
          }
        }
      }
    }
    points_.push_back(p);
    buckets_[k].push_back(static_cast<int>(points_.size()) - 1);
    return static_cast<int>(points_.size()) - 1;
  }

  std::vector<Point3>& points() { return points_; }

 private:
  using Key = std::array<long long, 3>;
  Key key(const Point3& p) const {
    return {static_cast<long long>(std::floor(p.x() / cell_)), static_cast<long long>(std::floor(p.y() / cell_)),
            static_cast<long long>(std::floor(p.z() / cell_))};
  }

  double tol_;
  double cell_;
  std::vector<Point3> points_;
  std::map<Key, std::vector<int>> buckets_;
};

std::vector<int> drop_repeats(std::vector<int> ring) {
  std::vector<int> out;
  for (int v : ring) {
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

// Splits every face edge at the welded vertices lying on its interior, so
// that neighbouring faces share identical edges.
void split_t_junctions(const std::vector<Point3>& pts, std::vector<std::vector<int>>& faces, double tol) {
  if (pts.empty()) return;
  std::array<std::vector<int>, 3> order;
  for (int a = 0; a < 3; ++a) {
    order[a].resize(pts.size());
    std::iota(order[a].begin(), order[a].end(), 0);
    std::stable_sort(order[a].begin(), order[a].end(), [&](int i, int j) { return pts[i][a] < pts[j][a]; });
  }
  for (auto& ring : faces) {
    std::vector<int> out;
    const std::size_t n = ring.size();
    for (std::size_t e = 0; e < n; ++e) {
      const int u = ring[e];
      const int v = ring[(e + 1) % n];
      out.push_back(u);
      const Point3& p = pts[u];
      const Vec3 d = pts[v] - p;
      const double len2 = d.squaredNorm();
      if (len2 <= tol * tol) continue;
      // Range query on the axis where the edge is thinnest.
      int axis = 0;
      for (int a = 1; a < 3; ++a) {
        if (std::abs(d[a]) < std::abs(d[axis])) axis = a;
      }
      const double lo = std::min(p[axis], pts[v][axis]) - tol;
      const double hi = std::max(p[axis], pts[v][axis]) + tol;
      const auto& ord = order[axis];
      auto it = std::lower_bound(ord.begin(), ord.end(), lo, [&](int i, double x) { return pts[i][axis] < x; });
      std::vector<std::pair<double, int>> inner;
      const double len = std::sqrt(len2);
      for (; it != ord.end() && pts[*it][axis] <= hi; ++it) {
        const int w = *it;
        if (w == u || w == v) continue;
        const double t = (pts[w] - p).dot(d) / len2;
        if (t * len <= tol || (1.0 - t) * len <= tol) continue;
        if ((pts[w] - (p + t * d)).norm() > tol) continue;
        inner.emplace_back(t, w);
      }
      std::sort(inner.begin(), inner.end());
      for (const auto& [t, w] : inner) out.push_back(w);
    }
    ring = drop_repeats(std::move(out));
  }
}

Plane oriented_like(const Plane& plane, const Polygon& poly) {
  return plane.normal.dot(polygon_normal(poly)) < 0.0 ? plane.flipped() : plane;
}

}  // namespace

Shell extract_shell(const CellComplex& complex, const Labeling& labeling) {
  const auto& cells = complex.cells();
  if (labeling.size() != cells.size()) throw std::invalid_argument("extract_shell: labeling size mismatch");
  Shell shell;
  if (std::none_of(labeling.begin(), labeling.end(), [](Label l) { return l == Label::In; })) {
    shell.warning = "no interior cells; the shell is empty";
    return shell;
  }

  std::vector<Polygon> rings;
  std::vector<ShellFace> info;
  for (const auto& r : complex.adjacency()) {
    const bool ain = labeling[r.a] == Label::In;
    const bool bin = labeling[r.b] == Label::In;
    if (ain == bin) continue;
    Polygon poly = r.face;
    if (bin) std::reverse(poly.begin(), poly.end());
    const Plane plane = oriented_like(complex.planes()[r.source], poly);
    rings.push_back(std::move(poly));
    info.push_back({ain ? r.a : r.b, ain ? r.b : r.a, -1, r.source, plane});
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (labeling[c] != Label::In) continue;
    const auto& faces = cells[c].faces();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!is_wall_source(faces[f].source)) continue;
      rings.push_back(cells[c].face_polygon(f));
      info.push_back({static_cast<int>(c), -1, wall_index(faces[f].source), faces[f].source, faces[f].plane});
    }
  }

  const double tol = tol::kWeld * complex.scale();
  Welder welder(tol);
  std::vector<std::vector<int>> faces;
  std::vector<ShellFace> kept;
  for (std::size_t f = 0; f < rings.size(); ++f) {
    std::vector<int> ring;
    for (const auto& p : rings[f]) ring.push_back(welder.add(p));
    ring = drop_repeats(std::move(ring));
    if (ring.size() < 3) continue;
    faces.push_back(std::move(ring));
    kept.push_back(info[f]);
  }
  split_t_junctions(welder.points(), faces, tol);

  shell.mesh.vertices = std::move(welder.points());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (faces[f].size() < 3) continue;
    shell.mesh.faces.push_back(std::move(faces[f]));
    shell.faces.push_back(kept[f]);
  }
  return shell;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

using DirectedEdge = std::pair<int, int>;

// Boundary of a face group as one loop, or nothing when the union has holes,
// several components or a pinch vertex.
std::optional<std::vector<int>> trace_boundary(const std::vector<std::vector<int>>& faces,
                                               const std::vector<int>& group) {
  std::map<DirectedEdge, int> net;
  for (int f : group) {
    const auto& ring = faces[f];
    for (std::size_t e = 0; e < ring.size(); ++e) {
      const int u = ring[e], v = ring[(e + 1) % ring.size()];
      const auto back = net.find({v, u});
      if (back != net.end()) {
        if (--back->second == 0) net.erase(back);
      } else {
        ++net[{u, v}];
      }
    }
  }
  std::map<int, int> next;
  for (const auto& [e, count] : net) {
    if (count != 1 || !next.emplace(e.first, e.second).second) return std::nullopt;
  }
  if (next.size() < 3) return std::nullopt;
  std::vector<int> loop{next.begin()->first};
  while (true) {
    const auto it = next.find(loop.back());
    if (it == next.end()) return std::nullopt;
    const int v = it->second;
    if (v == loop.front()) break;
    if (loop.size() > next.size()) return std::nullopt;
    loop.push_back(v);
  }
  if (loop.size() != next.size()) return std::nullopt;
  return loop;
}

}  // namespace

MergeResult merge_coplanar(const Shell& shell, double angle_tolerance, double offset_tolerance) {
  const auto& mesh = shell.mesh;
  const std::size_t nf = mesh.faces.size();
  if (shell.faces.size() != nf) throw std::invalid_argument("merge_coplanar: provenance does not match faces");
  MergeResult result;
  if (nf == 0) return result;

  // Faces sharing an undirected edge and lying on the same oriented plane.
  UnionFind uf(nf);
  std::map<DirectedEdge, std::vector<int>> by_edge;
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& ring = mesh.faces[f];
    for (std::size_t e = 0; e < ring.size(); ++e) {
      const int u = ring[e], v = ring[(e + 1) % ring.size()];
      by_edge[{std::min(u, v), std::max(u, v)}].push_back(static_cast<int>(f));
    }
  }
  for (const auto& [edge, fs] : by_edge) {
    for (std::size_t i = 0; i < fs.size(); ++i) {
      for (std::size_t j = i + 1; j < fs.size(); ++j) {
        if (same_plane(shell.faces[fs[i]].plane, shell.faces[fs[j]].plane, angle_tolerance, offset_tolerance)) {
          uf.unite(fs[i], fs[j]);
        }
      }
    }
  }
  std::map<int, std::vector<int>> groups;
  for (std::size_t f = 0; f < nf; ++f) groups[uf.find(static_cast<int>(f))].push_back(static_cast<int>(f));

  std::vector<std::vector<int>> faces;
  std::vector<Plane> planes;
  for (const auto& [root, group] : groups) {
    if (group.size() == 1) {
      faces.push_back(mesh.faces[group[0]]);
      planes.push_back(shell.faces[group[0]].plane);
      continue;
    }
    if (auto loop = trace_boundary(mesh.faces, group)) {
      faces.push_back(std::move(*loop));
      planes.push_back(shell.faces[root].plane);
      ++result.groups_merged;
    } else {
      for (int f : group) {
        faces.push_back(mesh.faces[f]);
        planes.push_back(shell.faces[f].plane);
      }
      ++result.groups_flagged;
    }
  }

  // A vertex can go only if it is a straight pass-through in every face.
  const double tol = tol::kWeld * std::max(mesh.bounds().diagonal(), 1e-300);
  std::vector<int> uses(mesh.vertices.size(), 0), straight(mesh.vertices.size(), 0);
  auto is_straight = [&](const std::vector<int>& ring, std::size_t k) {
    const std::size_t n = ring.size();
    const Point3& a = mesh.vertices[ring[(k + n - 1) % n]];
    const Point3& b = mesh.vertices[ring[k]];
    const Point3& c = mesh.vertices[ring[(k + 1) % n]];
    const Vec3 d = c - a;
    const double len = d.norm();
    if (len <= tol) return false;
    const double t = (b - a).dot(d) / (len * len);
    return t > 0.0 && t < 1.0 && (b - (a + t * d)).norm() <= tol;
  };
  for (const auto& ring : faces) {
    for (std::size_t k = 0; k < ring.size(); ++k) {
      ++uses[ring[k]];
      if (is_straight(ring, k)) ++straight[ring[k]];
    }
  }
  for (auto& ring : faces) {
    std::vector<int> out;
    for (int v : ring) {
      if (uses[v] == 0 || straight[v] != uses[v]) out.push_back(v);
    }
    if (out.size() >= 3) ring = std::move(out);
  }

  std::vector<int> remap(mesh.vertices.size(), -1);
  for (auto& ring : faces) {
    for (int& v : ring) {
      if (remap[v] < 0) {
        remap[v] = static_cast<int>(result.mesh.vertices.size());
        result.mesh.vertices.push_back(mesh.vertices[v]);
      }
      v = remap[v];
    }
  }
  result.mesh.faces = std::move(faces);
  result.planes = std::move(planes);
  return result;
}

}  // namespace polyrecon
