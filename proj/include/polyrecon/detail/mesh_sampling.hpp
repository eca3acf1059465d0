#pragma once

#include <algorithm>
#include <random>
#include <stdexcept>

namespace polyrecon {

template <class Rng>
std::vector<SurfaceSample> sample_surface(const PolyMesh& mesh, std::size_t n, Rng& rng) {
  const std::vector<Triangle> tris = triangulate(mesh);
  std::vector<double> cdf;
  cdf.reserve(tris.size());
  double total = 0.0;
  for (const auto& t : tris) {
    total += t.area();
    cdf.push_back(total);
  }
  if (!(total > 0.0)) throw std::invalid_argument("sample_surface: mesh has no area");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<SurfaceSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = uni(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    if (it == cdf.end()) --it;
    const Triangle& t = tris[static_cast<std::size_t>(it - cdf.begin())];
    double u = uni(rng), v = uni(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    out.push_back({t.a + u * (t.b - t.a) + v * (t.c - t.a), t.normal().normalized()});
  }
  return out;
}

}  // namespace polyrecon
