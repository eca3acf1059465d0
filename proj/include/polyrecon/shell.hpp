#pragma once

// Outer shell of the interior-cell union and coplanar face merging.

#include "polyrecon/complex.hpp"
#include "polyrecon/mesh.hpp"
#include "polyrecon/mrf.hpp"

#include <string>
#include <vector>

namespace polyrecon {

struct ShellFace {
  int cell = -1;       // interior cell the face bounds
  int neighbor = -1;   // exterior cell across the face, -1 on a box wall
  int wall = -1;       // wall index 0..5 (-x,+x,-y,+y,-z,+z), -1 for interior faces
  int source = 0;      // plane id (wall tags are negative)
  Plane plane;         // supporting plane, oriented outward
};

struct Shell {
  PolyMesh mesh;
  std::vector<ShellFace> faces;  // parallel to mesh.faces
  std::string warning;
};

/// Faces between differently labeled cells, oriented from In to Out, plus
/// box-wall facets of In cells. Vertices are welded and T-junctions split so
/// that the result is closed with consistent orientation.
Shell extract_shell(const CellComplex& complex, const Labeling& labeling);

struct MergeResult {
  PolyMesh mesh;
  std::vector<Plane> planes;  // per output face
  std::size_t groups_merged = 0;
  /// Coplanar groups left unmerged because their union is not one simple
  /// loop (a hole or a pinch vertex).
  std::size_t groups_flagged = 0;
};

/// Unions edge-connected faces on the same oriented plane into single
/// polygons and drops vertices that are straight in every face using them.
MergeResult merge_coplanar(const Shell& shell, double angle_tolerance = 1e-6, double offset_tolerance = 1e-8);

}  // namespace polyrecon
