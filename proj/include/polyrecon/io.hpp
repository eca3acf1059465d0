#pragma once

// Mesh and point-cloud file formats: OBJ, PLY (ascii / binary little endian), XYZ.

#include "polyrecon/geom.hpp"
#include "polyrecon/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyrecon {

using PointCloud = std::vector<Point3>;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PlyFormat { Ascii, BinaryLittleEndian };

PolyMesh read_obj(std::istream& in);
void write_obj(std::ostream& out, const PolyMesh& mesh);

/// Reads any scalar vertex types; faces from a `vertex_indices` (or
/// `vertex_index`) list property. Elements other than vertex/face are skipped.
PolyMesh read_ply(std::istream& in);
/// Vertices as float64 x/y/z, faces as `list uchar int` (or `list uint int`
/// when a face has more than 255 vertices).
void write_ply(std::ostream& out, const PolyMesh& mesh, PlyFormat format);

/// Dispatches on extension (.obj, .ply).
PolyMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const PolyMesh& mesh,
                PlyFormat format = PlyFormat::BinaryLittleEndian);

/// Point clouds: .ply (vertices only, faces ignored) or .xyz (whitespace
/// separated x y z per line, extra columns ignored).
PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& points,
                       PlyFormat format = PlyFormat::BinaryLittleEndian);

/// FNV-1a over the raw coordinate bytes, as 16 hex digits.
std::string checksum(const PointCloud& points);
std::string checksum_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace polyrecon
