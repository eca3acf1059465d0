#include "polyrecon/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace polyrecon {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

PolyMesh read_obj(std::istream& in) {
  PolyMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw IoError("OBJ: bad vertex on line " + std::to_string(lineno));
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string tok;
      while (ls >> tok) {
        // "i", "i/t", "i/t/n" and "i//n" all start with the position index.
        const int idx = std::stoi(tok.substr(0, tok.find('/')));
        const int n = static_cast<int>(mesh.vertices.size());
        face.push_back(idx > 0 ? idx - 1 : n + idx);
      }
      if (face.size() < 3) throw IoError("OBJ: face with < 3 vertices on line " + std::to_string(lineno));
      mesh.faces.push_back(std::move(face));
    }
  }
  try {
    mesh.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("OBJ: ") + e.what());
  }
  return mesh;
}

void write_obj(std::ostream& out, const PolyMesh& mesh) {
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) {
    out << 'f';
    for (int i : f) out << ' ' << (i + 1);
    out << '\n';
  }
}

namespace {

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

Scalar parse_scalar(const std::string& s) {
  if (s == "char" || s == "int8") return Scalar::I8;
  if (s == "uchar" || s == "uint8") return Scalar::U8;
  if (s == "short" || s == "int16") return Scalar::I16;
  if (s == "ushort" || s == "uint16") return Scalar::U16;
  if (s == "int" || s == "int32") return Scalar::I32;
  if (s == "uint" || s == "uint32") return Scalar::U32;
  if (s == "float" || s == "float32") return Scalar::F32;
  if (s == "double" || s == "float64") return Scalar::F64;
  throw IoError("PLY: unknown scalar type '" + s + "'");
}

struct PlyProperty {
  std::string name;
  Scalar type = Scalar::F64;
  bool is_list = false;
  Scalar count_type = Scalar::U8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

template <class T>
T read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("PLY: unexpected end of binary data");
  return v;
}

double read_binary_scalar(std::istream& in, Scalar s) {
  switch (s) {
    case Scalar::I8:
      return read_raw<int8_t>(in);
    case Scalar::U8:
      return read_raw<uint8_t>(in);
    case Scalar::I16:
      return read_raw<int16_t>(in);
    case Scalar::U16:
      return read_raw<uint16_t>(in);
    case Scalar::I32:
      return read_raw<int32_t>(in);
    case Scalar::U32:
      return read_raw<uint32_t>(in);
    case Scalar::F32:
      return read_raw<float>(in);
    case Scalar::F64:
      return read_raw<double>(in);
  }
  return 0.0;
}

double read_ascii_scalar(std::istream& in) {
  double v;
  if (!(in >> v)) throw IoError("PLY: malformed ascii value");
  return v;
}

struct PlyData {
  std::vector<Point3> vertices;
  std::vector<std::vector<int>> faces;
};

PlyData read_ply_data(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw IoError("PLY: missing magic");
  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw IoError("PLY: unsupported format " + fmt);
      }
    } else if (kw == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) throw IoError("PLY: property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar(ct);
        p.type = parse_scalar(it);
      } else {
        p.type = parse_scalar(t);
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (kw == "end_header") {
      break;
    }
  }

  PlyData data;
  for (const auto& e : elements) {
    int ix = -1, iy = -1, iz = -1, iface = -1;
    for (std::size_t k = 0; k < e.props.size(); ++k) {
      const auto& n = e.props[k].name;
      if (n == "x") ix = static_cast<int>(k);
      if (n == "y") iy = static_cast<int>(k);
      if (n == "z") iz = static_cast<int>(k);
      if (n == "vertex_indices" || n == "vertex_index") iface = static_cast<int>(k);
    }
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw IoError("PLY: vertex element lacks x/y/z");
    std::vector<double> scalars(e.props.size());
    for (std::size_t r = 0; r < e.count; ++r) {
      std::vector<int> face;
      for (std::size_t k = 0; k < e.props.size(); ++k) {
        const auto& p = e.props[k];
        if (p.is_list) {
          const auto cnt = static_cast<std::size_t>(binary ? read_binary_scalar(in, p.count_type)
                                                           : read_ascii_scalar(in));
          for (std::size_t c = 0; c < cnt; ++c) {
            const double v = binary ? read_binary_scalar(in, p.type) : read_ascii_scalar(in);
            if (is_face && static_cast<int>(k) == iface) face.push_back(static_cast<int>(v));
          }
        } else {
          scalars[k] = binary ? read_binary_scalar(in, p.type) : read_ascii_scalar(in);
        }
      }
      if (is_vertex) data.vertices.emplace_back(scalars[ix], scalars[iy], scalars[iz]);
      if (is_face && iface >= 0) data.faces.push_back(std::move(face));
    }
  }
  return data;
}

}  // namespace

PolyMesh read_ply(std::istream& in) {
  PlyData d = read_ply_data(in);
  PolyMesh mesh{std::move(d.vertices), std::move(d.faces)};
  try {
    mesh.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("PLY: ") + e.what());
  }
  return mesh;
}

void write_ply(std::ostream& out, const PolyMesh& mesh, PlyFormat format) {
  std::size_t max_deg = 0;
  for (const auto& f : mesh.faces) max_deg = std::max(max_deg, f.size());
  const bool wide = max_deg > 255;
  out << "ply\n"
      << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (!mesh.faces.empty()) {
    out << "element face " << mesh.faces.size() << "\n"
        << "property list " << (wide ? "uint" : "uchar") << " int vertex_indices\n";
  }
  out << "end_header\n";
  if (format == PlyFormat::Ascii) {
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& f : mesh.faces) {
      out << f.size();
      for (int i : f) out << ' ' << i;
      out << '\n';
    }
    return;
  }
  for (const auto& v : mesh.vertices) {
    const double xyz[3] = {v.x(), v.y(), v.z()};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const auto& f : mesh.faces) {
    if (wide) {
      const auto n = static_cast<uint32_t>(f.size());
      out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    } else {
      const auto n = static_cast<uint8_t>(f.size());
      out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    }
    for (int i : f) {
      const auto v = static_cast<int32_t>(i);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
}

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

PolyMesh read_mesh(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string ext = lower_ext(path);
  if (ext == ".obj") return read_obj(in);
  if (ext == ".ply") return read_ply(in);
  throw IoError("unsupported mesh format: " + path.string());
}

void write_mesh(const std::filesystem::path& path, const PolyMesh& mesh, PlyFormat format) {
  std::ostringstream out(std::ios::binary);
  const std::string ext = lower_ext(path);
  if (ext == ".obj") {
    write_obj(out, mesh);
  } else if (ext == ".ply") {
    write_ply(out, mesh, format);
  } else {
    throw IoError("unsupported mesh format: " + path.string());
  }
  write_file_atomic(path, out.str());
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string ext = lower_ext(path);
  if (ext == ".ply") return read_ply_data(in).vertices;
  if (ext == ".xyz" || ext == ".txt") {
    PointCloud pts;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      double x, y, z;
      if (ls >> x >> y >> z) pts.emplace_back(x, y, z);
    }
    return pts;
  }
  throw IoError("unsupported point-cloud format: " + path.string());
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& points, PlyFormat format) {
  const std::string ext = lower_ext(path);
  std::ostringstream out(std::ios::binary);
  if (ext == ".xyz" || ext == ".txt") {
    out << std::setprecision(17);
    for (const auto& p : points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  } else if (ext == ".ply") {
    write_ply(out, PolyMesh{points, {}}, format);
  } else {
    throw IoError("unsupported point-cloud format: " + path.string());
  }
  write_file_atomic(path, out.str());
}

namespace {

uint64_t fnv1a(const void* data, std::size_t n, uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex16(uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

}  // namespace

std::string checksum(const PointCloud& points) {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& p : points) {
    const double xyz[3] = {p.x(), p.y(), p.z()};
    h = fnv1a(xyz, sizeof(xyz), h);
  }
  return hex16(h);
}

std::string checksum_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex16(fnv1a(bytes.data(), bytes.size()));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace polyrecon
