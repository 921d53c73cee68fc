#pragma once

#include <relit/error.hpp>
#include <relit/math.hpp>

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace relit {

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;
  std::vector<Vec2> uvs;
  std::vector<std::array<int, 3>> triangles;

  double triangle_area(std::size_t i) const {
    const auto& t = triangles[i];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
  }

  void validate() const {
    require(!triangles.empty(), "mesh has no triangles");
    require(normals.size() == vertices.size() && uvs.size() == vertices.size(),
            "mesh attribute arrays differ in length");
    const int n = static_cast<int>(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      require(vertices[i].allFinite() && uvs[i].allFinite(), "mesh has non-finite attributes");
      require(std::abs(normals[i].norm() - 1.0) <= 1e-6, "mesh normal is not unit length");
    }
    for (std::size_t i = 0; i < triangles.size(); ++i) {
      for (int v : triangles[i]) require(v >= 0 && v < n, "mesh triangle index out of range");
      require(triangle_area(i) > 1e-12, "mesh has a degenerate triangle");
    }
  }

  /// Appends `other`, offsetting its indices.
  void append(const Mesh& other) {
    const int base = static_cast<int>(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    normals.insert(normals.end(), other.normals.begin(), other.normals.end());
    uvs.insert(uvs.end(), other.uvs.begin(), other.uvs.end());
    for (auto t : other.triangles) triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  }

  /// Area-weighted vertex normals from the geometry.
  void compute_normals() {
    normals.assign(vertices.size(), Vec3::Zero());
    for (const auto& t : triangles) {
      const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
      for (int v : t) normals[v] += n;
    }
    for (auto& n : normals) n = n.squaredNorm() > 0 ? n.normalized() : Vec3::UnitZ();
  }
};

/// Rectangle of the uv square assigned to a primitive.
struct UvRect {
  double u0 = 0, v0 = 0, u1 = 1, v1 = 1;
  Vec2 map(double s, double t) const { return {u0 + s * (u1 - u0), v0 + t * (v1 - v0)}; }
};

namespace detail {

// Latitude-longitude surface; rings above the equator are shifted by +half_height along z,
// rings below by -half_height (a capsule when half_height > 0).
inline Mesh make_lat_long(const Vec3& center, double radius, double half_height, int segments, int rings,
                          const UvRect& rect) {
  require(segments >= 3 && rings >= 2 && radius > 0, "sphere tessellation too coarse");
  Mesh m;
  std::vector<double> ring_theta;
  for (int j = 0; j <= rings; ++j) ring_theta.push_back(kPi * j / rings);
  if (half_height > 0 && rings % 2 == 0) ring_theta.insert(ring_theta.begin() + rings / 2 + 1, kPi / 2);
  const int n_rings = static_cast<int>(ring_theta.size()) - 1;
  const double total_len = kPi * radius + 2 * half_height;
  double arc = 0;
  std::vector<double> ring_v;
  for (int j = 0; j <= n_rings; ++j) {
    if (j > 0) {
      const bool cylinder = ring_theta[j] == ring_theta[j - 1];
      arc += cylinder ? 2 * half_height : radius * (ring_theta[j] - ring_theta[j - 1]);
    }
    ring_v.push_back(arc / total_len);
  }
  bool seen_equator = false;
  for (int j = 0; j <= n_rings; ++j) {
    const double theta = ring_theta[j];
    double offset = theta < kPi / 2 ? half_height : -half_height;
    if (theta == kPi / 2) {
      offset = seen_equator || half_height == 0 ? -half_height : half_height;
      seen_equator = true;
    }
    for (int i = 0; i <= segments; ++i) {
      const double u = static_cast<double>(i) / segments;
      const double phi = 2.0 * kPi * u;
      const Vec3 n(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
      m.vertices.push_back(center + radius * n + Vec3(0, 0, offset));
      m.normals.push_back(n);
      m.uvs.push_back(rect.map(u, ring_v[j]));
    }
  }
  const int row = segments + 1;
  for (int j = 0; j < n_rings; ++j) {
    for (int i = 0; i < segments; ++i) {
      const int a = j * row + i, b = a + 1, c = a + row, d = c + 1;
      if (j > 0) m.triangles.push_back({a, c, b});
      if (j < n_rings - 1) m.triangles.push_back({b, c, d});
    }
  }
  return m;
}

}  // namespace detail

inline Mesh make_sphere(const Vec3& center, double radius, int segments, int rings, const UvRect& rect = {}) {
  return detail::make_lat_long(center, radius, 0.0, segments, rings, rect);
}

/// Capsule aligned with z: cylinder of length `height` capped by hemispheres.
inline Mesh make_capsule(const Vec3& center, double radius, double height, int segments, int rings,
                         const UvRect& rect = {}) {
  require(height > 0 && rings % 2 == 0, "capsule needs positive height and an even ring count");
  return detail::make_lat_long(center, radius, 0.5 * height, segments, rings, rect);
}

/// Axis-aligned box, each face a grid of `subdiv` x `subdiv` quads. Face k uses the tile
/// (k % 2, k / 2) of a 2 x 3 split of `rect`.
inline Mesh make_box(const Vec3& lo, const Vec3& hi, int subdiv, const UvRect& rect = {}) {
  require((hi - lo).minCoeff() > 0 && subdiv >= 1, "box extents must be positive");
  Mesh m;
  const Vec3 c = 0.5 * (lo + hi), e = 0.5 * (hi - lo);
  for (int face = 0; face < 6; ++face) {
    const int axis = face / 2;
    const double sign = face % 2 == 0 ? 1.0 : -1.0;
    Vec3 n = Vec3::Zero();
    n[axis] = sign;
    Vec3 s = Vec3::Zero(), t = Vec3::Zero();
    s[(axis + 1) % 3] = 1;
    t = n.cross(s);
    const UvRect tile{rect.u0 + (rect.u1 - rect.u0) * (face % 2) / 2.0,
                      rect.v0 + (rect.v1 - rect.v0) * (face / 2) / 3.0,
                      rect.u0 + (rect.u1 - rect.u0) * (face % 2 + 1) / 2.0,
                      rect.v0 + (rect.v1 - rect.v0) * (face / 2 + 1) / 3.0};
    const int base = static_cast<int>(m.vertices.size());
    for (int j = 0; j <= subdiv; ++j) {
      for (int i = 0; i <= subdiv; ++i) {
        const double a = 2.0 * i / subdiv - 1.0, b = 2.0 * j / subdiv - 1.0;
        Vec3 p = c;
        for (int k = 0; k < 3; ++k) p[k] += e[k] * (n[k] + a * s[k] + b * t[k]);
        m.vertices.push_back(p);
        m.normals.push_back(n);
        m.uvs.push_back(tile.map(static_cast<double>(i) / subdiv, static_cast<double>(j) / subdiv));
      }
    }
    const int row = subdiv + 1;
    for (int j = 0; j < subdiv; ++j) {
      for (int i = 0; i < subdiv; ++i) {
        const int a = base + j * row + i, b = a + 1, cc = a + row, d = cc + 1;
        m.triangles.push_back({a, b, d});
        m.triangles.push_back({a, d, cc});
      }
    }
  }
  return m;
}

// PLY ------------------------------------------------------------------------

namespace detail {

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

inline PlyType parse_ply_type(const std::string& s) {
  static const std::map<std::string, PlyType> table = {
      {"char", PlyType::kInt8},     {"int8", PlyType::kInt8},       {"uchar", PlyType::kUint8},
      {"uint8", PlyType::kUint8},   {"short", PlyType::kInt16},     {"int16", PlyType::kInt16},
      {"ushort", PlyType::kUint16}, {"uint16", PlyType::kUint16},   {"int", PlyType::kInt32},
      {"int32", PlyType::kInt32},   {"uint", PlyType::kUint32},     {"uint32", PlyType::kUint32},
      {"float", PlyType::kFloat32}, {"float32", PlyType::kFloat32}, {"double", PlyType::kFloat64},
      {"float64", PlyType::kFloat64}};
  auto it = table.find(s);
  if (it == table.end()) throw ValidationError("PLY: unknown property type '" + s + "'");
  return it->second;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat32;
  bool is_list = false;
  PlyType count_type = PlyType::kUint8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

template <typename T>
double read_le(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ValidationError("PLY: truncated binary data");
  return static_cast<double>(v);
}

inline double read_ply_value(std::istream& in, PlyType t, bool binary) {
  if (!binary) {
    double v;
    if (!(in >> v)) throw ValidationError("PLY: truncated or malformed ascii data");
    return v;
  }
  switch (t) {
    case PlyType::kInt8: return read_le<std::int8_t>(in);
    case PlyType::kUint8: return read_le<std::uint8_t>(in);
    case PlyType::kInt16: return read_le<std::int16_t>(in);
    case PlyType::kUint16: return read_le<std::uint16_t>(in);
    case PlyType::kInt32: return read_le<std::int32_t>(in);
    case PlyType::kUint32: return read_le<std::uint32_t>(in);
    case PlyType::kFloat32: return read_le<float>(in);
    case PlyType::kFloat64: return read_le<double>(in);
  }
  return 0;
}

}  // namespace detail

/// Reads ASCII or binary little-endian PLY with positions, optional normals and uvs
/// (u/v, s/t or texture_u/texture_v) and polygon faces (fan-triangulated).
/// Missing normals are computed; degenerate triangles are dropped.
inline Mesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing file: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw ValidationError("PLY: bad magic in " + path.string());
  bool binary = false;
  std::vector<detail::PlyElement> elements;
  for (;;) {
    if (!std::getline(in, line)) throw ValidationError("PLY: unterminated header in " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") throw ValidationError("PLY: unsupported format " + fmt);
    } else if (kw == "element") {
      detail::PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) throw ValidationError("PLY: property before element");
      detail::PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = detail::parse_ply_type(ct);
        p.type = detail::parse_ply_type(it);
      } else {
        p.type = detail::parse_ply_type(type);
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    }
  }

  Mesh mesh;
  bool has_normals = false, has_uvs = false;
  for (const auto& e : elements) {
    std::map<std::string, int> col;
    for (std::size_t i = 0; i < e.properties.size(); ++i) col[e.properties[i].name] = static_cast<int>(i);
    auto find = [&](std::initializer_list<const char*> names) {
      for (auto n : names)
        if (col.count(n)) return col[n];
      return -1;
    };
    const int ix = find({"x"}), iy = find({"y"}), iz = find({"z"});
    const int inx = find({"nx"}), iny = find({"ny"}), inz = find({"nz"});
    const int iu = find({"u", "s", "texture_u"}), iv = find({"v", "t", "texture_v"});
    const int iface = find({"vertex_indices", "vertex_index"});
    if (e.name == "vertex") {
      require(ix >= 0 && iy >= 0 && iz >= 0, "PLY: vertex element lacks x/y/z");
      has_normals = inx >= 0 && iny >= 0 && inz >= 0;
      has_uvs = iu >= 0 && iv >= 0;
    }
    std::vector<double> values(e.properties.size());
    for (std::size_t r = 0; r < e.count; ++r) {
      std::vector<int> face;
      for (std::size_t p = 0; p < e.properties.size(); ++p) {
        const auto& prop = e.properties[p];
        if (prop.is_list) {
          const auto n = static_cast<std::size_t>(detail::read_ply_value(in, prop.count_type, binary));
          for (std::size_t k = 0; k < n; ++k) {
            const double v = detail::read_ply_value(in, prop.type, binary);
            if (static_cast<int>(p) == iface) face.push_back(static_cast<int>(v));
          }
        } else {
          values[p] = detail::read_ply_value(in, prop.type, binary);
        }
      }
      if (e.name == "vertex") {
        mesh.vertices.emplace_back(values[ix], values[iy], values[iz]);
        if (has_normals) mesh.normals.emplace_back(values[inx], values[iny], values[inz]);
        mesh.uvs.emplace_back(has_uvs ? values[iu] : 0.0, has_uvs ? values[iv] : 0.0);
      } else if (e.name == "face") {
        require(face.size() >= 3, "PLY: face with fewer than 3 vertices");
        for (std::size_t k = 1; k + 1 < face.size(); ++k) mesh.triangles.push_back({face[0], face[k], face[k + 1]});
      }
    }
  }
  require(!mesh.triangles.empty(), "PLY: mesh has no faces: " + path.string());
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles)
    for (int v : t) require(v >= 0 && v < n, "PLY: face index out of range");
  std::erase_if(mesh.triangles, [&](const auto& t) {
    return 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm() <=
           1e-12;
  });
  if (has_normals) {
    for (auto& nv : mesh.normals) {
      require(nv.allFinite() && nv.squaredNorm() > 0, "PLY: zero or non-finite normal");
      if (std::abs(nv.norm() - 1.0) > 1e-12) nv.normalize();
    }
  } else {
    mesh.compute_normals();
  }
  mesh.validate();
  return mesh;
}

/// Writes binary little-endian PLY with double precision attributes.
inline void write_ply(const Mesh& mesh, const std::filesystem::path& path, bool ascii = false) {
  mesh.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n";
  for (const char* p : {"x", "y", "z", "nx", "ny", "nz", "u", "v"}) out << "property double " << p << "\n";
  out << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  if (ascii) {
    out << std::setprecision(17);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const auto &p = mesh.vertices[i], &n = mesh.normals[i];
      const auto& uv = mesh.uvs[i];
      out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << n.x() << ' ' << n.y() << ' ' << n.z() << ' ' << uv.x()
          << ' ' << uv.y() << '\n';
    }
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  } else {
    auto put = [&](auto v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      for (int k = 0; k < 3; ++k) put(mesh.vertices[i][k]);
      for (int k = 0; k < 3; ++k) put(mesh.normals[i][k]);
      put(mesh.uvs[i].x());
      put(mesh.uvs[i].y());
    }
    for (const auto& t : mesh.triangles) {
      put(static_cast<std::uint8_t>(3));
      for (int v : t) put(static_cast<std::int32_t>(v));
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace relit
