#include "tdlfd/mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Geometry>

#include "tdlfd/error.hpp"

namespace tdlfd {

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + msg);
}

int obj_index(const std::string& token, std::size_t vertex_count, std::size_t line) {
  const std::string head = token.substr(0, token.find('/'));
  std::size_t used = 0;
  long idx = 0;
  try {
    idx = std::stol(head, &used);
  } catch (const std::exception&) {
    parse_fail(line, "bad face index '" + token + "'");
  }
  if (used != head.size() || idx == 0) parse_fail(line, "bad face index '" + token + "'");
  const long resolved = idx > 0 ? idx - 1 : static_cast<long>(vertex_count) + idx;
  if (resolved < 0 || resolved >= static_cast<long>(vertex_count)) {
    parse_fail(line, "face index " + std::to_string(idx) + " out of range");
  }
  return static_cast<int>(resolved);
}

class VertexPool {
 public:
  explicit VertexPool(Mesh& mesh) : mesh_(mesh) {}

  int add(const Vec3& v) {
    const std::array<double, 3> key{v.x(), v.y(), v.z()};
    auto [it, inserted] = index_.try_emplace(key, static_cast<int>(mesh_.vertices.size()));
    if (inserted) mesh_.vertices.push_back(v);
    return it->second;
  }

 private:
  Mesh& mesh_;
  std::map<std::array<double, 3>, int> index_;
};

Mesh parse_ascii_stl(const std::string& text) {
  Mesh mesh;
  VertexPool pool(mesh);
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::vector<int> facet;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream ls(raw);
    std::string word;
    if (!(ls >> word)) continue;
    if (word == "vertex") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) parse_fail(line_no, "malformed vertex");
      facet.push_back(pool.add({x, y, z}));
    } else if (word == "endfacet") {
      if (facet.size() != 3) parse_fail(line_no, "facet with " + std::to_string(facet.size()) + " vertices");
      mesh.triangles.push_back({facet[0], facet[1], facet[2]});
      facet.clear();
    } else if (word == "facet" || word == "outer" || word == "endloop" || word == "solid" || word == "endsolid") {
      continue;
    } else {
      parse_fail(line_no, "unexpected token '" + word + "'");
    }
  }
  return mesh;
}

Mesh parse_binary_stl(const std::string& bytes) {
  if (bytes.size() < 84) throw Error(ErrorCode::ParseError, "binary STL shorter than its header");
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 80, 4);
  if (bytes.size() != 84 + 50 * static_cast<std::size_t>(count)) {
    throw Error(ErrorCode::ParseError, "binary STL size does not match its triangle count");
  }
  Mesh mesh;
  VertexPool pool(mesh);
  for (std::uint32_t t = 0; t < count; ++t) {
    const char* rec = bytes.data() + 84 + 50 * static_cast<std::size_t>(t);
    std::array<int, 3> tri{};
    for (int v = 0; v < 3; ++v) {
      float xyz[3];
      std::memcpy(xyz, rec + 12 + 12 * v, 12);
      tri[static_cast<std::size_t>(v)] = pool.add({xyz[0], xyz[1], xyz[2]});
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

}  // namespace

Vec3 Mesh::centroid() const {
  Vec3 acc = Vec3::Zero();
  double area = 0.0;
  for (const auto& t : triangles) {
    const Vec3& a = vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = vertices[static_cast<std::size_t>(t[2])];
    const double w = 0.5 * (b - a).cross(c - a).norm();
    acc += w * (a + b + c) / 3.0;
    area += w;
  }
  return area > 0.0 ? Vec3(acc / area) : Vec3::Zero();
}

double Mesh::diameter() const {
  if (vertices.empty()) return 0.0;
  Vec3 lo = vertices.front();
  Vec3 hi = vertices.front();
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

void clean(Mesh& mesh) {
  const auto n = static_cast<int>(mesh.vertices.size());
  std::vector<std::array<int, 3>> kept;
  kept.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    for (int i : t) {
      if (i < 0 || i >= n) throw Error(ErrorCode::ParseError, "triangle index " + std::to_string(i) + " out of range");
    }
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
    if ((b - a).cross(c - a).norm() > 0.0) kept.push_back(t);
  }
  mesh.triangles = std::move(kept);
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no non-degenerate triangles");
}

Mesh parse_obj(std::istream& in) {
  Mesh mesh;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream ls(raw);
    std::string word;
    if (!(ls >> word) || word[0] == '#') continue;
    if (word == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) parse_fail(line_no, "malformed vertex");
      mesh.vertices.emplace_back(x, y, z);
    } else if (word == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) idx.push_back(obj_index(tok, mesh.vertices.size(), line_no));
      if (idx.size() < 3) parse_fail(line_no, "face with fewer than three vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  clean(mesh);
  return mesh;
}

Mesh parse_stl(std::istream& in) {
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const bool ascii = bytes.rfind("solid", 0) == 0 && bytes.find("facet") != std::string::npos &&
                     bytes.find("vertex") != std::string::npos;
  Mesh mesh = ascii ? parse_ascii_stl(bytes) : parse_binary_stl(bytes);
  clean(mesh);
  return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open mesh " + path.string());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  try {
    if (ext == ".obj") return parse_obj(in);
    if (ext == ".stl") return parse_stl(in);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    throw;
  }
  throw Error(ErrorCode::ParseError, "unsupported mesh format '" + ext + "'");
}

void write_obj(const Mesh& mesh, std::ostream& out) {
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

void write_binary_stl(const Mesh& mesh, std::ostream& out) {
  char header[80] = {};
  std::memcpy(header, "tdlfd binary stl", 16);
  out.write(header, 80);
  const auto count = static_cast<std::uint32_t>(mesh.triangles.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
    const Vec3 n = (b - a).cross(c - a).normalized();
    float rec[12];
    for (int k = 0; k < 3; ++k) {
      rec[k] = static_cast<float>(n[k]);
      rec[3 + k] = static_cast<float>(a[k]);
      rec[6 + k] = static_cast<float>(b[k]);
      rec[9 + k] = static_cast<float>(c[k]);
    }
    out.write(reinterpret_cast<const char*>(rec), sizeof rec);
    const std::uint16_t attr = 0;
    out.write(reinterpret_cast<const char*>(&attr), 2);
  }
}

// Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

Vec3 project_to_surface(const Mesh& mesh, const Vec3& p) {
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "cannot project onto an empty mesh");
  double best = std::numeric_limits<double>::infinity();
  Vec3 nearest = Vec3::Zero();
  for (const auto& t : mesh.triangles) {
    const Vec3 q = closest_point_on_triangle(p, mesh.vertices[static_cast<std::size_t>(t[0])],
                                             mesh.vertices[static_cast<std::size_t>(t[1])],
                                             mesh.vertices[static_cast<std::size_t>(t[2])]);
    const double d = (q - p).squaredNorm();
    if (d < best) {
      best = d;
      nearest = q;
    }
  }
  return nearest;
}

}  // namespace tdlfd
