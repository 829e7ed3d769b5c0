#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "tdlfd/kinematics.hpp"

namespace tdlfd {

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  /// Area-weighted surface centroid.
  Vec3 centroid() const;
  /// Bounding-box diagonal.
  double diameter() const;
};

/// Drops zero-area triangles; throws ParseError for out-of-range indices and
/// EmptyMesh when nothing is left.
void clean(Mesh& mesh);

/// Wavefront OBJ, ASCII STL or binary STL, chosen by extension and content.
Mesh load_mesh(const std::filesystem::path& path);
Mesh parse_obj(std::istream& in);
Mesh parse_stl(std::istream& in);

void write_obj(const Mesh& mesh, std::ostream& out);
void write_binary_stl(const Mesh& mesh, std::ostream& out);

/// Closest point on triangle abc to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Globally nearest surface point (linear scan). Throws EmptyMesh.
Vec3 project_to_surface(const Mesh& mesh, const Vec3& p);

}  // namespace tdlfd
