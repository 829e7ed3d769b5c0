#include <fstream>
#include <sstream>

#include <doctest.h>

#include "helpers.hpp"
#include "tdlfd/error.hpp"
#include "tdlfd/mesh.hpp"

using namespace tdlfd;

TEST_SUITE("mesh") {

TEST_CASE("tetrahedron fixture loads") {
  const Mesh m = load_mesh(testing::fixture("tetrahedron.obj"));
  CHECK(m.vertices.size() == 4);
  CHECK(m.triangles.size() == 4);
  CHECK(m.diameter() == doctest::Approx(std::sqrt(3.0)));
  // three unit right triangles (area 1/2) and one equilateral face (area sqrt(3)/2)
  const double a = 0.5, e = std::sqrt(3.0) / 2.0;
  const Vec3 expected = (a * Vec3(1, 1, 0) / 3.0 + a * Vec3(1, 0, 1) / 3.0 + a * Vec3(0, 1, 1) / 3.0 +
                         e * Vec3(1, 1, 1) / 3.0) / (3 * a + e);
  CHECK((m.centroid() - expected).norm() <= 1e-15);
}

TEST_CASE("nearest points on the tetrahedron by hand") {
  const Mesh m = load_mesh(testing::fixture("tetrahedron.obj"));
  CHECK((project_to_surface(m, {10, 0, 0}) - Vec3(1, 0, 0)).norm() <= 1e-15);
  CHECK((project_to_surface(m, {1, 1, 1}) - Vec3(1, 1, 1) / 3.0).norm() <= 1e-15);
  CHECK((project_to_surface(m, {0.2, 0.3, -2}) - Vec3(0.2, 0.3, 0)).norm() <= 1e-15);
  CHECK((project_to_surface(m, {-1, -1, 0.5}) - Vec3(0, 0, 0.5)).norm() <= 1e-15);
  CHECK((project_to_surface(m, {2, 2, -1}) - Vec3(0.5, 0.5, 0)).norm() <= 1e-15);
  // interior point: nearest face is x = 0 at distance 0.1
  CHECK((project_to_surface(m, {0.1, 0.3, 0.3}) - Vec3(0, 0.3, 0.3)).norm() <= 1e-15);
}

TEST_CASE("a point on a face projects to itself") {
  const Mesh m = load_mesh(testing::fixture("tetrahedron.obj"));
  for (const Vec3& p : {Vec3(0.2, 0.3, 0.5), Vec3(0.1, 0.0, 0.4), Vec3(0.25, 0.25, 0.0)}) {
    CHECK((project_to_surface(m, p) - p).norm() <= 1e-15);
  }
}

TEST_CASE("closest point on a triangle covers every Voronoi region") {
  const Vec3 a(0, 0, 0), b(2, 0, 0), c(0, 2, 0);
  CHECK(closest_point_on_triangle({-1, -1, 3}, a, b, c) == a);
  CHECK(closest_point_on_triangle({3, -1, 0}, a, b, c) == b);
  CHECK(closest_point_on_triangle({-1, 3, 0}, a, b, c) == c);
  CHECK((closest_point_on_triangle({1, -1, 0}, a, b, c) - Vec3(1, 0, 0)).norm() <= 1e-15);
  CHECK((closest_point_on_triangle({-1, 1, 0}, a, b, c) - Vec3(0, 1, 0)).norm() <= 1e-15);
  CHECK((closest_point_on_triangle({2, 2, 0}, a, b, c) - Vec3(1, 1, 0)).norm() <= 1e-15);
  CHECK((closest_point_on_triangle({0.5, 0.5, 7}, a, b, c) - Vec3(0.5, 0.5, 0)).norm() <= 1e-15);
}

TEST_CASE("malformed OBJ names the offending line") {
  try {
    load_mesh(testing::fixture("malformed.obj"));
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  std::istringstream out_of_range("v 0 0 0\nv 1 0 0\nf 1 2 3\n");
  CHECK_THROWS_AS(parse_obj(out_of_range), Error);
  std::istringstream bad_vertex("v 0 zero 0\n");
  CHECK_THROWS_AS(parse_obj(bad_vertex), Error);
}

TEST_CASE("degenerate triangles are dropped; nothing left is EmptyMesh") {
  std::istringstream mixed("v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n");
  const Mesh m = parse_obj(mixed);
  CHECK(m.triangles.size() == 1);
  std::istringstream flat("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n");
  try {
    parse_obj(flat);
    FAIL("expected EmptyMesh");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMesh);
  }
  CHECK_THROWS_AS(project_to_surface(Mesh{}, Vec3::Zero()), Error);
}

TEST_CASE("OBJ polygons fan into triangles and negative indices resolve") {
  std::istringstream quad("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4/1 -3/2 -2/3 -1/4\n");
  const Mesh m = parse_obj(quad);
  CHECK(m.triangles.size() == 2);
}

TEST_CASE("binary and ASCII STL agree with OBJ") {
  const Mesh obj = load_mesh(testing::fixture("tetrahedron.obj"));
  testing::TempDir dir("stl");
  {
    std::ofstream out(dir / "t.stl", std::ios::binary);
    write_binary_stl(obj, out);
  }
  const Mesh bin = load_mesh(dir / "t.stl");
  CHECK(bin.vertices.size() == 4);
  CHECK(bin.triangles.size() == 4);
  CHECK(bin.centroid().isApprox(obj.centroid(), 1e-7));

  {
    std::ofstream out(dir / "a.stl");
    out << "solid t\n";
    for (const auto& t : obj.triangles) {
      out << "facet normal 0 0 0\nouter loop\n";
      for (int i : t) {
        const Vec3& v = obj.vertices[static_cast<std::size_t>(i)];
        out << "vertex " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
      }
      out << "endloop\nendfacet\n";
    }
    out << "endsolid t\n";
  }
  const Mesh ascii = load_mesh(dir / "a.stl");
  CHECK(ascii.vertices.size() == 4);
  CHECK(ascii.centroid().isApprox(obj.centroid(), 1e-15));

  {
    std::ofstream out(dir / "o.obj");
    write_obj(obj, out);
  }
  const Mesh again = load_mesh(dir / "o.obj");
  CHECK(again.vertices == obj.vertices);
  CHECK(again.triangles == obj.triangles);

  {
    std::ofstream out(dir / "short.stl", std::ios::binary);
    out << std::string(90, '\0');
  }
  CHECK_THROWS_AS(load_mesh(dir / "short.stl"), Error);
  CHECK_THROWS_AS(load_mesh(dir / "missing.obj"), Error);
  CHECK_THROWS_AS(load_mesh(testing::fixture("../helpers.hpp")), Error);
}

TEST_CASE("shipped cavity mesh is closed and loads in both formats") {
  const Mesh obj = load_mesh(testing::data_dir() / "meshes/pleural_cavity.obj");
  const Mesh stl = load_mesh(testing::data_dir() / "meshes/pleural_cavity.stl");
  CHECK(obj.triangles.size() == stl.triangles.size());
  CHECK(obj.centroid().isApprox(stl.centroid(), 1e-6));
  // every edge shared by exactly two triangles
  std::map<std::pair<int, int>, int> edges;
  for (const auto& t : obj.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)], b = t[static_cast<std::size_t>((k + 1) % 3)];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  }
  bool closed = true;
  for (const auto& [e, n] : edges) closed = closed && n == 2;
  CHECK(closed);
}

}  // TEST_SUITE
