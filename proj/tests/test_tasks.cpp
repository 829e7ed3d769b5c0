#include <fstream>
#include <numbers>

#include <doctest.h>

#include "helpers.hpp"
#include "tdlfd/error.hpp"
#include "tdlfd/ik.hpp"
#include "tdlfd/manifest.hpp"
#include "tdlfd/metrics.hpp"
#include "tdlfd/tasks.hpp"

using namespace tdlfd;

namespace {

double distance_to_mesh(const Mesh& m, const Vec3& p) { return (project_to_surface(m, p) - p).norm(); }

bool inside(double v, double lo, double hi) { return v >= lo && v <= hi; }

}  // namespace

TEST_SUITE("tasks") {

TEST_CASE("shipped task files load and validate") {
  for (const char* name : {"eight", "double_sphere", "anatomy"}) {
    const TaskDef t = testing::task(name);
    CHECK_NOTHROW(validate(t));
    CHECK(t.waypoints == 50);
    CHECK(t.noise == 0.002);
    CHECK_FALSE(t.robot.empty());
  }
  CHECK(testing::task("eight").eight.width.lo == 0.01);
  CHECK(testing::task("eight").eight.width.hi == 0.04);
  CHECK(testing::task("eight").eight.height.hi == 0.04);
}

TEST_CASE("task JSON round trip and validation") {
  const TaskDef t = testing::task("double_sphere");
  const TaskDef back = task_from_json(task_to_json(t));
  CHECK(task_to_json(back) == task_to_json(t));
  TaskDef bad = t;
  bad.sphere.radius = {0.03, 0.01};
  CHECK_THROWS_AS(validate(bad), Error);
  CHECK_THROWS_AS(task_from_json(nlohmann::json::parse(R"({"variant": "eight_plane"})")), Error);
  CHECK_THROWS_AS(task_from_json(nlohmann::json::parse(R"({"variant": "banana"})")), Error);
}

TEST_CASE("contexts are drawn inside the declared ranges") {
  for (const char* name : {"eight", "double_sphere", "anatomy"}) {
    const TaskDef t = testing::task(name);
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
      const ContextVector c = sample_context(t, rng);
      CHECK(c.schema == t.variant);
      CHECK(c.values[c.values.size() - 1] == 1.0);
      switch (t.variant) {
        case Schema::eight_plane:
          for (int k = 0; k < 3; ++k) CHECK(inside(c.values[k], t.eight.p_ref_min[k], t.eight.p_ref_max[k]));
          CHECK(inside(c.values[3], t.eight.width.lo, t.eight.width.hi));
          CHECK(inside(c.values[4], t.eight.height.lo, t.eight.height.hi));
          break;
        case Schema::double_sphere:
          for (int k = 0; k < 3; ++k) CHECK(inside(c.values[k], t.sphere.p_ref_min[k], t.sphere.p_ref_max[k]));
          CHECK(inside(c.values[3], t.sphere.radius.lo, t.sphere.radius.hi));
          CHECK(inside(c.values[4], t.sphere.radius.lo, t.sphere.radius.hi));
          break;
        default:
          for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(c.values[k] - t.anatomy.nominal_p_ref[k]) <= t.anatomy.perturbation);
          }
          CHECK(inside(c.values[3], t.anatomy.scale.lo, t.anatomy.scale.hi));
      }
    }
  }
}

TEST_CASE("eight oracle hand values") {
  const ContextVector c = make_context(Schema::eight_plane, {0.01, 0.12, 0.1, 0.02, 0.04});
  const auto e = oracle_eight(c, 9);  // t = k pi / 4
  REQUIRE(e.size() == 9);
  CHECK(e.front() == c.p_ref());
  CHECK(e.back() == c.p_ref());
  CHECK((e[2] - Vec3(0.01, 0.12, 0.12)).norm() <= 1e-15);  // t = pi/2: sin 2t = 0, sin t = 1
  CHECK((e[1] - Vec3(0.02, 0.12, 0.1 + 0.02 * std::sin(std::numbers::pi / 4))).norm() <= 1e-15);
  CHECK((e[6] - Vec3(0.01, 0.12, 0.08)).norm() <= 1e-15);
  for (const auto& p : e) CHECK(p.y() == 0.12);
  CHECK_THROWS_AS(oracle_eight(make_context(Schema::anatomy, {0, 0, 0, 1}), 9), Error);
}

TEST_CASE("sphere oracle stays on the two spheres and starts at p_ref") {
  Rng rng(5);
  const TaskDef t = testing::task("double_sphere");
  for (int trial = 0; trial < 20; ++trial) {
    const ContextVector c = sample_context(t, rng);
    const SpherePair s = sphere_pair(c);
    CHECK((s.upper_center - c.p_ref()).norm() == doctest::Approx(s.upper_radius));
    CHECK((s.upper_center - s.lower_center).norm() == doctest::Approx(s.upper_radius + s.lower_radius));
    CHECK(s.lower_center.z() < s.upper_center.z());
    const auto pts = oracle_double_sphere(c, 51);
    REQUIRE(pts.size() == 51);
    CHECK(pts.front() == c.p_ref());
    for (const auto& p : pts) {
      const double d1 = std::abs((p - s.upper_center).norm() - s.upper_radius);
      const double d2 = std::abs((p - s.lower_center).norm() - s.lower_radius);
      CHECK(std::min(d1, d2) <= 1e-12);
    }
  }
}

TEST_CASE("equal radii give a mirror-symmetric sphere path") {
  const ContextVector c = make_context(Schema::double_sphere, {0.0, 0.1, 0.14, 0.02, 0.02});
  const SpherePair s = sphere_pair(c);
  const double plane = 0.5 * (s.upper_center.z() + s.lower_center.z());
  const auto pts = oracle_double_sphere(c, 41);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3& a = pts[i];
    const Vec3& b = pts[pts.size() - 1 - i];
    CHECK((Vec3(a.x(), a.y(), 2 * plane - a.z()) - b).norm() <= 1e-12);
  }
}

TEST_CASE("anatomy oracle: on the mesh, palindrome, frozen nominal fixture") {
  const TaskDef t = testing::task("anatomy");
  const Mesh mesh = load_mesh(t.anatomy.mesh_path);
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const ContextVector c = sample_context(t, rng);
    const Mesh placed = place_anatomy(mesh, c);
    CHECK((placed.centroid() - c.p_ref()).norm() <= 1e-12);
    const auto pts = oracle_anatomy(c, mesh, t.anatomy, 20);
    REQUIRE(pts.size() == 39);
    for (const auto& p : pts) CHECK(distance_to_mesh(placed, p) <= 1e-6);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(pts[i] == pts[pts.size() - 1 - i]);
  }

  std::ifstream in(testing::fixture("nominal_diamond.json"));
  const auto doc = nlohmann::json::parse(in);
  const auto v = doc.at("context").get<std::vector<double>>();
  const ContextVector nominal = make_context(Schema::anatomy, {v[0], v[1], v[2], v[3]});
  CHECK(nominal.p_ref() == t.anatomy.nominal_p_ref);
  const auto pts = oracle_anatomy(nominal, mesh, t.anatomy, doc.at("count").get<std::size_t>());
  const auto& frozen = doc.at("points");
  REQUIRE(pts.size() == frozen.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i] == Vec3(frozen[i][0].get<double>(), frozen[i][1].get<double>(), frozen[i][2].get<double>()));
  }
}

TEST_CASE("anatomy oracle fails when the diamond is far outside the mesh") {
  TaskDef t = testing::task("anatomy");
  const Mesh mesh = load_mesh(t.anatomy.mesh_path);
  t.anatomy.diamond_offset = Vec3(0.0, 0.0, 5.0);
  const ContextVector c = make_context(Schema::anatomy, {0.0, 0.0, 0.12, 1.0});
  try {
    oracle_anatomy(c, mesh, t.anatomy, 10);
    FAIL("expected ProjectionFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProjectionFailure);
  }
}

TEST_CASE("humanize: identity at zero, pinned ends, bounded by the amplitude") {
  const ContextVector c = make_context(Schema::eight_plane, {0.0, 0.12, 0.1, 0.03, 0.03});
  const auto clean = oracle_eight(c, 50);
  Rng rng(1);
  CHECK(humanize(clean, {0.0, 3}, rng) == clean);
  double largest = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const auto noisy = humanize(clean, {0.002, 3}, rng);
    CHECK(noisy.front() == clean.front());
    CHECK(noisy.back() == clean.back());
    for (std::size_t i = 0; i < clean.size(); ++i) largest = std::max(largest, (noisy[i] - clean[i]).norm());
  }
  CHECK(largest <= 0.002 * (1 + 1e-12));
  CHECK(largest >= 0.0015);
}

TEST_CASE("snapping FK-generated points barely moves them and is idempotent") {
  const RobotSpec robot = testing::eight_robot();
  std::mt19937_64 rng(6);
  Config a = testing::random_config(robot, rng);
  const Config b = testing::random_config(robot, rng);
  std::vector<Vec3> pts;
  for (int i = 0; i <= 10; ++i) {
    Config c = a;
    c.tensions = a.tensions + (b.tensions - a.tensions) * (i / 10.0);
    pts.push_back(forward_tip(robot, c));
  }
  const SnapResult once = snap_to_reachable(robot, pts, IkSettings{});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK((once.trajectory[i] - pts[i]).norm() < 1e-4);
    CHECK(once.residuals[i] == doctest::Approx((once.trajectory[i] - pts[i]).norm()).epsilon(1e-9));
  }
  IkSettings tight;
  tight.tol = 1e-9;
  tight.max_iters = 1000;
  const SnapResult tight_once = snap_to_reachable(robot, pts, tight);
  const SnapResult twice = snap_to_reachable(robot, tight_once.trajectory, tight);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK((twice.trajectory[i] - tight_once.trajectory[i]).norm() <= 1e-6);

  const std::vector<Vec3> far{Vec3(0.0, 0.0, 0.45)};
  const SnapResult snapped = snap_to_reachable(robot, far, IkSettings{});
  CHECK(snapped.residuals[0] == doctest::Approx((snapped.trajectory[0] - far[0]).norm()));
  CHECK(snapped.residuals[0] > 0.2);
}

TEST_CASE("datasets: deterministic, feasible, identical serial and parallel") {
  const RobotSpec robot = testing::eight_robot();
  const TaskDef t = testing::task("eight");
  DatasetOptions opt;
  opt.count = 6;
  opt.seed = 42;
  const auto a = generate_dataset(t, robot, opt, IkSettings{});
  opt.exec = Exec::parallel;
  const auto b = generate_dataset(t, robot, opt, IkSettings{});
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(demo_to_json(a[i]) == demo_to_json(b[i]));
    CHECK(a[i].trajectory.size() == 50);
    CHECK(a[i].meta.seed == stream_seed(42, i));
    // the recorded curve is made of reachable tips
    const ConfigTrajectory resolve = plan_config_trajectory(robot, a[i].trajectory, home_config(robot), IkSettings{});
    CHECK(resolve.mean_residual() < 1e-4);
  }
  opt.seed = 43;
  CHECK(demo_to_json(generate_dataset(t, robot, opt, IkSettings{})[0]) != demo_to_json(a[0]));

  const Demonstration one = demonstrate(t, robot, a[2].context, 50, opt.noise, 77, IkSettings{});
  const Demonstration two = demonstrate(t, robot, a[2].context, 50, opt.noise, 77, IkSettings{});
  CHECK(one.trajectory == two.trajectory);
  CHECK(one.context.values == a[2].context.values);
  CHECK_THROWS_AS(generate_dataset(t, robot, DatasetOptions{0}, IkSettings{}), Error);
}

TEST_CASE("anatomy and sphere datasets generate") {
  const RobotSpec robot = testing::anatomy_robot();
  const TaskDef t = testing::task("anatomy");
  const Mesh mesh = load_mesh(t.anatomy.mesh_path);
  DatasetOptions opt;
  opt.count = 2;
  const auto demos = generate_dataset(t, robot, opt, IkSettings{}, &mesh);
  CHECK(demos.size() == 2);
  CHECK(demos[0].context.schema == Schema::anatomy);
  CHECK_THROWS_AS(generate_dataset(t, robot, opt, IkSettings{}, nullptr), Error);

  const auto spheres = generate_dataset(testing::task("double_sphere"), testing::eight_robot(), opt, IkSettings{});
  CHECK(spheres[1].trajectory.size() == 50);
}

TEST_CASE("demonstration store round trip, append and line-numbered errors") {
  const RobotSpec robot = testing::eight_robot();
  DatasetOptions opt;
  opt.count = 3;
  const auto demos = generate_dataset(testing::task("eight"), robot, opt, IkSettings{});
  testing::TempDir dir("store");
  write_store(dir / "s.jsonl", demos);
  auto back = load_store(dir / "s.jsonl");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].trajectory == demos[i].trajectory);
    CHECK(back[i].context.values == demos[i].context.values);
    CHECK(back[i].meta.seed == demos[i].meta.seed);
  }
  Demonstration teleop = demos[0];
  teleop.meta.source = DemoSource::teleop;
  teleop.meta.session = "session-7";
  append_to_store(dir / "s.jsonl", teleop);
  back = load_store(dir / "s.jsonl");
  REQUIRE(back.size() == 4);
  CHECK(back[3].meta.source == DemoSource::teleop);
  CHECK(back[3].meta.session == "session-7");

  {
    std::ofstream out(dir / "s.jsonl", std::ios::app);
    out << "{\"task\": \"eight_plane\"}\n";
  }
  try {
    load_store(dir / "s.jsonl");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
  CHECK_THROWS_AS(load_store(dir / "nope.jsonl"), Error);
}

TEST_CASE("reachability spot checks pass for the shipped presets") {
  const IkSettings ik;
  CHECK(check_reachability(testing::task("eight"), testing::eight_robot(), ik).max_residual < 1e-3);
  const TaskDef anatomy = testing::task("anatomy");
  const Mesh mesh = load_mesh(anatomy.anatomy.mesh_path);
  CHECK(check_reachability(anatomy, testing::anatomy_robot(), ik, &mesh).max_residual < 1e-3);
}

}  // TEST_SUITE
