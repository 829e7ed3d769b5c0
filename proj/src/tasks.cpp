#include "tdlfd/tasks.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "tdlfd/error.hpp"
#include "tdlfd/metrics.hpp"

namespace tdlfd {

namespace {

using nlohmann::json;

constexpr double kPi = std::numbers::pi;

// Uniform on the open interval (lo, hi) for a nonempty range.
double uniform_open(Rng& rng, const Range& r) {
  std::uniform_real_distribution<double> u(r.lo, r.hi);
  double v = u(rng);
  while (v <= r.lo && r.hi > r.lo) v = u(rng);
  return v;
}

Vec3 uniform_box(Rng& rng, const Vec3& lo, const Vec3& hi) {
  Vec3 p;
  for (int k = 0; k < 3; ++k) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    p[k] = lo[k] + u(rng) * (hi[k] - lo[k]);
  }
  return p;
}

void require_schema(const ContextVector& c, Schema s) {
  validate(c);
  if (c.schema != s) {
    throw Error(ErrorCode::SchemaMismatch, "expected " + std::string(to_string(s)) + " context, got " +
                                               std::string(to_string(c.schema)));
  }
}

Vec3 vec3_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw Error(ErrorCode::ParseError, "expected a 3-vector");
  return {v[0], v[1], v[2]};
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Range range_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw Error(ErrorCode::ParseError, "expected a [lo, hi] range");
  return {v[0], v[1]};
}

json range_to_json(const Range& r) { return json::array({r.lo, r.hi}); }

Vec3 sphere_point(const Vec3& center, double radius, double lat, double lon) {
  const Vec3 front(0.0, -1.0, 0.0);
  const Vec3 east(1.0, 0.0, 0.0);
  const Vec3 up(0.0, 0.0, 1.0);
  return center + radius * (std::cos(lat) * std::cos(lon) * front + std::cos(lat) * std::sin(lon) * east +
                            std::sin(lat) * up);
}

double sweep_longitude(double t) { return 0.5 * kPi * std::sin(0.5 * kPi * t); }

Demonstration build_demo(const TaskDef& task, const RobotSpec& robot, const ContextVector& context, Rng& rng,
                         std::size_t waypoints, double noise, const IkSettings& ik, const Mesh* mesh) {
  const std::vector<Vec3> target = oracle_curve(task, context, mesh, waypoints);
  const std::vector<Vec3> noisy = humanize(target, HumanizeNoise{noise, 3}, rng);
  SnapResult snapped = snap_to_reachable(robot, noisy, ik);
  Demonstration demo;
  demo.context = context;
  demo.trajectory = resample_arclength(snapped.trajectory, waypoints);
  demo.meta.task = task.variant;
  demo.meta.source = DemoSource::synthetic;
  double sum = 0.0;
  for (double r : snapped.residuals) sum += r;
  demo.meta.snap_residual = sum / static_cast<double>(snapped.residuals.size());
  return demo;
}

}  // namespace

void validate(const TaskDef& task) {
  auto check_range = [](const Range& r, const char* what) {
    if (!(r.hi > r.lo)) throw Error(ErrorCode::InvalidSpec, std::string(what) + " range is empty");
  };
  if (task.waypoints < 3) throw Error(ErrorCode::InvalidSpec, "tasks need at least 3 waypoints");
  if (!(task.noise >= 0.0)) throw Error(ErrorCode::InvalidSpec, "noise amplitude must be non-negative");
  switch (task.variant) {
    case Schema::eight_plane:
      check_range(task.eight.width, "width");
      check_range(task.eight.height, "height");
      break;
    case Schema::double_sphere:
      check_range(task.sphere.radius, "radius");
      if (!(task.sphere.radius.lo > 0.0)) throw Error(ErrorCode::InvalidSpec, "radii must be positive");
      break;
    case Schema::anatomy:
      check_range(task.anatomy.scale, "scale");
      if (!(task.anatomy.scale.lo > 0.0)) throw Error(ErrorCode::InvalidSpec, "scale must be positive");
      if (!(task.anatomy.perturbation >= 0.0)) throw Error(ErrorCode::InvalidSpec, "perturbation must be >= 0");
      break;
    case Schema::generic:
      throw Error(ErrorCode::InvalidSpec, "task variant must be eight_plane, double_sphere or anatomy");
  }
}

TaskDef task_from_json(const json& doc, const std::filesystem::path& base_dir) {
  TaskDef task;
  try {
    task.variant = schema_from_string(doc.at("variant").get<std::string>());
    task.name = doc.value("name", std::string(to_string(task.variant)));
    task.robot = doc.value("robot", std::string());
    if (!task.robot.empty() && !base_dir.empty() && std::filesystem::is_regular_file(base_dir / task.robot)) {
      task.robot = (base_dir / task.robot).string();
    }
    task.noise = doc.value("noise", task.noise);
    task.waypoints = doc.value("waypoints", task.waypoints);
    switch (task.variant) {
      case Schema::eight_plane:
        task.eight.p_ref_min = vec3_from_json(doc.at("p_ref_min"));
        task.eight.p_ref_max = vec3_from_json(doc.at("p_ref_max"));
        task.eight.width = range_from_json(doc.at("w_range"));
        task.eight.height = range_from_json(doc.at("h_range"));
        break;
      case Schema::double_sphere:
        task.sphere.p_ref_min = vec3_from_json(doc.at("p_ref_min"));
        task.sphere.p_ref_max = vec3_from_json(doc.at("p_ref_max"));
        task.sphere.radius = range_from_json(doc.at("radius_range"));
        break;
      case Schema::anatomy: {
        std::filesystem::path mesh = doc.at("mesh").get<std::string>();
        task.anatomy.mesh_path = mesh.is_absolute() || base_dir.empty() ? mesh : base_dir / mesh;
        task.anatomy.nominal_p_ref = vec3_from_json(doc.at("nominal_p_ref"));
        task.anatomy.perturbation = doc.value("perturbation", task.anatomy.perturbation);
        task.anatomy.scale = range_from_json(doc.at("scale_range"));
        if (doc.contains("diamond_offset")) task.anatomy.diamond_offset = vec3_from_json(doc["diamond_offset"]);
        task.anatomy.diamond_half_width = doc.value("diamond_half_width", task.anatomy.diamond_half_width);
        break;
      }
      case Schema::generic:
        break;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("task file: ") + e.what());
  }
  validate(task);
  return task;
}

json task_to_json(const TaskDef& task) {
  json doc{{"variant", std::string(to_string(task.variant))},
           {"name", task.name},
           {"robot", task.robot},
           {"noise", task.noise},
           {"waypoints", task.waypoints}};
  switch (task.variant) {
    case Schema::eight_plane:
      doc["p_ref_min"] = vec3_to_json(task.eight.p_ref_min);
      doc["p_ref_max"] = vec3_to_json(task.eight.p_ref_max);
      doc["w_range"] = range_to_json(task.eight.width);
      doc["h_range"] = range_to_json(task.eight.height);
      break;
    case Schema::double_sphere:
      doc["p_ref_min"] = vec3_to_json(task.sphere.p_ref_min);
      doc["p_ref_max"] = vec3_to_json(task.sphere.p_ref_max);
      doc["radius_range"] = range_to_json(task.sphere.radius);
      break;
    case Schema::anatomy:
      doc["mesh"] = task.anatomy.mesh_path.string();
      doc["nominal_p_ref"] = vec3_to_json(task.anatomy.nominal_p_ref);
      doc["perturbation"] = task.anatomy.perturbation;
      doc["scale_range"] = range_to_json(task.anatomy.scale);
      doc["diamond_offset"] = vec3_to_json(task.anatomy.diamond_offset);
      doc["diamond_half_width"] = task.anatomy.diamond_half_width;
      break;
    case Schema::generic:
      break;
  }
  return doc;
}

TaskDef load_task(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open task file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return task_from_json(doc, path.parent_path());
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the (seed, index) pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ContextVector sample_context(const TaskDef& task, Rng& rng) {
  switch (task.variant) {
    case Schema::eight_plane: {
      const Vec3 p = uniform_box(rng, task.eight.p_ref_min, task.eight.p_ref_max);
      const double w = uniform_open(rng, task.eight.width);
      const double h = uniform_open(rng, task.eight.height);
      return make_context(Schema::eight_plane, {p.x(), p.y(), p.z(), w, h});
    }
    case Schema::double_sphere: {
      const Vec3 p = uniform_box(rng, task.sphere.p_ref_min, task.sphere.p_ref_max);
      const double r1 = uniform_open(rng, task.sphere.radius);
      const double r2 = uniform_open(rng, task.sphere.radius);
      return make_context(Schema::double_sphere, {p.x(), p.y(), p.z(), r1, r2});
    }
    case Schema::anatomy: {
      const double d = task.anatomy.perturbation;
      const Vec3 p = task.anatomy.nominal_p_ref + uniform_box(rng, Vec3::Constant(-d), Vec3::Constant(d));
      const double s = uniform_open(rng, task.anatomy.scale);
      return make_context(Schema::anatomy, {p.x(), p.y(), p.z(), s});
    }
    case Schema::generic:
      break;
  }
  throw Error(ErrorCode::SchemaMismatch, "cannot sample a generic context");
}

std::vector<Vec3> oracle_eight(const ContextVector& context, std::size_t count) {
  require_schema(context, Schema::eight_plane);
  if (count < 2) throw Error(ErrorCode::DegenerateInput, "need at least two samples");
  const Vec3 p_ref = context.p_ref();
  const double half_w = 0.5 * context.values[3];
  const double half_h = 0.5 * context.values[4];
  std::vector<Vec3> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = p_ref + Vec3(half_w * std::sin(2.0 * t), 0.0, half_h * std::sin(t));
  }
  out.front() = p_ref;
  out.back() = p_ref;
  return out;
}

SpherePair sphere_pair(const ContextVector& context) {
  require_schema(context, Schema::double_sphere);
  const Vec3 p_ref = context.p_ref();
  const double r1 = context.values[3];
  const double r2 = context.values[4];
  const Vec3 c1 = p_ref + Vec3(0.0, r1, 0.0);
  return {c1, r1, c1 - Vec3(0.0, 0.0, r1 + r2), r2};
}

std::vector<Vec3> oracle_double_sphere(const ContextVector& context, std::size_t count) {
  const SpherePair s = sphere_pair(context);
  if (count < 3) throw Error(ErrorCode::DegenerateInput, "need at least three samples");
  const std::size_t upper = (count + 1) / 2;
  const std::size_t lower = count - upper;
  std::vector<Vec3> out;
  out.reserve(count);
  for (std::size_t i = 0; i < upper; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(upper - 1);
    out.push_back(sphere_point(s.upper_center, s.upper_radius, -0.5 * kPi * t, sweep_longitude(t)));
  }
  for (std::size_t j = 1; j <= lower; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(lower);
    out.push_back(sphere_point(s.lower_center, s.lower_radius, 0.5 * kPi * (1.0 - t), sweep_longitude(1.0 - t)));
  }
  out.front() = context.p_ref();
  return out;
}

Mesh place_anatomy(const Mesh& mesh, const ContextVector& context) {
  require_schema(context, Schema::anatomy);
  const Vec3 anchor = mesh.centroid();
  const Vec3 p_ref = context.p_ref();
  const double s = context.values[3];
  Mesh placed = mesh;
  for (auto& v : placed.vertices) v = p_ref + s * (v - anchor);
  return placed;
}

std::vector<Vec3> oracle_anatomy(const ContextVector& context, const Mesh& mesh, const AnatomyTask& task,
                                 std::size_t count) {
  if (count < 2) throw Error(ErrorCode::DegenerateInput, "need at least two samples");
  const Mesh placed = place_anatomy(mesh, context);
  const Vec3 centre = context.p_ref() + task.diamond_offset;
  const double a = task.diamond_half_width;
  const std::array<Vec3, 5> corners{centre + Vec3(a, 0, 0), centre + Vec3(0, a, 0), centre + Vec3(-a, 0, 0),
                                    centre + Vec3(0, -a, 0), centre + Vec3(a, 0, 0)};
  const double bound = placed.diameter();
  std::vector<Vec3> forward(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = 4.0 * static_cast<double>(i) / static_cast<double>(count - 1);
    const auto edge = std::min<std::size_t>(static_cast<std::size_t>(u), 3);
    const double f = u - static_cast<double>(edge);
    const Vec3 p = corners[edge] + f * (corners[edge + 1] - corners[edge]);
    const Vec3 q = project_to_surface(placed, p);
    if ((q - p).norm() > bound) {
      throw Error(ErrorCode::ProjectionFailure, "diamond point lies farther than the mesh diameter from the surface");
    }
    forward[i] = q;
  }
  std::vector<Vec3> out = forward;
  for (std::size_t i = count - 1; i-- > 0;) out.push_back(forward[i]);
  return out;
}

std::vector<Vec3> humanize(const std::vector<Vec3>& points, const HumanizeNoise& noise, Rng& rng) {
  if (!(noise.amplitude >= 0.0)) throw Error(ErrorCode::DegenerateInput, "noise amplitude must be >= 0");
  const int comps = std::clamp(noise.components, 1, 3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> magnitude(0.5, 1.0);

  // Same draws whatever the amplitude.
  const double mag = noise.amplitude * magnitude(rng);
  std::array<std::array<double, 3>, 3> coeff{};
  std::array<std::array<double, 3>, 3> phase{};
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < comps; ++k) {
      coeff[axis][k] = unit(rng);
      phase[axis][k] = phase_dist(rng);
    }
  }
  if (noise.amplitude == 0.0 || points.size() < 3) return points;

  const std::size_t n = points.size();
  std::vector<Vec3> offset(n, Vec3::Zero());
  double peak = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n - 1);
    const double envelope = std::sin(kPi * u);
    for (int axis = 0; axis < 3; ++axis) {
      for (int k = 0; k < comps; ++k) {
        offset[i][axis] += coeff[axis][k] * std::sin(kPi * (k + 1) * u + phase[axis][k]);
      }
    }
    offset[i] *= envelope;
    peak = std::max(peak, offset[i].norm());
  }
  std::vector<Vec3> out = points;
  if (!(peak > 0.0)) return out;
  // The largest displacement along the curve equals the drawn magnitude.
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] += (mag / peak) * offset[i];
  return out;
}

SnapResult snap_to_reachable(const RobotSpec& robot, const std::vector<Vec3>& points, const IkSettings& ik) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "nothing to snap");
  ConfigTrajectory plan = plan_config_trajectory(robot, points, home_config(robot), ik);
  return {std::move(plan.tips), std::move(plan.residuals), std::move(plan.waypoints)};
}

std::vector<Vec3> oracle_curve(const TaskDef& task, const ContextVector& context, const Mesh* mesh,
                               std::size_t count) {
  switch (task.variant) {
    case Schema::eight_plane:
      return oracle_eight(context, count);
    case Schema::double_sphere:
      return oracle_double_sphere(context, count);
    case Schema::anatomy:
      if (mesh == nullptr) throw Error(ErrorCode::EmptyMesh, "anatomy task needs a mesh");
      return oracle_anatomy(context, *mesh, task.anatomy, count);
    case Schema::generic:
      break;
  }
  throw Error(ErrorCode::SchemaMismatch, "no oracle for a generic task");
}

std::vector<Demonstration> generate_dataset(const TaskDef& task, const RobotSpec& robot,
                                            const DatasetOptions& options, const IkSettings& ik,
                                            const Mesh* mesh) {
  validate(task);
  if (options.count < 1) throw Error(ErrorCode::EmptyInput, "dataset needs at least one demonstration");
  std::vector<Demonstration> demos(options.count);
  IkSettings inner = ik;
  inner.exec = Exec::serial;
  auto make = [&](std::ptrdiff_t i) {
    const auto u = static_cast<std::size_t>(i);
    const std::uint64_t seed = stream_seed(options.seed, u);
    Rng rng(seed);
    const ContextVector context = sample_context(task, rng);
    demos[u] = build_demo(task, robot, context, rng, options.waypoints, options.noise, inner, mesh);
    demos[u].meta.seed = seed;
  };
  const auto n = static_cast<std::ptrdiff_t>(options.count);
  if (options.exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) make(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) make(i);
  }
  return demos;
}

Demonstration demonstrate(const TaskDef& task, const RobotSpec& robot, const ContextVector& context,
                          std::size_t waypoints, double noise, std::uint64_t seed, const IkSettings& ik,
                          const Mesh* mesh) {
  Rng rng(seed);
  Demonstration demo = build_demo(task, robot, context, rng, waypoints, noise, ik, mesh);
  demo.meta.seed = seed;
  return demo;
}

TrainingSet to_training_set(const std::vector<Demonstration>& demos) {
  TrainingSet data;
  if (!demos.empty()) data.schema = demos.front().context.schema;
  for (const auto& d : demos) {
    data.contexts.push_back(d.context);
    data.trajectories.push_back(d.trajectory);
  }
  return data;
}

json demo_to_json(const Demonstration& demo) {
  json waypoints = json::array();
  for (const auto& p : demo.trajectory) waypoints.push_back(vec3_to_json(p));
  json meta{{"source", demo.meta.source == DemoSource::synthetic ? "synthetic" : "teleop"},
            {"snap_residual", demo.meta.snap_residual}};
  if (demo.meta.source == DemoSource::synthetic) {
    meta["seed"] = demo.meta.seed;
  } else {
    meta["session"] = demo.meta.session;
  }
  if (!demo.meta.manifest.empty()) meta["manifest"] = demo.meta.manifest;
  return {{"task", std::string(to_string(demo.context.schema))},
          {"context", std::vector<double>(demo.context.values.data(),
                                          demo.context.values.data() + demo.context.values.size())},
          {"waypoints", std::move(waypoints)},
          {"meta", std::move(meta)}};
}

Demonstration demo_from_json(const json& doc) {
  Demonstration demo;
  try {
    const Schema schema = schema_from_string(doc.at("task").get<std::string>());
    const auto values = doc.at("context").get<std::vector<double>>();
    demo.context.schema = schema;
    demo.context.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    validate(demo.context);
    for (const auto& p : doc.at("waypoints")) demo.trajectory.push_back(vec3_from_json(p));
    if (demo.trajectory.size() < 2) throw Error(ErrorCode::ParseError, "demonstration needs >= 2 waypoints");
    demo.meta.task = schema;
    const json meta = doc.value("meta", json::object());
    demo.meta.source = meta.value("source", "synthetic") == "teleop" ? DemoSource::teleop : DemoSource::synthetic;
    demo.meta.seed = meta.value("seed", std::uint64_t{0});
    demo.meta.session = meta.value("session", "");
    demo.meta.snap_residual = meta.value("snap_residual", 0.0);
    demo.meta.manifest = meta.value("manifest", "");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("demonstration record: ") + e.what());
  }
  return demo;
}

void write_store(const std::filesystem::path& path, const std::vector<Demonstration>& demos) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write demonstration store " + path.string());
  for (const auto& d : demos) out << demo_to_json(d).dump() << '\n';
}

void append_to_store(const std::filesystem::path& path, const Demonstration& demo) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to demonstration store " + path.string());
  out << demo_to_json(demo).dump() << '\n';
}

std::vector<Demonstration> load_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open demonstration store " + path.string());
  std::vector<Demonstration> demos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      demos.push_back(demo_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return demos;
}

ReachabilityCheck check_reachability(const TaskDef& task, const RobotSpec& robot, const IkSettings& ik,
                                     const Mesh* mesh) {
  ReachabilityCheck out;
  auto corners = [&](const Vec3& lo, const Vec3& hi) {
    for (int mask = 0; mask < 8; ++mask) {
      out.probes.emplace_back(mask & 1 ? hi.x() : lo.x(), mask & 2 ? hi.y() : lo.y(), mask & 4 ? hi.z() : lo.z());
    }
    out.probes.push_back(0.5 * (lo + hi));
  };
  switch (task.variant) {
    case Schema::eight_plane:
      corners(task.eight.p_ref_min, task.eight.p_ref_max);
      break;
    case Schema::double_sphere:
      corners(task.sphere.p_ref_min, task.sphere.p_ref_max);
      break;
    case Schema::anatomy: {
      if (mesh == nullptr) throw Error(ErrorCode::EmptyMesh, "anatomy task needs a mesh");
      const Vec3 p = task.anatomy.nominal_p_ref;
      const ContextVector nominal = make_context(Schema::anatomy, {p.x(), p.y(), p.z(), 1.0});
      const auto curve = oracle_anatomy(nominal, *mesh, task.anatomy, 9);
      out.probes.assign(curve.begin(), curve.begin() + 9);
      break;
    }
    case Schema::generic:
      break;
  }
  for (const auto& p : out.probes) {
    const double r = solve_ik(robot, home_config(robot), p, ik).residual;
    out.residuals.push_back(r);
    out.max_residual = std::max(out.max_residual, r);
  }
  return out;
}

}  // namespace tdlfd
