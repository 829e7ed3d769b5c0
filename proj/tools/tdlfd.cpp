// tdlfd: demonstration generation, training, evaluation, execution and the
// teleoperation server.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tdlfd/error.hpp"
#include "tdlfd/manifest.hpp"
#include "tdlfd/metrics.hpp"
#include "tdlfd/tasks.hpp"
#include "tdlfd/teleop.hpp"

namespace {

using namespace tdlfd;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kExitCodes = R"(Exit codes:
  0  success
  1  other failure (evaluation/IK errors)
  2  bad arguments, malformed context, empty grid
  3  file errors (missing, unreadable or unparseable input, unwritable output)
  4  demonstration generation failure
  5  training failure (singular system, degenerate data)
  6  schema mismatch between model, demonstrations and task
  7  server bind failure

Named tasks, robots and models are looked up as given, then under
$TDLFD_DATA_PATH (colon separated) and the shipped data directory,
in the tasks/, robots/ and models/ subdirectories.)";

struct Exit {
  int code;
  std::string msg;
};

[[noreturn]] void fail(int code, const std::string& msg) { throw Exit{code, msg}; }

int exit_code(ErrorCode code, int fallback) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::ParseError:
    case ErrorCode::EmptyMesh:
    case ErrorCode::InvalidSpec:
      return 3;
    case ErrorCode::SchemaMismatch:
      return 6;
    case ErrorCode::BindFailure:
      return 7;
    case ErrorCode::IncompleteContext:
      return 2;
    default:
      return fallback;
  }
}

std::vector<double> parse_csv_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a == std::string::npos) fail(2, "empty field in '" + text + "'");
    const std::string field = item.substr(a, b - a + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      fail(2, "not a number: '" + field + "'");
    }
    if (used != field.size() || !std::isfinite(v)) fail(2, "not a number: '" + field + "'");
    out.push_back(v);
  }
  if (out.empty() || (!text.empty() && text.back() == ',')) fail(2, "malformed list '" + text + "'");
  return out;
}

// "2x128" or "128,64"
std::vector<int> parse_arch(const std::string& text) {
  std::vector<int> hidden;
  const auto x = text.find('x');
  try {
    if (x != std::string::npos) {
      std::size_t u1 = 0, u2 = 0;
      const int depth = std::stoi(text.substr(0, x), &u1);
      const int width = std::stoi(text.substr(x + 1), &u2);
      if (u1 != x || u2 != text.size() - x - 1 || depth < 1 || width < 1) throw std::invalid_argument(text);
      hidden.assign(static_cast<std::size_t>(depth), width);
    } else {
      for (double v : parse_csv_numbers(text)) {
        if (v < 1 || v != std::floor(v)) throw std::invalid_argument(text);
        hidden.push_back(static_cast<int>(v));
      }
    }
  } catch (const std::invalid_argument&) {
    fail(2, "bad architecture '" + text + "' (use DxW like 2x128, or widths like 128,64)");
  } catch (const std::out_of_range&) {
    fail(2, "bad architecture '" + text + "'");
  }
  return hidden;
}

std::string arch_label(const std::vector<int>& hidden) {
  const bool uniform = !hidden.empty() && std::all_of(hidden.begin(), hidden.end(), [&](int w) { return w == hidden[0]; });
  if (uniform) return std::to_string(hidden.size()) + "x" + std::to_string(hidden[0]);
  std::string s;
  for (int w : hidden) s += (s.empty() ? "" : ",") + std::to_string(w);
  return s;
}

std::vector<double> split_numbers(const std::string& text) { return parse_csv_numbers(text); }

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct LoadedTask {
  TaskDef task;
  fs::path path;
  std::shared_ptr<const Mesh> mesh;
};

LoadedTask load_named_task(const std::string& name) {
  LoadedTask t;
  t.path = resolve_resource(name, "tasks");
  t.task = load_task(t.path);
  if (t.task.variant == Schema::anatomy) t.mesh = std::make_shared<const Mesh>(load_mesh(t.task.anatomy.mesh_path));
  return t;
}

std::string default_task_for(Schema schema) {
  switch (schema) {
    case Schema::eight_plane: return "eight";
    case Schema::double_sphere: return "double_sphere";
    case Schema::anatomy: return "anatomy";
    case Schema::generic: break;
  }
  fail(2, "no default robot for a generic model; pass --robot");
}

// --robot if given, else the robot named by the shipped task for the schema.
std::pair<RobotSpec, fs::path> load_robot_for(const std::string& robot_name, Schema schema) {
  std::string name = robot_name;
  if (name.empty()) {
    name = load_task(resolve_resource(default_task_for(schema), "tasks")).robot;
    if (name.empty()) fail(2, "task names no robot; pass --robot");
  }
  const fs::path path = resolve_resource(name, "robots");
  RobotSpec robot = load_robot(path);
  validate(robot);
  return {robot, path};
}

void write_text_atomically(const fs::path& out, const std::string& text) {
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + out.string());
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + out.string());
}

std::string vec_csv(const Eigen::VectorXd& v) {
  std::ostringstream s;
  s.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  return s.str();
}

Exec exec_mode(bool serial) { return serial ? Exec::serial : Exec::parallel; }

// ---- demo-gen ----

struct DemoGenArgs {
  std::string task, robot, out;
  long count = 50;
  long waypoints = -1;
  double noise = -1.0;
  std::uint64_t seed = 0;
  bool serial = false;
};

int cmd_demo_gen(const DemoGenArgs& a) {
  RunManifest manifest;
  manifest.command = "demo-gen";
  manifest.started = utc_timestamp();
  if (a.count < 1) fail(2, "--count must be at least 1");
  if (a.waypoints != -1 && a.waypoints < 2) fail(2, "--waypoints must be at least 2");
  if (a.noise != -1.0 && !(a.noise >= 0.0)) fail(2, "--noise must be >= 0");

  LoadedTask t = load_named_task(a.task);
  const std::string robot_name = a.robot.empty() ? t.task.robot : a.robot;
  if (robot_name.empty()) fail(2, "task names no robot; pass --robot");
  const fs::path robot_path = resolve_resource(robot_name, "robots");
  const RobotSpec robot = load_robot(robot_path);
  validate(robot);

  DatasetOptions opt;
  opt.count = static_cast<std::size_t>(a.count);
  opt.waypoints = a.waypoints == -1 ? t.task.waypoints : static_cast<std::size_t>(a.waypoints);
  opt.noise = a.noise == -1.0 ? t.task.noise : a.noise;
  opt.seed = a.seed;
  opt.exec = exec_mode(a.serial);

  std::vector<Demonstration> demos;
  try {
    demos = generate_dataset(t.task, robot, opt, IkSettings{}, t.mesh.get());
  } catch (const Error& e) {
    fail(exit_code(e.code(), 4), std::string("generation failed: ") + e.what());
  }

  const std::string manifest_name = manifest_path(a.out).filename().string();
  for (auto& d : demos) d.meta.manifest = manifest_name;
  write_store(a.out, demos);

  manifest.parameters = {{"task", t.path.string()}, {"robot", robot_path.string()},
                         {"count", opt.count},      {"waypoints", opt.waypoints},
                         {"noise", opt.noise},      {"seed", opt.seed},
                         {"output", a.out}};
  manifest.inputs = {t.path, robot_path};
  if (t.task.variant == Schema::anatomy) manifest.inputs.push_back(t.task.anatomy.mesh_path);
  manifest.seed = opt.seed;
  manifest.finished = utc_timestamp();
  write_manifest(manifest, a.out);

  double snap = 0.0;
  for (const auto& d : demos) snap += d.meta.snap_residual;
  std::cout << "wrote " << demos.size() << " demonstrations to " << a.out << " (mean snap residual "
            << snap / static_cast<double>(demos.size()) << " m)\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string model, demos, out, arch = "2x128";
  double alpha = 0.01, gamma = 10.0, lr = 1e-3, weight_decay = 1e-3;
  int epochs = 5000, batch = 0;
  long limit = 0;
  std::uint64_t seed = 0;
};

HyperParams hyper_from(const TrainArgs& a) {
  HyperParams h;
  h.alpha = a.alpha;
  h.gamma = a.gamma;
  h.hidden = parse_arch(a.arch);
  h.net.learning_rate = a.lr;
  h.net.epochs = a.epochs;
  h.net.batch_size = a.batch;
  h.net.seed = a.seed;
  h.net.weight_decay = a.weight_decay;
  return h;
}

std::vector<Demonstration> load_demos(const std::string& path, long limit = 0) {
  std::vector<Demonstration> demos = load_store(path);
  if (demos.empty()) fail(3, path + " holds no demonstrations");
  if (limit > 0 && static_cast<std::size_t>(limit) < demos.size()) demos.resize(static_cast<std::size_t>(limit));
  return demos;
}

int cmd_train(const TrainArgs& a) {
  RunManifest manifest;
  manifest.command = "train";
  manifest.started = utc_timestamp();
  const ModelFamily family = family_from_string(a.model);
  if (!(a.alpha >= 0.0) || !(a.gamma > 0.0) || a.epochs < 1 || !(a.lr > 0.0) || !(a.weight_decay >= 0.0)) {
    fail(2, "hyperparameters out of range");
  }
  if (a.limit < 0) fail(2, "--limit must be >= 0");
  const HyperParams hyper = hyper_from(a);
  const std::vector<Demonstration> demos = load_demos(a.demos, a.limit);
  const TrainingSet data = to_training_set(demos);

  ContextModel model;
  try {
    validate(data);
    model = train(family, data, hyper);
  } catch (const Error& e) {
    fail(exit_code(e.code(), 5), std::string("training failed: ") + e.what());
  }
  const double objective = training_objective(model, data);

  manifest.parameters = {{"model", a.model},
                         {"demos", a.demos},
                         {"records", demos.size()},
                         {"alpha", hyper.alpha},
                         {"gamma", hyper.gamma},
                         {"arch", arch_label(hyper.hidden)},
                         {"epochs", hyper.net.epochs},
                         {"learning_rate", hyper.net.learning_rate},
                         {"batch", hyper.net.batch_size},
                         {"weight_decay", hyper.net.weight_decay},
                         {"output", a.out}};
  manifest.inputs = {a.demos};
  manifest.seed = a.seed;
  manifest.finished = utc_timestamp();
  save_model(model, a.out, {{"manifest", manifest_path(a.out).filename().string()}});
  write_manifest(manifest, a.out);

  std::cout.precision(10);
  std::cout << hyper.label(family) << " on " << demos.size() << " demonstrations\n";
  std::cout << "objective " << objective << "\n";
  std::cout << "training rms residual " << training_residual(model, data) << " m\n";
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string model, demos, reference, train_demos, task, robot, report;
  long count = 50;
  std::uint64_t seed = 0;
  bool serial = false;
};

int cmd_eval(const EvalArgs& a) {
  RunManifest manifest;
  manifest.command = "eval";
  manifest.started = utc_timestamp();
  if (a.demos.empty() == a.reference.empty()) fail(2, "give exactly one of --demos and --reference");
  const fs::path model_path = resolve_resource(a.model, "models");
  const ContextModel model = load_model(model_path);
  auto [robot, robot_path] = load_robot_for(a.robot, model.schema);

  std::vector<EvaluationCase> cases;
  EvalMode mode = EvalMode::vs_demo;
  manifest.inputs = {model_path, robot_path};
  manifest.parameters = {{"model", model_path.string()}, {"robot", robot_path.string()}, {"report", a.report}};
  if (!a.demos.empty()) {
    for (const auto& d : load_demos(a.demos)) {
      if (d.context.schema != model.schema) {
        fail(6, "model is for " + std::string(to_string(model.schema)) + " but " + a.demos + " holds " +
                    std::string(to_string(d.context.schema)) + " demonstrations");
      }
      cases.push_back({d.context, d.trajectory});
    }
    manifest.inputs.push_back(a.demos);
    manifest.parameters["demos"] = a.demos;
  } else {
    if (a.reference != "eight") fail(2, "--reference supports only 'eight'");
    if (model.schema != Schema::eight_plane) {
      fail(6, "reference evaluation needs an eight_plane model, got " + std::string(to_string(model.schema)));
    }
    if (a.train_demos.empty()) fail(2, "--reference needs --train-demos to build the reference curve");
    if (a.count < 1) fail(2, "--count must be at least 1");
    const std::vector<Demonstration> train = load_demos(a.train_demos);
    for (const auto& d : train) {
      if (d.context.schema != Schema::eight_plane) fail(6, a.train_demos + " is not an eight_plane store");
    }
    const TipTrajectory ref = reference_curve(to_training_set(train));
    const LoadedTask t = load_named_task(a.task.empty() ? "eight" : a.task);
    if (t.task.variant != Schema::eight_plane) fail(6, "reference evaluation needs an eight_plane task");
    for (long i = 0; i < a.count; ++i) {
      Rng rng(stream_seed(a.seed, static_cast<std::uint64_t>(i)));
      cases.push_back({sample_context(t.task, rng), ref});
    }
    mode = EvalMode::vs_reference;
    manifest.inputs.push_back(a.train_demos);
    manifest.inputs.push_back(t.path);
    manifest.parameters["reference"] = a.reference;
    manifest.parameters["train_demos"] = a.train_demos;
    manifest.parameters["task"] = t.path.string();
    manifest.parameters["count"] = a.count;
    manifest.seed = a.seed;
  }

  EvaluationReport report;
  try {
    report = evaluate_model(model, cases, mode, robot, IkSettings{}, fs::path(a.model).filename().string(),
                            exec_mode(a.serial));
  } catch (const Error& e) {
    fail(exit_code(e.code(), 1), std::string("evaluation failed: ") + e.what());
  }
  std::ostringstream csv;
  write_report_csv(report, csv);
  csv << "# manifest " << manifest_path(a.report).filename().string() << '\n';
  write_text_atomically(a.report, csv.str());
  manifest.parameters["mode"] = mode == EvalMode::vs_demo ? "vs_demo" : "vs_reference";
  manifest.finished = utc_timestamp();
  write_manifest(manifest, a.report);

  std::cout.precision(6);
  std::cout << report.distances.size() << " cases, mean Frechet " << report.mean << " m, std " << report.std
            << " m\n";
  return 0;
}

// ---- exec ----

struct ExecArgs {
  std::string model, context, robot, out;
};

int cmd_exec(const ExecArgs& a) {
  RunManifest manifest;
  manifest.command = "exec";
  manifest.started = utc_timestamp();
  const std::vector<double> values = parse_csv_numbers(a.context);
  const fs::path model_path = resolve_resource(a.model, "models");
  const ContextModel model = load_model(model_path);
  ContextVector kappa;
  try {
    kappa = context_from_values(model.schema, values);
  } catch (const Error& e) {
    fail(2, std::string("malformed context: ") + e.what());
  }
  if (kappa.values.size() != model.context_dim()) fail(2, "context length does not match the model");
  auto [robot, robot_path] = load_robot_for(a.robot, model.schema);

  ExecutedTrajectory run;
  try {
    run = execute_prediction(model, kappa, robot, IkSettings{});
  } catch (const Error& e) {
    fail(exit_code(e.code(), 1), std::string("execution failed: ") + e.what());
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "waypoint";
  for (std::size_t i = 0; i < robot.tendon_count(); ++i) csv << ",tension_" << i;
  csv << ",insertion,rotation,tip_x,tip_y,tip_z,residual\n";
  for (std::size_t i = 0; i < run.plan.waypoints.size(); ++i) {
    const Config& c = run.plan.waypoints[i];
    const Vec3& p = run.plan.tips[i];
    csv << i << ',' << vec_csv(c.tensions) << ',' << c.insertion << ',' << c.rotation << ',' << p.x() << ','
        << p.y() << ',' << p.z() << ',' << run.plan.residuals[i] << '\n';
  }
  csv << "# manifest " << manifest_path(a.out).filename().string() << '\n';
  write_text_atomically(a.out, csv.str());

  manifest.parameters = {{"model", model_path.string()},
                         {"context", std::vector<double>(kappa.values.data(), kappa.values.data() + kappa.values.size())},
                         {"robot", robot_path.string()},
                         {"output", a.out}};
  manifest.inputs = {model_path, robot_path};
  manifest.finished = utc_timestamp();
  write_manifest(manifest, a.out);
  std::cout << run.plan.waypoints.size() << " waypoints, mean IK residual " << run.plan.mean_residual() << " m\n";
  return 0;
}

// ---- grid-search ----

struct GridArgs {
  std::string model, demos, report, alphas, gammas, archs, robot;
  double holdout = 0.2, lr = 1e-3, weight_decay = 1e-3;
  int epochs = 5000;
  std::uint64_t seed = 0;
  bool serial = false;
};

int cmd_grid_search(const GridArgs& a) {
  RunManifest manifest;
  manifest.command = "grid-search";
  manifest.started = utc_timestamp();
  const ModelFamily family = family_from_string(a.model);
  if (!(a.holdout > 0.0 && a.holdout < 1.0)) fail(2, "--holdout must be in (0, 1)");

  std::vector<HyperParams> grid;
  switch (family) {
    case ModelFamily::linear:
      grid = a.alphas.empty() ? linear_alpha_grid() : std::vector<HyperParams>{};
      for (double al : a.alphas.empty() ? std::vector<double>{} : split_numbers(a.alphas)) {
        HyperParams h;
        h.alpha = al;
        grid.push_back(h);
      }
      break;
    case ModelFamily::rbf: {
      if (a.alphas.empty() && a.gammas.empty()) {
        grid = rbf_grid();
        break;
      }
      const std::vector<double> alphas = a.alphas.empty() ? std::vector<double>{0.01} : split_numbers(a.alphas);
      const std::vector<double> gammas = a.gammas.empty() ? std::vector<double>{10.0} : split_numbers(a.gammas);
      for (double g : gammas) {
        for (double al : alphas) {
          HyperParams h;
          h.alpha = al;
          h.gamma = g;
          grid.push_back(h);
        }
      }
      break;
    }
    case ModelFamily::net:
      if (a.archs.empty()) {
        grid = architecture_grid();
      } else {
        for (const auto& s : split_list(a.archs, ';')) {
          HyperParams h;
          h.hidden = parse_arch(s);
          grid.push_back(h);
        }
      }
      break;
  }
  if (grid.empty()) fail(2, "empty grid");
  for (auto& h : grid) {
    if (!(h.alpha >= 0.0) || !(h.gamma > 0.0)) fail(2, "grid values out of range");
    h.net.epochs = a.epochs;
    h.net.learning_rate = a.lr;
    h.net.seed = a.seed;
    h.net.weight_decay = a.weight_decay;
  }

  const std::vector<Demonstration> demos = load_demos(a.demos);
  const auto n_hold = static_cast<std::size_t>(std::ceil(a.holdout * static_cast<double>(demos.size())));
  if (n_hold < 1 || n_hold >= demos.size()) fail(2, "holdout leaves no training or no validation records");
  const std::vector<Demonstration> fit(demos.begin(), demos.end() - static_cast<std::ptrdiff_t>(n_hold));
  const std::vector<Demonstration> hold(demos.end() - static_cast<std::ptrdiff_t>(n_hold), demos.end());
  const TrainingSet data = to_training_set(fit);

  std::optional<RobotSpec> robot;
  fs::path robot_path;
  if (!a.robot.empty()) {
    robot_path = resolve_resource(a.robot, "robots");
    robot = load_robot(robot_path);
    validate(*robot);
  }
  // executed through IK when a robot is given, otherwise the predicted curve itself
  ModelScorer scorer = [&](const ContextModel& m) {
    double sum = 0.0;
    for (const auto& d : hold) {
      const TipTrajectory curve =
          robot ? execute_prediction(m, d.context, *robot, IkSettings{}).plan.tips : predict(m, d.context);
      sum += frechet_distance(curve, d.trajectory);
    }
    return sum / static_cast<double>(hold.size());
  };

  GridResult result;
  try {
    validate(data);
    result = grid_search(data, family, grid, scorer, exec_mode(a.serial));
  } catch (const Error& e) {
    fail(exit_code(e.code(), 5), std::string("grid search failed: ") + e.what());
  }

  std::ostringstream csv;
  csv.precision(10);
  csv << "index,label,alpha,gamma,arch,score,best\n";
  for (std::size_t i = 0; i < result.grid.size(); ++i) {
    const HyperParams& h = result.grid[i];
    csv << i << ',' << h.label(family) << ',' << h.alpha << ',' << h.gamma << ',' << arch_label(h.hidden) << ','
        << result.scores[i] << ',' << (i == result.best ? "*" : "") << '\n';
  }
  csv << "# manifest " << manifest_path(a.report).filename().string() << '\n';
  write_text_atomically(a.report, csv.str());

  manifest.parameters = {{"model", a.model},       {"demos", a.demos},     {"holdout", a.holdout},
                         {"holdout_records", n_hold}, {"grid_size", grid.size()}, {"epochs", a.epochs},
                         {"learning_rate", a.lr},  {"weight_decay", a.weight_decay},
                         {"scoring", robot ? "executed" : "predicted"}, {"report", a.report}};
  manifest.inputs = {a.demos};
  if (robot) manifest.inputs.push_back(robot_path);
  manifest.seed = a.seed;
  manifest.finished = utc_timestamp();
  write_manifest(manifest, a.report);
  std::cout << "best " << result.grid[result.best].label(family) << " score " << result.scores[result.best]
            << " m\n";
  return 0;
}

// ---- serve ----

struct ServeArgs {
  std::string address = "127.0.0.1", task = "eight", robot, demos_out;
  int port = 8765;
  int cadence_ms = 0;
  int threads = 1;
};

int cmd_serve(const ServeArgs& a) {
  if (a.port < 0 || a.port > 65535) fail(2, "--port must be 0..65535");
  if (a.cadence_ms < 0) fail(2, "--cadence must be >= 0");
  ServerConfig cfg;
  cfg.address = a.address;
  cfg.port = static_cast<unsigned short>(a.port);
  cfg.task = a.task;
  cfg.robot = a.robot;
  cfg.demos_out = a.demos_out;
  cfg.threads = a.threads;
  cfg.options.playback_cadence = std::chrono::milliseconds(a.cadence_ms);
  if (!a.demos_out.empty()) {
    RunManifest manifest;
    manifest.command = "serve";
    manifest.started = utc_timestamp();
    manifest.parameters = {{"task", a.task}, {"robot", a.robot}, {"demos_out", a.demos_out}};
    cfg.options.store_manifest = manifest_path(a.demos_out).filename().string();
    write_manifest(manifest, a.demos_out);
  }
  TeleopServer server(cfg, ResourceResolver::from_data_path());
  server.start();
  std::cout << "listening on ws://" << a.address << ':' << server.port() << std::endl;
  server.run_until_signal();
  std::cout << "served " << server.connections_served() << " connections" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware trajectory learning for a tendon-driven continuum robot"};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));

  DemoGenArgs dg;
  auto* demo_gen = app.add_subcommand("demo-gen", "Generate synthetic demonstrations into a store");
  demo_gen->add_option("--task", dg.task, "task name or file")->required();
  demo_gen->add_option("--robot", dg.robot, "robot name or file (default: the task's robot)");
  demo_gen->add_option("--count", dg.count, "number of demonstrations")->default_val(50);
  demo_gen->add_option("--waypoints", dg.waypoints, "waypoints per demonstration (default: task)");
  demo_gen->add_option("--noise", dg.noise, "humanize amplitude in m (default: task)");
  demo_gen->add_option("--seed", dg.seed, "run seed")->default_val(0);
  demo_gen->add_option("--out", dg.out, "output store (.jsonl)")->required();
  demo_gen->add_flag("--serial", dg.serial, "use the serial reference loop");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Fit a context-to-trajectory model");
  train_cmd->add_option("--model", tr.model, "linear | rbf | net")->required()->check(CLI::IsMember({"linear", "rbf", "net"}));
  train_cmd->add_option("--demos", tr.demos, "demonstration store")->required();
  train_cmd->add_option("--alpha", tr.alpha, "ridge penalty")->default_val(0.01);
  train_cmd->add_option("--gamma", tr.gamma, "RBF width")->default_val(10.0);
  train_cmd->add_option("--arch", tr.arch, "hidden layers, DxW or w1,w2,...")->default_val("2x128");
  train_cmd->add_option("--epochs", tr.epochs, "network epochs")->default_val(5000);
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->default_val(1e-3);
  train_cmd->add_option("--batch", tr.batch, "minibatch size, 0 = full batch")->default_val(0);
  train_cmd->add_option("--weight-decay", tr.weight_decay, "L2 on network weights")->default_val(1e-3);
  train_cmd->add_option("--limit", tr.limit, "train on the first N records only (0 = all)")->default_val(0);
  train_cmd->add_option("--seed", tr.seed, "network initialization seed")->default_val(0);
  train_cmd->add_option("--out", tr.out, "output model file")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Execute a model on test cases and report Frechet errors");
  eval_cmd->add_option("--model", ev.model, "model file or name")->required();
  auto* ev_demos = eval_cmd->add_option("--demos", ev.demos, "held-out demonstration store (vs_demo)");
  auto* ev_ref = eval_cmd->add_option("--reference", ev.reference, "reference curve evaluation: eight");
  ev_demos->excludes(ev_ref);
  eval_cmd->add_option("--train-demos", ev.train_demos, "store the reference curve is built from");
  eval_cmd->add_option("--task", ev.task, "task for sampling reference contexts (default: eight)");
  eval_cmd->add_option("--count", ev.count, "reference contexts to sample")->default_val(50);
  eval_cmd->add_option("--seed", ev.seed, "seed for reference contexts")->default_val(0);
  eval_cmd->add_option("--robot", ev.robot, "robot name or file (default: shipped robot for the schema)");
  eval_cmd->add_option("--report", ev.report, "output CSV")->required();
  eval_cmd->add_flag("--serial", ev.serial, "use the serial reference loop");

  ExecArgs ex;
  auto* exec_cmd = app.add_subcommand("exec", "Plan the configuration trajectory for one context");
  exec_cmd->add_option("--model", ex.model, "model file or name")->required();
  exec_cmd->add_option("--context", ex.context, "comma separated context values")->required();
  exec_cmd->add_option("--robot", ex.robot, "robot name or file (default: shipped robot for the schema)");
  exec_cmd->add_option("--out", ex.out, "output CSV")->required();

  GridArgs gs;
  auto* grid_cmd = app.add_subcommand("grid-search", "Hyperparameter grid search on a holdout split");
  grid_cmd->add_option("--model", gs.model, "linear | rbf | net")->required()->check(CLI::IsMember({"linear", "rbf", "net"}));
  grid_cmd->add_option("--demos", gs.demos, "demonstration store")->required();
  grid_cmd->add_option("--alphas", gs.alphas, "comma separated ridge penalties");
  grid_cmd->add_option("--gammas", gs.gammas, "comma separated RBF widths");
  grid_cmd->add_option("--archs", gs.archs, "semicolon separated architectures, e.g. 1x32;2x128");
  grid_cmd->add_option("--holdout", gs.holdout, "fraction of records (taken from the end) held out")->default_val(0.2);
  grid_cmd->add_option("--robot", gs.robot, "score executed curves on this robot instead of predictions");
  grid_cmd->add_option("--epochs", gs.epochs, "network epochs")->default_val(5000);
  grid_cmd->add_option("--lr", gs.lr, "Adam learning rate")->default_val(1e-3);
  grid_cmd->add_option("--weight-decay", gs.weight_decay, "L2 on network weights")->default_val(1e-3);
  grid_cmd->add_option("--seed", gs.seed, "network initialization seed")->default_val(0);
  grid_cmd->add_option("--report", gs.report, "output CSV")->required();
  grid_cmd->add_flag("--serial", gs.serial, "use the serial reference loop");

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the teleoperation WebSocket server");
  serve_cmd->add_option("--address", sv.address, "listen address")->default_val("127.0.0.1");
  serve_cmd->add_option("--port", sv.port, "listen port, 0 = ephemeral")->default_val(8765);
  serve_cmd->add_option("--task", sv.task, "task name or file")->default_val("eight");
  serve_cmd->add_option("--robot", sv.robot, "robot name or file (default: the task's robot)");
  serve_cmd->add_option("--demos-out", sv.demos_out, "store that saved recordings are appended to");
  serve_cmd->add_option("--cadence", sv.cadence_ms, "playback interval in ms, 0 = burst")->default_val(0);
  serve_cmd->add_option("--threads", sv.threads, "I/O threads")->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const auto run = [&]() -> int {
    if (*demo_gen) return cmd_demo_gen(dg);
    if (*train_cmd) return cmd_train(tr);
    if (*eval_cmd) return cmd_eval(ev);
    if (*exec_cmd) return cmd_exec(ex);
    if (*grid_cmd) return cmd_grid_search(gs);
    return cmd_serve(sv);
  };
  try {
    return run();
  } catch (const Exit& e) {
    std::cerr << "tdlfd: " << e.msg << '\n';
    return e.code;
  } catch (const Error& e) {
    std::cerr << "tdlfd: " << e.what() << '\n';
    return exit_code(e.code(), 1);
  } catch (const std::exception& e) {
    std::cerr << "tdlfd: " << e.what() << '\n';
    return 1;
  }
}
