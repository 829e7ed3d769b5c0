#include "tdlfd/teleop.hpp"

#include <cmath>
#include <fstream>

#include "tdlfd/error.hpp"
#include "tdlfd/manifest.hpp"
#include "tdlfd/metrics.hpp"

namespace tdlfd {

namespace {

using nlohmann::json;

json point_json(const Vec3& p) { return json::array({p.x(), p.y(), p.z()}); }

json points_json(const std::vector<Vec3>& pts) {
  json out = json::array();
  for (const auto& p : pts) out.push_back(point_json(p));
  return out;
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Vec3 parse_point(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::ProtocolError, "expected [x, y, z]");
  Vec3 p;
  for (int k = 0; k < 3; ++k) {
    if (!j[static_cast<std::size_t>(k)].is_number()) throw Error(ErrorCode::ProtocolError, "expected numbers");
    p[k] = j[static_cast<std::size_t>(k)].get<double>();
  }
  if (!p.allFinite()) throw Error(ErrorCode::ProtocolError, "coordinates must be finite");
  return p;
}

std::vector<double> parse_numbers(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ProtocolError, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorCode::ProtocolError, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::string string_field(const json& msg, const char* key) {
  if (!msg.contains(key)) return {};
  if (!msg[key].is_string()) throw Error(ErrorCode::ProtocolError, std::string(key) + " must be a string");
  return msg[key].get<std::string>();
}

}  // namespace

DemoStoreWriter::DemoStoreWriter(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) ++count_;
  }
}

std::size_t DemoStoreWriter::append(const Demonstration& demo) {
  std::lock_guard lock(mutex_);
  append_to_store(path_, demo);
  return count_++;
}

std::size_t DemoStoreWriter::size() const {
  std::lock_guard lock(mutex_);
  return count_;
}

ResourceResolver ResourceResolver::from_data_path() {
  return {[](const std::string& name) { return load_robot(resolve_resource(name, "robots")); },
          [](const std::string& name) { return load_task(resolve_resource(name, "tasks")); },
          [](const std::string& name) { return load_model(resolve_resource(name, "models")); }};
}

Environment load_environment(const ResourceResolver& resolver, const std::string& task_name,
                             const std::string& robot_name) {
  Environment env;
  env.task = resolver.task(task_name);
  const std::string robot = robot_name.empty() ? env.task.robot : robot_name;
  if (robot.empty()) throw Error(ErrorCode::InvalidSpec, "task names no robot and none was given");
  env.robot = resolver.robot(robot);
  validate(env.robot);
  if (env.task.variant == Schema::anatomy) {
    env.mesh = std::make_shared<const Mesh>(load_mesh(env.task.anatomy.mesh_path));
  }
  return env;
}

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::idle: return "idle";
    case SessionState::recording: return "recording";
    case SessionState::playback: return "playback";
  }
  return "idle";
}

json error_message(std::string_view code, std::string_view msg) {
  return {{"type", "error"}, {"code", std::string(code)}, {"msg", std::string(msg)}};
}

std::vector<Vec3> decimate(const std::vector<Vec3>& points, std::size_t limit) {
  if (points.size() <= limit || limit < 2) return points;
  std::vector<Vec3> out(limit);
  for (std::size_t i = 0; i < limit; ++i) {
    out[i] = points[i * (points.size() - 1) / (limit - 1)];
  }
  return out;
}

Session::Session(Environment env, DemoStoreWriter* store, ResourceResolver resolver, TeleopOptions options,
                 std::string session_id)
    : env_(std::move(env)),
      store_(store),
      resolver_(std::move(resolver)),
      options_(std::move(options)),
      session_id_(std::move(session_id)),
      config_(home_config(env_.robot)) {
  refresh_shape();
}

void Session::refresh_shape() {
  const BackboneShape shape = forward_kinematics(env_.robot, config_, options_.ik.fk_steps);
  std::vector<Vec3> pts;
  pts.reserve(shape.frames.size());
  for (const auto& f : shape.frames) pts.push_back(f.position);
  tip_ = pts.back();
  backbone_ = decimate(pts, options_.backbone_points);
}

ContextVector Session::parse_context(const std::vector<double>& values) const {
  return context_from_values(env_.task.variant, values);
}

json Session::env_message() const {
  const TaskDef& task = env_.task;
  json descriptor;
  switch (task.variant) {
    case Schema::eight_plane: {
      const double y = task.eight.p_ref_min.y();
      descriptor = {{"kind", "plane"},
                    {"point", point_json({0.0, y, 0.0})},
                    {"normal", point_json({0.0, 1.0, 0.0})},
                    {"p_ref_min", point_json(task.eight.p_ref_min)},
                    {"p_ref_max", point_json(task.eight.p_ref_max)},
                    {"w_range", range_json(task.eight.width)},
                    {"h_range", range_json(task.eight.height)}};
      if (context_) descriptor["guide"] = points_json(oracle_eight(*context_, options_.waypoints));
      break;
    }
    case Schema::double_sphere: {
      descriptor = {{"kind", "spheres"},
                    {"p_ref_min", point_json(task.sphere.p_ref_min)},
                    {"p_ref_max", point_json(task.sphere.p_ref_max)},
                    {"radius_range", range_json(task.sphere.radius)}};
      if (context_) {
        const SpherePair s = sphere_pair(*context_);
        descriptor["spheres"] = json::array({{{"center", point_json(s.upper_center)}, {"radius", s.upper_radius}},
                                             {{"center", point_json(s.lower_center)}, {"radius", s.lower_radius}}});
      }
      break;
    }
    case Schema::anatomy: {
      const Vec3 p = task.anatomy.nominal_p_ref;
      const ContextVector placement =
          context_ ? *context_ : make_context(Schema::anatomy, {p.x(), p.y(), p.z(), 1.0});
      const Mesh placed = place_anatomy(*env_.mesh, placement);
      json tris = json::array();
      for (const auto& t : placed.triangles) tris.push_back(json::array({t[0], t[1], t[2]}));
      descriptor = {{"kind", "mesh"}, {"vertices", points_json(placed.vertices)}, {"triangles", std::move(tris)}};
      break;
    }
    case Schema::generic:
      descriptor = {{"kind", "none"}};
      break;
  }
  json msg{{"type", "env"},
           {"version", kProtocolVersion},
           {"session", session_id_},
           {"task", task.name},
           {"schema", std::string(to_string(task.variant))},
           {"context_dim", schema_dim(task.variant)},
           {"robot", robot_to_json(env_.robot)},
           {"descriptor", std::move(descriptor)}};
  if (context_) {
    msg["context"] = std::vector<double>(context_->values.data(), context_->values.data() + context_->values.size());
  }
  if (!predicted_.empty()) msg["predicted"] = points_json(predicted_);
  return msg;
}

json Session::state_message() const {
  return {{"type", "state"},
          {"backbone", points_json(backbone_)},
          {"tip", point_json(tip_)},
          {"config", config_to_json(config_)},
          {"residual", residual_},
          {"recording", state_ == SessionState::recording},
          {"state", std::string(to_string(state_))},
          {"samples", buffer_.size()}};
}

std::vector<json> Session::handle_text(std::string_view text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::exception& e) {
    return {error_message("ProtocolError", std::string("malformed JSON: ") + e.what())};
  }
  return handle(msg);
}

std::vector<json> Session::handle(const json& msg) {
  try {
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      throw Error(ErrorCode::ProtocolError, "message needs a string 'type'");
    }
    const std::string type = msg["type"].get<std::string>();
    if (type == "init") return {handle_init(string_field(msg, "task"), string_field(msg, "robot"))};
    if (type == "context") return {handle_context(parse_numbers(msg.value("values", json())))};
    if (type == "target") return {handle_target(parse_point(msg.value("p", json())))};
    if (type == "record") return {handle_record(string_field(msg, "action"))};
    if (type == "reset") return {handle_reset()};
    if (type == "playback") {
      const std::string name = string_field(msg, "model");
      if (name.empty()) throw Error(ErrorCode::ProtocolError, "playback needs a model");
      const std::vector<double> context = parse_numbers(msg.value("context", json()));
      return handle_playback(resolver_.model(name), context);
    }
    throw Error(ErrorCode::ProtocolError, "unknown message type '" + type + "'");
  } catch (const Error& e) {
    return {error_message(to_string(e.code()), e.what())};
  } catch (const std::exception& e) {
    return {error_message("ProtocolError", e.what())};
  }
}

json Session::handle_init(const std::string& task, const std::string& robot) {
  if (!task.empty() || !robot.empty()) {
    Environment next = load_environment(resolver_, task.empty() ? env_.task.name : task, robot);
    env_ = std::move(next);
  }
  config_ = home_config(env_.robot);
  state_ = SessionState::idle;
  buffer_.clear();
  stopped_ = false;
  context_.reset();
  predicted_.clear();
  residual_ = 0.0;
  refresh_shape();
  return env_message();
}

json Session::handle_context(const std::vector<double>& values) {
  context_ = parse_context(values);
  return env_message();
}

json Session::handle_target(const Vec3& target) {
  Config config = config_;
  Vec3 tip = tip_;
  double err = (target - tip).norm();
  for (int i = 0; i < options_.max_ik_steps && err >= options_.ik.tol; ++i) {
    IkStep step = ik_refine(env_.robot, config, tip, target, options_.ik);
    if (!step.moved) break;
    config = std::move(step.config);
    tip = step.tip;
    err = step.error;
  }
  if (!(config == config_)) {
    config_ = std::move(config);
    refresh_shape();
  }
  residual_ = (target - tip_).norm();
  if (state_ == SessionState::recording) {
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - record_start_).count();
    buffer_.push_back({tip_, t});
  }
  return state_message();
}

json Session::handle_record(std::string_view action) {
  if (action == "start") {
    if (state_ == SessionState::recording) throw Error(ErrorCode::ProtocolError, "already recording");
    buffer_.clear();
    stopped_ = false;
    state_ = SessionState::recording;
    record_start_ = std::chrono::steady_clock::now();
    return state_message();
  }
  if (action == "stop") {
    if (state_ != SessionState::recording) throw Error(ErrorCode::ProtocolError, "not recording");
    state_ = SessionState::idle;
    stopped_ = true;
    return state_message();
  }
  if (action == "save") {
    if (state_ == SessionState::recording) throw Error(ErrorCode::ProtocolError, "stop the recording before saving");
    if (!stopped_ || buffer_.empty()) throw Error(ErrorCode::EmptyRecording, "nothing recorded");
    if (!context_) throw Error(ErrorCode::IncompleteContext, "set the context before saving");
    if (store_ == nullptr) throw Error(ErrorCode::IoError, "this server has no demonstration store");
    std::vector<Vec3> tips;
    tips.reserve(buffer_.size());
    for (const auto& s : buffer_) tips.push_back(s.tip);
    Demonstration demo;
    demo.context = *context_;
    try {
      demo.trajectory = resample_arclength(tips, options_.waypoints);
    } catch (const Error&) {
      throw Error(ErrorCode::EmptyRecording, "recording has no extent");
    }
    demo.meta.task = env_.task.variant;
    demo.meta.source = DemoSource::teleop;
    demo.meta.session = session_id_;
    demo.meta.manifest = options_.store_manifest;
    const std::size_t index = store_->append(demo);
    buffer_.clear();
    stopped_ = false;
    return {{"type", "saved"}, {"index", index}};
  }
  throw Error(ErrorCode::ProtocolError, "record action must be start, stop or save");
}

std::vector<json> Session::handle_playback(const ContextModel& model, const std::vector<double>& context) {
  if (state_ == SessionState::recording) throw Error(ErrorCode::ProtocolError, "stop the recording first");
  if (model.schema != env_.task.variant) {
    throw Error(ErrorCode::SchemaMismatch, "model is for " + std::string(to_string(model.schema)) +
                                               ", session task is " + std::string(to_string(env_.task.variant)));
  }
  const ContextVector kappa = parse_context(context);
  const TipTrajectory predicted = predict(model, kappa);
  const ConfigTrajectory plan =
      plan_config_trajectory(env_.robot, predicted, home_config(env_.robot), options_.playback_ik);

  predicted_ = predicted;
  std::vector<json> out{env_message()};
  state_ = SessionState::playback;
  for (std::size_t i = 0; i < plan.waypoints.size(); ++i) {
    config_ = plan.waypoints[i];
    refresh_shape();
    residual_ = plan.residuals[i];
    json msg = state_message();
    msg["index"] = i;
    msg["of"] = plan.waypoints.size();
    out.push_back(std::move(msg));
  }
  state_ = SessionState::idle;
  return out;
}

json Session::handle_reset() {
  config_ = home_config(env_.robot);
  state_ = SessionState::idle;
  buffer_.clear();
  stopped_ = false;
  predicted_.clear();
  residual_ = 0.0;
  refresh_shape();
  return state_message();
}

}  // namespace tdlfd
