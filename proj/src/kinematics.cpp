#include "tdlfd/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tdlfd/error.hpp"

namespace tdlfd {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

/// Per-tendon constants hoisted out of the integration loop.
struct TendonLoad {
  double tension;
  double radius;
  double phase;
  double rate;  // d(theta)/ds
};

class CurvatureField {
 public:
  CurvatureField(const RobotSpec& spec, const Config& config)
      : inv_bend_(1.0 / spec.bending_stiffness), inv_twist_(1.0 / spec.torsional_stiffness) {
    for (std::size_t i = 0; i < spec.tendons.size(); ++i) {
      const double tau = config.tensions[static_cast<Eigen::Index>(i)];
      if (tau == 0.0) continue;
      const auto& t = spec.tendons[i];
      const double rate =
          t.kind == RoutingKind::helical ? kTwoPi * t.revolutions / spec.length : 0.0;
      loads_.push_back({tau, t.offset_radius, t.phase, rate});
    }
  }

  bool unloaded() const { return loads_.empty(); }

  Vec3 operator()(double s) const {
    Vec3 moment = Vec3::Zero();
    for (const auto& l : loads_) {
      const double theta = l.phase + l.rate * s;
      const double c = std::cos(theta);
      const double sn = std::sin(theta);
      const double rx = l.radius * c;
      const double ry = l.radius * sn;
      const double dx = -l.radius * l.rate * sn;
      const double dy = l.radius * l.rate * c;
      const double inv_norm = 1.0 / std::sqrt(1.0 + dx * dx + dy * dy);
      const double tx = dx * inv_norm;
      const double ty = dy * inv_norm;
      const double tz = inv_norm;
      // t x r with r_z = 0
      moment.x() += l.tension * (-tz * ry);
      moment.y() += l.tension * (tz * rx);
      moment.z() += l.tension * (tx * ry - ty * rx);
    }
    return {moment.x() * inv_bend_, moment.y() * inv_bend_, moment.z() * inv_twist_};
  }

 private:
  double inv_bend_;
  double inv_twist_;
  std::vector<TendonLoad> loads_;
};

Mat3 skew(const Vec3& u) {
  Mat3 m;
  m << 0.0, -u.z(), u.y(),
       u.z(), 0.0, -u.x(),
       -u.y(), u.x(), 0.0;
  return m;
}

// Newton-Schulz iteration towards the polar factor; two sweeps take an RK4
// step's drift back to round-off.
void reorthonormalize(Mat3& r) {
  for (int k = 0; k < 2; ++k) {
    const Mat3 gram = r.transpose() * r;
    r = 0.5 * r * (3.0 * Mat3::Identity() - gram);
  }
}

template <typename Visit>
void integrate(const RobotSpec& spec, const Config& config, int n_steps, Visit&& visit) {
  validate(spec, config);
  require(n_steps >= 1, ErrorCode::InvalidConfig, "n_steps must be positive");

  const CurvatureField curvature(spec, config);
  const double h = config.insertion / n_steps;
  Vec3 p = Vec3::Zero();
  Mat3 r = rot_z(config.rotation);
  visit(0, p, r);

  if (curvature.unloaded()) {
    const Vec3 dir = r.col(2);
    for (int k = 1; k <= n_steps; ++k) {
      p = dir * (h * k);
      visit(k, p, r);
    }
    return;
  }

  Mat3 u_start = skew(curvature(0.0));
  for (int k = 0; k < n_steps; ++k) {
    const double s = h * k;
    const Mat3 u_mid = skew(curvature(s + 0.5 * h));
    const Mat3 u_end = skew(curvature(s + h));

    const Mat3 k1 = r * u_start;
    const Vec3 q1 = r.col(2);
    const Mat3 r2 = r + 0.5 * h * k1;
    const Mat3 k2 = r2 * u_mid;
    const Vec3 q2 = r2.col(2);
    const Mat3 r3 = r + 0.5 * h * k2;
    const Mat3 k3 = r3 * u_mid;
    const Vec3 q3 = r3.col(2);
    const Mat3 r4 = r + h * k3;
    const Mat3 k4 = r4 * u_end;
    const Vec3 q4 = r4.col(2);

    p += (h / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
    r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    reorthonormalize(r);
    u_start = u_end;
    visit(k + 1, p, r);
  }
}

std::string kind_name(RoutingKind k) { return k == RoutingKind::straight ? "straight" : "helical"; }

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyShape: return "EmptyShape";
    case ErrorCode::SingularUpdate: return "SingularUpdate";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::ProjectionFailure: return "ProjectionFailure";
    case ErrorCode::IncompleteContext: return "IncompleteContext";
    case ErrorCode::EmptyRecording: return "EmptyRecording";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::BindFailure: return "BindFailure";
  }
  return "Unknown";
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 m;
  m << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return m;
}

double wrap_angle(double angle) {
  double w = angle - kTwoPi * std::floor((angle + std::numbers::pi) / kTwoPi);
  // floor can land exactly on +pi through rounding
  if (w >= std::numbers::pi) w -= kTwoPi;
  if (w < -std::numbers::pi) w = -std::numbers::pi;
  return w;
}

void validate(const RobotSpec& spec) {
  require(spec.length > 0.0, ErrorCode::InvalidSpec, "length must be positive");
  require(spec.backbone_radius > 0.0, ErrorCode::InvalidSpec, "backbone_radius must be positive");
  require(spec.bending_stiffness > 0.0 && spec.torsional_stiffness > 0.0, ErrorCode::InvalidSpec,
          "stiffnesses must be positive");
  require(!spec.tendons.empty(), ErrorCode::InvalidSpec, "at least one tendon required");
  require(spec.tension_max.size() == spec.tendons.size(), ErrorCode::InvalidSpec,
          "tension_max must have one entry per tendon");
  for (std::size_t i = 0; i < spec.tendons.size(); ++i) {
    const auto& t = spec.tendons[i];
    require(t.offset_radius > 0.0 && t.offset_radius <= spec.backbone_radius,
            ErrorCode::InvalidSpec, "tendon " + std::to_string(i) + " offset_radius out of (0, backbone_radius]");
    require(t.kind == RoutingKind::helical || t.revolutions == 0.0, ErrorCode::InvalidSpec,
            "straight tendon " + std::to_string(i) + " must have zero revolutions");
    require(spec.tension_max[i] > 0.0, ErrorCode::InvalidSpec, "tension_max must be positive");
  }
  require(spec.insertion_max > 0.0 && spec.insertion_max <= spec.length, ErrorCode::InvalidSpec,
          "insertion_max must lie in (0, length]");
}

void validate(const RobotSpec& spec, const Config& config) {
  const auto n = static_cast<Eigen::Index>(spec.tendons.size());
  require(config.tensions.size() == n, ErrorCode::InvalidConfig,
          "expected " + std::to_string(n) + " tensions, got " + std::to_string(config.tensions.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = config.tensions[i];
    require(std::isfinite(t) && t >= 0.0 && t <= spec.tension_max[static_cast<std::size_t>(i)],
            ErrorCode::InvalidConfig, "tension " + std::to_string(i) + " out of range");
  }
  require(std::isfinite(config.insertion) && config.insertion >= 0.0 &&
              config.insertion <= spec.insertion_max,
          ErrorCode::InvalidConfig, "insertion out of range");
  require(std::isfinite(config.rotation) && config.rotation >= -std::numbers::pi &&
              config.rotation < std::numbers::pi,
          ErrorCode::InvalidConfig, "rotation outside [-pi, pi)");
  require(spec.insertion_enabled || config.insertion == spec.insertion_max, ErrorCode::InvalidConfig,
          "insertion is disabled and must equal insertion_max");
  require(spec.rotation_enabled || config.rotation == 0.0, ErrorCode::InvalidConfig,
          "rotation is disabled and must be zero");
}

Config home_config(const RobotSpec& spec) {
  Config c;
  c.tensions = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.tendons.size()));
  c.insertion = spec.insertion_max;
  c.rotation = 0.0;
  return c;
}

RoutingOffset routing_offset(const TendonRouting& routing, double s, double length) {
  if (routing.kind == RoutingKind::straight) {
    return {routing.offset_radius * Vec3(std::cos(routing.phase), std::sin(routing.phase), 0.0),
            Vec3::Zero()};
  }
  const double rate = kTwoPi * routing.revolutions / length;
  const double theta = routing.phase + rate * s;
  const double d = routing.offset_radius;
  return {d * Vec3(std::cos(theta), std::sin(theta), 0.0),
          d * rate * Vec3(-std::sin(theta), std::cos(theta), 0.0)};
}

Vec3 body_curvature(const RobotSpec& spec, const Config& config, double s) {
  return CurvatureField(spec, config)(s);
}

BackboneShape forward_kinematics(const RobotSpec& spec, const Config& config, int n_steps) {
  BackboneShape shape;
  shape.frames.resize(static_cast<std::size_t>(std::max(n_steps, 0)) + 1);
  integrate(spec, config, n_steps, [&](int k, const Vec3& p, const Mat3& r) {
    shape.frames[static_cast<std::size_t>(k)] = Frame{p, r};
  });
  shape.arc_step = config.insertion / n_steps;
  return shape;
}

Vec3 forward_tip(const RobotSpec& spec, const Config& config, int n_steps) {
  Vec3 tip = Vec3::Zero();
  integrate(spec, config, n_steps, [&](int, const Vec3& p, const Mat3&) { tip = p; });
  return tip;
}

Vec3 tip_position(const BackboneShape& shape) {
  if (shape.frames.empty()) throw Error(ErrorCode::EmptyShape, "backbone shape has no frames");
  return shape.frames.back().position;
}

Config clamp_config(const RobotSpec& spec, const Eigen::VectorXd& raw) {
  const auto n = static_cast<Eigen::Index>(spec.tendons.size());
  if (raw.size() != static_cast<Eigen::Index>(spec.dof())) {
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(spec.dof()) +
                                                  " degrees of freedom, got " + std::to_string(raw.size()));
  }
  Config c;
  c.tensions.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c.tensions[i] = std::clamp(raw[i], 0.0, spec.tension_max[static_cast<std::size_t>(i)]);
  }
  Eigen::Index next = n;
  c.insertion = spec.insertion_enabled ? std::clamp(raw[next++], 0.0, spec.insertion_max)
                                       : spec.insertion_max;
  c.rotation = spec.rotation_enabled ? wrap_angle(raw[next++]) : 0.0;
  return c;
}

Eigen::VectorXd to_dof_vector(const RobotSpec& spec, const Config& config) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(spec.dof()));
  const auto n = config.tensions.size();
  v.head(n) = config.tensions;
  Eigen::Index next = n;
  if (spec.insertion_enabled) v[next++] = config.insertion;
  if (spec.rotation_enabled) v[next++] = config.rotation;
  return v;
}

RobotSpec robot_from_json(const nlohmann::json& doc) {
  RobotSpec spec;
  try {
    spec.name = doc.value("name", "");
    spec.length = doc.at("length").get<double>();
    spec.backbone_radius = doc.at("backbone_radius").get<double>();
    spec.bending_stiffness = doc.value("bending_stiffness", 1e-2);
    spec.torsional_stiffness = doc.value("torsional_stiffness", 0.8e-2);
    spec.insertion_max = doc.value("insertion_max", spec.length);
    spec.insertion_enabled = doc.value("insertion_enabled", false);
    spec.rotation_enabled = doc.value("rotation_enabled", false);
    for (const auto& t : doc.at("tendons")) {
      TendonRouting r;
      const auto kind = t.at("kind").get<std::string>();
      if (kind == "straight") {
        r.kind = RoutingKind::straight;
      } else if (kind == "helical") {
        r.kind = RoutingKind::helical;
      } else {
        throw Error(ErrorCode::ParseError, "unknown tendon kind '" + kind + "'");
      }
      r.offset_radius = t.at("offset_radius").get<double>();
      r.phase = t.value("phase", 0.0);
      r.revolutions = t.value("revolutions", 0.0);
      spec.tendons.push_back(r);
    }
    const auto& tmax = doc.at("tension_max");
    if (tmax.is_array()) {
      spec.tension_max = tmax.get<std::vector<double>>();
    } else {
      spec.tension_max.assign(spec.tendons.size(), tmax.get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("robot spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

nlohmann::json robot_to_json(const RobotSpec& spec) {
  nlohmann::json tendons = nlohmann::json::array();
  for (const auto& t : spec.tendons) {
    tendons.push_back({{"kind", kind_name(t.kind)},
                       {"offset_radius", t.offset_radius},
                       {"phase", t.phase},
                       {"revolutions", t.revolutions}});
  }
  return {{"name", spec.name},
          {"length", spec.length},
          {"backbone_radius", spec.backbone_radius},
          {"bending_stiffness", spec.bending_stiffness},
          {"torsional_stiffness", spec.torsional_stiffness},
          {"tendons", tendons},
          {"tension_max", spec.tension_max},
          {"insertion_max", spec.insertion_max},
          {"insertion_enabled", spec.insertion_enabled},
          {"rotation_enabled", spec.rotation_enabled}};
}

RobotSpec load_robot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open robot spec " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return robot_from_json(doc);
}

nlohmann::json config_to_json(const Config& config) {
  return {{"tensions", std::vector<double>(config.tensions.data(),
                                           config.tensions.data() + config.tensions.size())},
          {"insertion", config.insertion},
          {"rotation", config.rotation}};
}

Config config_from_json(const RobotSpec& spec, const nlohmann::json& doc) {
  Config c;
  const auto t = doc.at("tensions").get<std::vector<double>>();
  c.tensions = Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
  c.insertion = doc.value("insertion", spec.insertion_max);
  c.rotation = doc.value("rotation", 0.0);
  validate(spec, c);
  return c;
}

}  // namespace tdlfd
