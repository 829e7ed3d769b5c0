#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace tdlfd {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class RoutingKind { straight, helical };

struct TendonRouting {
  RoutingKind kind = RoutingKind::straight;
  double offset_radius = 0.0;  // m, distance from the backbone axis
  double phase = 0.0;          // rad, angular position at s = 0
  double revolutions = 0.0;    // turns from base to tip, sign gives handedness
};

struct RobotSpec {
  std::string name;
  double length = 0.2;  // m
  double backbone_radius = 0.01;
  double bending_stiffness = 1e-2;   // EI, N m^2
  double torsional_stiffness = 0.8e-2;  // GJ, N m^2
  std::vector<TendonRouting> tendons;
  std::vector<double> tension_max;  // N, one per tendon
  double insertion_max = 0.2;
  bool insertion_enabled = false;
  bool rotation_enabled = false;

  std::size_t tendon_count() const { return tendons.size(); }
  /// Tensions first, then insertion and rotation when enabled.
  std::size_t dof() const {
    return tendons.size() + (insertion_enabled ? 1 : 0) + (rotation_enabled ? 1 : 0);
  }
};

/// Throws Error(InvalidSpec) naming the first violated invariant.
void validate(const RobotSpec& spec);

struct Config {
  Eigen::VectorXd tensions;
  double insertion = 0.0;
  double rotation = 0.0;

  bool operator==(const Config&) const = default;
};

/// Throws Error(InvalidConfig).
void validate(const RobotSpec& spec, const Config& config);

/// Unloaded, fully inserted, unrotated.
Config home_config(const RobotSpec& spec);

struct Frame {
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
};

struct BackboneShape {
  std::vector<Frame> frames;
  double arc_step = 0.0;
};

struct RoutingOffset {
  Vec3 r;
  Vec3 r_prime;
};

RoutingOffset routing_offset(const TendonRouting& routing, double s, double length);

/// Body-frame curvature of the rod at arc length s under the tendon moment model
/// u = K^-1 sum_i tau_i (t_i x r_i), K = diag(EI, EI, GJ).
Vec3 body_curvature(const RobotSpec& spec, const Config& config, double s);

inline constexpr int kDefaultFkSteps = 200;

/// Fixed-step RK4 integration of p' = R e3, R' = R [u]x from the base frame
/// (origin, Rot_z(rotation)) over the deployed length. Returns n_steps + 1 frames.
BackboneShape forward_kinematics(const RobotSpec& spec, const Config& config,
                                 int n_steps = kDefaultFkSteps);

/// Last frame position. Throws Error(EmptyShape).
Vec3 tip_position(const BackboneShape& shape);

/// Tip position only, same integration as forward_kinematics without storing frames.
Vec3 forward_tip(const RobotSpec& spec, const Config& config, int n_steps = kDefaultFkSteps);

/// Maps an unconstrained DOF vector onto a valid Config.
Config clamp_config(const RobotSpec& spec, const Eigen::VectorXd& raw);

/// Inverse of clamp_config for a valid config: the enabled DOF in order.
Eigen::VectorXd to_dof_vector(const RobotSpec& spec, const Config& config);

/// Wraps an angle into [-pi, pi).
double wrap_angle(double angle);

Mat3 rot_z(double angle);

// Robot spec files.
RobotSpec robot_from_json(const nlohmann::json& doc);
nlohmann::json robot_to_json(const RobotSpec& spec);
RobotSpec load_robot(const std::filesystem::path& path);

nlohmann::json config_to_json(const Config& config);
Config config_from_json(const RobotSpec& spec, const nlohmann::json& doc);

}  // namespace tdlfd
