#pragma once

#include <vector>

#include <Eigen/Core>

#include "tdlfd/kinematics.hpp"
#include "tdlfd/parallel.hpp"

namespace tdlfd {

struct IkSettings {
  double damping = 1e-3;
  /// Per-DOF finite-difference steps; empty means 1e-4 for every DOF.
  std::vector<double> fd_step;
  double tol = 1e-4;
  int max_iters = 200;
  double step_scale = 1.0;
  int max_halvings = 8;
  int fk_steps = kDefaultFkSteps;
  Exec exec = Exec::serial;
};

void validate(const IkSettings& settings);

/// 3 x dof central-difference Jacobian of the tip position. Probes are clamped
/// to the joint limits, giving a one-sided difference at a bound.
Eigen::Matrix<double, 3, Eigen::Dynamic> tip_jacobian(const RobotSpec& spec, const Config& config,
                                                      const IkSettings& settings);

struct IkStep {
  Config config;
  Vec3 tip;
  double error = 0.0;
  bool moved = false;
};

/// One damped least squares update with backtracking, given the tip of
/// `config` already evaluated. The returned error never exceeds the input error.
IkStep ik_refine(const RobotSpec& spec, const Config& config, const Vec3& tip, const Vec3& target,
                 const IkSettings& settings);

Config ik_step(const RobotSpec& spec, const Config& config, const Vec3& target,
               const IkSettings& settings);

struct IkSolution {
  Config config;
  Vec3 tip;
  double residual = 0.0;
  int iterations = 0;
};

IkSolution solve_ik(const RobotSpec& spec, const Config& seed, const Vec3& target,
                    const IkSettings& settings);

struct ConfigTrajectory {
  std::vector<Config> waypoints;
  std::vector<Vec3> tips;
  std::vector<double> residuals;

  double mean_residual() const;
};

/// Solves each waypoint in order, warm-started from the previous solution.
ConfigTrajectory plan_config_trajectory(const RobotSpec& spec, const std::vector<Vec3>& trajectory,
                                        const Config& seed, const IkSettings& settings);

}  // namespace tdlfd
