#include "tdlfd/ik.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "tdlfd/error.hpp"

namespace tdlfd {

namespace {

double fd_step_for(const IkSettings& settings, Eigen::Index j) {
  if (settings.fd_step.empty()) return 1e-4;
  return settings.fd_step.at(static_cast<std::size_t>(j));
}

bool is_rotation_dof(const RobotSpec& spec, Eigen::Index j) {
  return spec.rotation_enabled && j == static_cast<Eigen::Index>(spec.dof()) - 1;
}

Vec3 jacobian_column(const RobotSpec& spec, const Eigen::VectorXd& q, Eigen::Index j,
                     const IkSettings& settings) {
  const double h = fd_step_for(settings, j);
  Eigen::VectorXd plus = q;
  Eigen::VectorXd minus = q;
  plus[j] += h;
  minus[j] -= h;
  const Config cp = clamp_config(spec, plus);
  const Config cm = clamp_config(spec, minus);
  const double span = is_rotation_dof(spec, j)
                          ? 2.0 * h
                          : to_dof_vector(spec, cp)[j] - to_dof_vector(spec, cm)[j];
  return (forward_tip(spec, cp, settings.fk_steps) - forward_tip(spec, cm, settings.fk_steps)) / span;
}

// +1 if the DOF sits on its lower bound, -1 on its upper bound, 0 otherwise.
int bound_side(const RobotSpec& spec, const Eigen::VectorXd& q, Eigen::Index j) {
  const auto n = static_cast<Eigen::Index>(spec.tendon_count());
  double hi = 0.0;
  if (j < n) {
    hi = spec.tension_max[static_cast<std::size_t>(j)];
  } else if (spec.insertion_enabled && j == n) {
    hi = spec.insertion_max;
  } else {
    return 0;
  }
  if (q[j] <= 0.0) return 1;
  if (q[j] >= hi) return -1;
  return 0;
}

struct DampedSolve {
  Eigen::VectorXd delta;
  double objective;
};

DampedSolve damped_solve(const Eigen::Matrix<double, 3, Eigen::Dynamic>& jac, const Vec3& err, double damping) {
  const Mat3 gram = jac * jac.transpose() + damping * damping * Mat3::Identity();
  const Eigen::LLT<Mat3> llt(gram);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-15) {
    throw Error(ErrorCode::SingularUpdate, "J J^T + damping^2 I is numerically singular");
  }
  DampedSolve out{jac.transpose() * llt.solve(err), 0.0};
  out.objective = (jac * out.delta - err).squaredNorm() + damping * damping * out.delta.squaredNorm();
  return out;
}

// Minimizes |J d - e|^2 + damping^2 |d|^2 with DOFs on a bound only allowed to
// move inward. Enumerates which bound DOFs are held; d is at most 7.
// Without bounds this is J^T (J J^T + damping^2 I)^-1 e.
Eigen::VectorXd dls_update(const RobotSpec& spec, const Eigen::VectorXd& q,
                           const Eigen::Matrix<double, 3, Eigen::Dynamic>& jac, const Vec3& err,
                           const IkSettings& settings) {
  const Eigen::Index d = jac.cols();
  std::vector<Eigen::Index> bound;
  std::vector<int> side(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    side[static_cast<std::size_t>(j)] = bound_side(spec, q, j);
    if (side[static_cast<std::size_t>(j)] != 0) bound.push_back(j);
  }
  Eigen::VectorXd best;
  double best_objective = std::numeric_limits<double>::infinity();
  const std::uint32_t subsets = 1u << bound.size();
  for (std::uint32_t held = 0; held < subsets; ++held) {
    Eigen::Matrix<double, 3, Eigen::Dynamic> reduced = jac;
    for (std::size_t b = 0; b < bound.size(); ++b) {
      if (held & (1u << b)) reduced.col(bound[b]).setZero();
    }
    const DampedSolve s = damped_solve(reduced, err, settings.damping);
    bool feasible = true;
    for (std::size_t b = 0; b < bound.size() && feasible; ++b) {
      const Eigen::Index j = bound[b];
      feasible = s.delta[j] * side[static_cast<std::size_t>(j)] >= 0.0;
    }
    if (feasible && s.objective < best_objective) {
      best_objective = s.objective;
      best = s.delta;
    }
  }
  return best;
}

}  // namespace

void validate(const IkSettings& settings) {
  if (!(settings.damping > 0.0)) throw Error(ErrorCode::InvalidConfig, "IK damping must be positive");
  if (!(settings.tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "IK tolerance must be positive");
  if (settings.max_iters < 1) throw Error(ErrorCode::InvalidConfig, "IK max_iters must be >= 1");
  for (double h : settings.fd_step) {
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidConfig, "finite-difference steps must be positive");
  }
}

Eigen::Matrix<double, 3, Eigen::Dynamic> tip_jacobian(const RobotSpec& spec, const Config& config,
                                                      const IkSettings& settings) {
  const auto d = static_cast<Eigen::Index>(spec.dof());
  if (!settings.fd_step.empty() && static_cast<Eigen::Index>(settings.fd_step.size()) != d) {
    throw Error(ErrorCode::DimensionMismatch, "fd_step needs one entry per DOF");
  }
  const Eigen::VectorXd q = to_dof_vector(spec, config);
  Eigen::Matrix<double, 3, Eigen::Dynamic> jac(3, d);
  if (settings.exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < d; ++j) jac.col(j) = jacobian_column(spec, q, j, settings);
  } else {
    for (Eigen::Index j = 0; j < d; ++j) jac.col(j) = jacobian_column(spec, q, j, settings);
  }
  return jac;
}

IkStep ik_refine(const RobotSpec& spec, const Config& config, const Vec3& tip, const Vec3& target,
                 const IkSettings& settings) {
  const Vec3 err = target - tip;
  const double err_norm = err.norm();
  IkStep out{config, tip, err_norm, false};
  if (err_norm == 0.0) return out;

  const Eigen::VectorXd q = to_dof_vector(spec, config);
  const Eigen::VectorXd delta = dls_update(spec, q, tip_jacobian(spec, config, settings), err, settings);

  double scale = settings.step_scale;
  for (int attempt = 0; attempt <= settings.max_halvings; ++attempt, scale *= 0.5) {
    Config trial = clamp_config(spec, q + scale * delta);
    if (trial == config) break;
    const Vec3 trial_tip = forward_tip(spec, trial, settings.fk_steps);
    const double trial_err = (target - trial_tip).norm();
    if (trial_err <= err_norm) {
      out = IkStep{std::move(trial), trial_tip, trial_err, true};
      break;
    }
  }
  return out;
}

Config ik_step(const RobotSpec& spec, const Config& config, const Vec3& target,
               const IkSettings& settings) {
  return ik_refine(spec, config, forward_tip(spec, config, settings.fk_steps), target, settings).config;
}

IkSolution solve_ik(const RobotSpec& spec, const Config& seed, const Vec3& target,
                    const IkSettings& settings) {
  validate(settings);
  Config current = seed;
  Vec3 tip = forward_tip(spec, seed, settings.fk_steps);
  IkSolution best{seed, tip, (target - tip).norm(), 0};
  for (int it = 0; it < settings.max_iters && best.residual >= settings.tol; ++it) {
    IkStep step = ik_refine(spec, current, tip, target, settings);
    // A rejected step leaves the state unchanged, so every later iteration would too.
    if (!step.moved) break;
    current = std::move(step.config);
    tip = step.tip;
    if (step.error <= best.residual) best = IkSolution{current, tip, step.error, it + 1};
  }
  return best;
}

double ConfigTrajectory::mean_residual() const {
  if (residuals.empty()) return 0.0;
  return std::accumulate(residuals.begin(), residuals.end(), 0.0) / static_cast<double>(residuals.size());
}

ConfigTrajectory plan_config_trajectory(const RobotSpec& spec, const std::vector<Vec3>& trajectory,
                                        const Config& seed, const IkSettings& settings) {
  if (trajectory.empty()) throw Error(ErrorCode::EmptyInput, "trajectory has no waypoints");
  ConfigTrajectory out;
  out.waypoints.reserve(trajectory.size());
  out.tips.reserve(trajectory.size());
  out.residuals.reserve(trajectory.size());
  Config warm = seed;
  for (const auto& target : trajectory) {
    IkSolution sol = solve_ik(spec, warm, target, settings);
    warm = sol.config;
    out.waypoints.push_back(std::move(sol.config));
    out.tips.push_back(sol.tip);
    out.residuals.push_back(sol.residual);
  }
  return out;
}

}  // namespace tdlfd
