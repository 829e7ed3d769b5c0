#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tdlfd/ik.hpp"
#include "tdlfd/learning.hpp"
#include "tdlfd/parallel.hpp"

namespace tdlfd {

/// M points at equal arc-length spacing along the polyline; endpoints copied exactly.
/// Throws DegenerateInput for a zero-length polyline.
TipTrajectory resample_arclength(std::span<const Vec3> points, std::size_t count);

/// Discrete Frechet distance (Eiter-Mannila recurrence) with Euclidean point distance.
double frechet_distance(std::span<const Vec3> a, std::span<const Vec3> b);

/// Rescales an eight-task trajectory into the reference context w = h = 1/40:
/// p' = p_ref + (p - p_ref) / (40 w, 1, 40 h).
TipTrajectory to_reference_context(const TipTrajectory& trajectory, const ContextVector& context);

/// Reference-context curve expressed as displacements from p_ref.
TipTrajectory reference_displacement(const TipTrajectory& trajectory, const ContextVector& context);

/// Index-wise mean of the reference displacements of all demonstrations,
/// anchored at the origin. Throws EmptyInput.
TipTrajectory reference_curve(const TrainingSet& demos);

enum class EvalMode { vs_reference, vs_demo };

struct EvaluationCase {
  ContextVector context;
  TipTrajectory truth;  // reference curve (vs_reference) or held-out demonstration (vs_demo)
};

struct EvaluationReport {
  std::string model_id;
  EvalMode mode = EvalMode::vs_demo;
  std::vector<ContextVector> contexts;
  std::vector<double> distances;
  std::vector<double> ik_residuals;  // mean IK residual per case
  std::vector<TipTrajectory> executed;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation

  /// Recomputes mean and std from `distances`.
  void summarize();
};

struct ExecutedTrajectory {
  TipTrajectory predicted;
  ConfigTrajectory plan;
};

/// predict -> warm-started IK from the home configuration. The achieved tips
/// in `plan.tips` are the executed curve.
ExecutedTrajectory execute_prediction(const ContextModel& model, const ContextVector& context,
                                      const RobotSpec& robot, const IkSettings& ik);

/// Distance of an executed curve to a case's ground truth under `mode`.
double case_distance(const TipTrajectory& executed, const EvaluationCase& c, EvalMode mode);

EvaluationReport evaluate_model(const ContextModel& model, const std::vector<EvaluationCase>& cases,
                                EvalMode mode, const RobotSpec& robot, const IkSettings& ik,
                                const std::string& model_id = {}, Exec exec = Exec::serial);

/// One row per case (context..., distance, mean IK residual) then a summary row.
void write_report_csv(const EvaluationReport& report, std::ostream& out);

}  // namespace tdlfd
