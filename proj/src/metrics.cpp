#include "tdlfd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "tdlfd/error.hpp"

namespace tdlfd {

TipTrajectory resample_arclength(std::span<const Vec3> points, std::size_t count) {
  if (points.size() < 2 || count < 2) {
    throw Error(ErrorCode::DegenerateInput, "resampling needs at least two input and output points");
  }
  std::vector<double> cumulative(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (points[i] - points[i - 1]).norm();
  }
  const double total = cumulative.back();
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateInput, "polyline has zero length");

  TipTrajectory out(count);
  out.front() = points.front();
  out.back() = points.back();
  std::size_t seg = 1;
  for (std::size_t j = 1; j + 1 < count; ++j) {
    const double target = total * static_cast<double>(j) / static_cast<double>(count - 1);
    while (seg + 1 < points.size() && cumulative[seg] < target) ++seg;
    const double len = cumulative[seg] - cumulative[seg - 1];
    const double t = len > 0.0 ? (target - cumulative[seg - 1]) / len : 0.0;
    out[j] = points[seg - 1] + t * (points[seg] - points[seg - 1]);
  }
  return out;
}

double frechet_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "Frechet distance of an empty curve");
  const std::size_t m = b.size();
  std::vector<double> prev(m);
  std::vector<double> cur(m);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = (a[i] - b[j]).norm();
      double reach;
      if (i == 0 && j == 0) {
        reach = d;
      } else if (i == 0) {
        reach = std::max(cur[j - 1], d);
      } else if (j == 0) {
        reach = std::max(prev[0], d);
      } else {
        reach = std::max(std::min({prev[j], prev[j - 1], cur[j - 1]}), d);
      }
      cur[j] = reach;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

TipTrajectory to_reference_context(const TipTrajectory& trajectory, const ContextVector& context) {
  if (context.schema != Schema::eight_plane) {
    throw Error(ErrorCode::SchemaMismatch, "reference scaling applies to eight_plane contexts only");
  }
  validate(context);
  const Vec3 p_ref = context.p_ref();
  const Vec3 divisor(context.values[3] * 40.0, 1.0, context.values[4] * 40.0);
  TipTrajectory out(trajectory.size());
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    out[i] = p_ref + (trajectory[i] - p_ref).cwiseQuotient(divisor);
  }
  return out;
}

TipTrajectory reference_displacement(const TipTrajectory& trajectory, const ContextVector& context) {
  TipTrajectory scaled = to_reference_context(trajectory, context);
  const Vec3 p_ref = context.p_ref();
  for (auto& p : scaled) p -= p_ref;
  return scaled;
}

TipTrajectory reference_curve(const TrainingSet& demos) {
  if (demos.contexts.empty()) throw Error(ErrorCode::EmptyInput, "no demonstrations for the reference curve");
  validate(demos);
  TipTrajectory mean(demos.waypoints(), Vec3::Zero());
  for (std::size_t d = 0; d < demos.size(); ++d) {
    const TipTrajectory disp = reference_displacement(demos.trajectories[d], demos.contexts[d]);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += disp[i];
  }
  const double inv = 1.0 / static_cast<double>(demos.size());
  for (auto& p : mean) p *= inv;
  return mean;
}

void EvaluationReport::summarize() {
  if (distances.empty()) {
    mean = std = 0.0;
    return;
  }
  const double n = static_cast<double>(distances.size());
  mean = std::accumulate(distances.begin(), distances.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : distances) ss += (d - mean) * (d - mean);
  std = std::sqrt(ss / n);
}

ExecutedTrajectory execute_prediction(const ContextModel& model, const ContextVector& context,
                                      const RobotSpec& robot, const IkSettings& ik) {
  ExecutedTrajectory out;
  out.predicted = predict(model, context);
  out.plan = plan_config_trajectory(robot, out.predicted, home_config(robot), ik);
  return out;
}

double case_distance(const TipTrajectory& executed, const EvaluationCase& c, EvalMode mode) {
  if (mode == EvalMode::vs_reference) {
    return frechet_distance(reference_displacement(executed, c.context), c.truth);
  }
  return frechet_distance(executed, c.truth);
}

EvaluationReport evaluate_model(const ContextModel& model, const std::vector<EvaluationCase>& cases,
                                EvalMode mode, const RobotSpec& robot, const IkSettings& ik,
                                const std::string& model_id, Exec exec) {
  if (cases.empty()) throw Error(ErrorCode::EmptyInput, "no evaluation cases");
  EvaluationReport report;
  report.model_id = model_id;
  report.mode = mode;
  const std::size_t n = cases.size();
  report.distances.resize(n);
  report.ik_residuals.resize(n);
  report.executed.resize(n);
  for (const auto& c : cases) report.contexts.push_back(c.context);

  IkSettings inner = ik;
  inner.exec = Exec::serial;
  auto run_case = [&](std::ptrdiff_t i) {
    const auto u = static_cast<std::size_t>(i);
    ExecutedTrajectory run = execute_prediction(model, cases[u].context, robot, inner);
    report.distances[u] = case_distance(run.plan.tips, cases[u], mode);
    report.ik_residuals[u] = run.plan.mean_residual();
    report.executed[u] = std::move(run.plan.tips);
  };
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) run_case(i);
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) run_case(i);
  }
  report.summarize();
  return report;
}

void write_report_csv(const EvaluationReport& report, std::ostream& out) {
  const Eigen::Index k = report.contexts.empty() ? 0 : report.contexts.front().values.size();
  out << "case";
  for (Eigen::Index j = 0; j < k; ++j) out << ",context_" << j;
  out << ",distance,mean_ik_residual\n";
  out.precision(17);
  for (std::size_t i = 0; i < report.distances.size(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < k; ++j) out << ',' << report.contexts[i].values[j];
    out << ',' << report.distances[i] << ',' << report.ik_residuals[i] << '\n';
  }
  const double mean_res =
      report.ik_residuals.empty()
          ? 0.0
          : std::accumulate(report.ik_residuals.begin(), report.ik_residuals.end(), 0.0) /
                static_cast<double>(report.ik_residuals.size());
  out << "summary";
  for (Eigen::Index j = 0; j < k; ++j) out << ',';
  out << ',' << report.mean << ',' << mean_res << '\n';
  out << "std";
  for (Eigen::Index j = 0; j < k; ++j) out << ',';
  out << ',' << report.std << ",\n";
}

}  // namespace tdlfd
