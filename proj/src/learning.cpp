#include "tdlfd/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>

#include "tdlfd/error.hpp"

namespace tdlfd {

namespace {

// Symmetric positive (semi-)definite solve; rejects systems that are singular
// to working precision.
Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
  const double tiny = static_cast<double>(a.rows()) * std::numeric_limits<double>::epsilon() * d.maxCoeff();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || d.minCoeff() <= tiny || ldlt.rcond() < 1e-15) {
    throw Error(ErrorCode::SingularSystem, std::string(what) + " is singular to working precision");
  }
  return ldlt.solve(b);
}

Eigen::RowVectorXd kernel_features(const Eigen::MatrixXd& centers, const Eigen::VectorXd& x,
                                   double gamma) {
  Eigen::RowVectorXd phi(centers.rows());
  for (Eigen::Index j = 0; j < centers.rows(); ++j) {
    phi[j] = std::exp(-gamma * (centers.row(j).transpose() - x).squaredNorm());
  }
  return phi;
}

Eigen::VectorXd predict_flat(const ContextModel& model, const Eigen::VectorXd& x) {
  return std::visit(
      [&](const auto& m) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearRidgeModel>) {
          return m.weights.transpose() * x;
        } else if constexpr (std::is_same_v<T, KernelRidgeModel>) {
          return (kernel_features(m.centers, x, m.gamma) * m.dual_weights).transpose();
        } else {
          const Eigen::VectorXd z = (x - m.input_mean).cwiseQuotient(m.input_std);
          const Eigen::VectorXd y = net::forward(m.layer_sizes, m.parameters, z).col(0);
          return y.cwiseProduct(m.output_std) + m.output_mean;
        }
      },
      model.impl);
}

}  // namespace

std::string_view to_string(Schema schema) {
  switch (schema) {
    case Schema::eight_plane: return "eight_plane";
    case Schema::double_sphere: return "double_sphere";
    case Schema::anatomy: return "anatomy";
    case Schema::generic: return "generic";
  }
  return "generic";
}

Schema schema_from_string(std::string_view name) {
  if (name == "eight_plane" || name == "eight") return Schema::eight_plane;
  if (name == "double_sphere" || name == "sphere") return Schema::double_sphere;
  if (name == "anatomy") return Schema::anatomy;
  if (name == "generic") return Schema::generic;
  throw Error(ErrorCode::SchemaMismatch, "unknown context schema '" + std::string(name) + "'");
}

int schema_dim(Schema schema) {
  switch (schema) {
    case Schema::eight_plane: return 6;
    case Schema::double_sphere: return 6;
    case Schema::anatomy: return 5;
    case Schema::generic: return 0;
  }
  return 0;
}

void validate(const ContextVector& context) {
  const int k = schema_dim(context.schema);
  if (context.values.size() == 0 || (k != 0 && context.values.size() != k)) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(to_string(context.schema)) + " context needs " + std::to_string(k) +
                    " values, got " + std::to_string(context.values.size()));
  }
  if (!context.values.allFinite()) throw Error(ErrorCode::DimensionMismatch, "context has non-finite values");
  if (context.values[context.values.size() - 1] != 1.0) {
    throw Error(ErrorCode::SchemaMismatch, "context must end with the bias element 1");
  }
}

ContextVector make_context(Schema schema, const std::vector<double>& features) {
  ContextVector c{schema, Eigen::VectorXd(static_cast<Eigen::Index>(features.size() + 1))};
  for (std::size_t i = 0; i < features.size(); ++i) c.values[static_cast<Eigen::Index>(i)] = features[i];
  c.values[c.values.size() - 1] = 1.0;
  validate(c);
  return c;
}

ContextVector context_from_values(Schema schema, const std::vector<double>& values) {
  if (schema == Schema::generic) {
    if (values.empty()) throw Error(ErrorCode::IncompleteContext, "empty context");
    std::vector<double> features = values;
    if (features.back() == 1.0) features.pop_back();
    return make_context(schema, features);
  }
  const auto k = static_cast<std::size_t>(schema_dim(schema));
  std::vector<double> features = values;
  if (features.size() == k) {
    if (features.back() != 1.0) throw Error(ErrorCode::IncompleteContext, "last context value must be 1");
    features.pop_back();
  }
  if (features.size() + 1 != k) {
    throw Error(ErrorCode::IncompleteContext, std::string(to_string(schema)) + " context needs " +
                                                  std::to_string(k - 1) + " values, got " +
                                                  std::to_string(values.size()));
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw Error(ErrorCode::IncompleteContext, "context values must be finite");
  }
  return make_context(schema, features);
}

Eigen::VectorXd flatten(const TipTrajectory& trajectory) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(3 * trajectory.size()));
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    v.segment<3>(static_cast<Eigen::Index>(3 * i)) = trajectory[i];
  }
  return v;
}

TipTrajectory unflatten(const Eigen::VectorXd& flat, std::size_t waypoints) {
  if (flat.size() != static_cast<Eigen::Index>(3 * waypoints)) {
    throw Error(ErrorCode::DimensionMismatch, "cannot unflatten " + std::to_string(flat.size()) +
                                                  " values into " + std::to_string(waypoints) + " waypoints");
  }
  TipTrajectory t(waypoints);
  for (std::size_t i = 0; i < waypoints; ++i) t[i] = flat.segment<3>(static_cast<Eigen::Index>(3 * i));
  return t;
}

Eigen::MatrixXd TrainingSet::context_matrix() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(size()), context_dim());
  for (std::size_t i = 0; i < size(); ++i) x.row(static_cast<Eigen::Index>(i)) = contexts[i].values.transpose();
  return x;
}

Eigen::MatrixXd TrainingSet::trajectory_matrix() const {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(3 * waypoints()));
  for (std::size_t i = 0; i < size(); ++i) y.row(static_cast<Eigen::Index>(i)) = flatten(trajectories[i]).transpose();
  return y;
}

void validate(const TrainingSet& data) {
  if (data.contexts.empty()) throw Error(ErrorCode::EmptyInput, "training set is empty");
  if (data.contexts.size() != data.trajectories.size()) {
    throw Error(ErrorCode::DimensionMismatch, "contexts and trajectories differ in count");
  }
  const auto k = data.context_dim();
  const auto m = data.waypoints();
  if (m == 0) throw Error(ErrorCode::EmptyInput, "trajectories have no waypoints");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.contexts[i].schema != data.schema) {
      throw Error(ErrorCode::SchemaMismatch, "demonstration " + std::to_string(i) + " has schema " +
                                                 std::string(to_string(data.contexts[i].schema)));
    }
    validate(data.contexts[i]);
    if (data.contexts[i].values.size() != k || data.trajectories[i].size() != m) {
      throw Error(ErrorCode::DimensionMismatch, "demonstration " + std::to_string(i) + " has non-uniform shape");
    }
  }
}

LinearRidgeModel train_linear_ridge(const TrainingSet& data, double alpha) {
  validate(data);
  if (!(alpha >= 0.0)) throw Error(ErrorCode::SingularSystem, "alpha must be non-negative");
  const Eigen::MatrixXd x = data.context_matrix();
  const Eigen::MatrixXd y = data.trajectory_matrix();
  Eigen::MatrixXd normal = x.transpose() * x;
  normal.diagonal().array() += alpha;
  return {spd_solve(normal, x.transpose() * y, "X^T X + alpha I"), alpha};
}

double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "kernel arguments differ in dimension");
  }
  return std::exp(-gamma * (a - b).squaredNorm());
}

double rbf_kernel(const ContextVector& a, const ContextVector& b, double gamma) {
  return rbf_kernel(a.values, b.values, gamma);
}

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& points, double gamma, Exec exec) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd g(n, n);
  auto fill_row = [&](Eigen::Index i) {
    g(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = std::exp(-gamma * (points.row(i) - points.row(j)).squaredNorm());
      g(i, j) = v;
      g(j, i) = v;
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (Eigen::Index i = 0; i < n; ++i) fill_row(i);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) fill_row(i);
  }
  return g;
}

KernelRidgeModel train_kernel_ridge(const TrainingSet& data, double alpha, double gamma) {
  validate(data);
  if (!(gamma > 0.0)) throw Error(ErrorCode::SingularSystem, "gamma must be positive");
  if (!(alpha >= 0.0)) throw Error(ErrorCode::SingularSystem, "alpha must be non-negative");
  KernelRidgeModel m;
  m.centers = data.context_matrix();
  m.gamma = gamma;
  m.alpha = alpha;
  Eigen::MatrixXd g = rbf_gram(m.centers, gamma);
  g.diagonal().array() += alpha;
  m.dual_weights = spd_solve(g, data.trajectory_matrix(), "G + alpha I");
  return m;
}

std::vector<int> default_hidden_layers() { return {128, 128}; }

std::string_view to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::linear: return "linear";
    case ModelFamily::rbf: return "rbf";
    case ModelFamily::net: return "net";
  }
  return "linear";
}

ModelFamily family_from_string(std::string_view name) {
  if (name == "linear") return ModelFamily::linear;
  if (name == "rbf" || name == "kernel") return ModelFamily::rbf;
  if (name == "net" || name == "network") return ModelFamily::net;
  throw Error(ErrorCode::ParseError, "unknown model family '" + std::string(name) + "'");
}

Eigen::Index ContextModel::context_dim() const {
  return std::visit(
      [](const auto& m) -> Eigen::Index {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearRidgeModel>) {
          return m.weights.rows();
        } else if constexpr (std::is_same_v<T, KernelRidgeModel>) {
          return m.centers.cols();
        } else {
          return m.layer_sizes.empty() ? 0 : m.layer_sizes.front();
        }
      },
      impl);
}

TipTrajectory predict(const ContextModel& model, const ContextVector& context) {
  if (model.schema != Schema::generic && context.schema != model.schema) {
    throw Error(ErrorCode::SchemaMismatch, "model expects " + std::string(to_string(model.schema)) +
                                               " context, got " + std::string(to_string(context.schema)));
  }
  if (context.values.size() != model.context_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(model.context_dim()) +
                                                  " context values, got " + std::to_string(context.values.size()));
  }
  return unflatten(predict_flat(model, context.values), model.waypoints);
}

std::string HyperParams::label(ModelFamily family) const {
  std::ostringstream os;
  switch (family) {
    case ModelFamily::linear:
      os << "alpha=" << alpha;
      break;
    case ModelFamily::rbf:
      os << "gamma=" << gamma << " alpha=" << alpha;
      break;
    case ModelFamily::net: {
      os << hidden.size() << "x" << (hidden.empty() ? 0 : hidden.front());
      const bool uniform = std::all_of(hidden.begin(), hidden.end(), [&](int h) { return h == hidden.front(); });
      if (!uniform) {
        os << " [";
        for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
        os << "]";
      }
      break;
    }
  }
  return os.str();
}

ContextModel train(ModelFamily family, const TrainingSet& data, const HyperParams& hyper) {
  validate(data);
  ContextModel model;
  model.schema = data.schema;
  model.waypoints = data.waypoints();
  switch (family) {
    case ModelFamily::linear:
      model.impl = train_linear_ridge(data, hyper.alpha);
      break;
    case ModelFamily::rbf:
      model.impl = train_kernel_ridge(data, hyper.alpha, hyper.gamma);
      break;
    case ModelFamily::net: {
      std::vector<int> sizes{static_cast<int>(data.context_dim())};
      sizes.insert(sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
      sizes.push_back(static_cast<int>(3 * data.waypoints()));
      model.impl = train_trajectory_net(data, sizes, hyper.net);
      break;
    }
  }
  return model;
}

double training_objective(const ContextModel& model, const TrainingSet& data) {
  validate(data);
  const Eigen::MatrixXd x = data.context_matrix();
  const Eigen::MatrixXd y = data.trajectory_matrix();
  Eigen::MatrixXd pred(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) pred.row(i) = predict_flat(model, x.row(i).transpose()).transpose();
  const double sse = (pred - y).squaredNorm();
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearRidgeModel>) {
          return sse + m.alpha * m.weights.squaredNorm();
        } else if constexpr (std::is_same_v<T, KernelRidgeModel>) {
          // RKHS penalty alpha * tr(W^T G W), the objective (G + alpha I)^-1 Y minimizes
          const Eigen::MatrixXd g = rbf_gram(m.centers, m.gamma);
          return sse + m.alpha * (m.dual_weights.transpose() * g * m.dual_weights).trace();
        } else {
          return sse / static_cast<double>(y.size());
        }
      },
      model.impl);
}

double training_residual(const ContextModel& model, const TrainingSet& data) {
  validate(data);
  const Eigen::MatrixXd x = data.context_matrix();
  const Eigen::MatrixXd y = data.trajectory_matrix();
  double sse = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sse += (predict_flat(model, x.row(i).transpose()) - y.row(i).transpose()).squaredNorm();
  }
  return std::sqrt(sse / static_cast<double>(y.size()));
}

GridResult grid_search(const TrainingSet& data, ModelFamily family, const std::vector<HyperParams>& grid,
                       const ModelScorer& scorer, Exec exec) {
  if (grid.empty()) throw Error(ErrorCode::EmptyInput, "hyperparameter grid is empty");
  validate(data);
  GridResult result{grid, std::vector<double>(grid.size()), 0};
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  auto score_point = [&](std::ptrdiff_t i) {
    const auto u = static_cast<std::size_t>(i);
    result.scores[u] = scorer(train(family, data, grid[u]));
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) score_point(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) score_point(i);
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (result.scores[i] < result.scores[result.best]) result.best = i;
  }
  return result;
}

std::vector<HyperParams> linear_alpha_grid() {
  std::vector<HyperParams> grid;
  for (double a : {0.01, 0.1, 1.0, 10.0}) {
    HyperParams h;
    h.alpha = a;
    grid.push_back(h);
  }
  return grid;
}

std::vector<HyperParams> rbf_grid() {
  std::vector<HyperParams> grid;
  for (double g : {0.01, 0.1, 1.0, 10.0}) {
    for (double a : {0.01, 0.1, 1.0, 10.0}) {
      HyperParams h;
      h.gamma = g;
      h.alpha = a;
      grid.push_back(h);
    }
  }
  return grid;
}

std::vector<HyperParams> architecture_grid() {
  std::vector<HyperParams> grid;
  const std::vector<std::vector<int>> archs{{16, 16},     {32, 32},     {64, 64},     {128, 128},
                                            {32, 32, 32}, {64, 64, 64}, {128, 128, 128}};
  for (const auto& a : archs) {
    HyperParams h;
    h.hidden = a;
    grid.push_back(h);
  }
  return grid;
}

}  // namespace tdlfd
