#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "tdlfd/kinematics.hpp"
#include "tdlfd/parallel.hpp"

namespace tdlfd {

using TipTrajectory = std::vector<Vec3>;

/// Context layouts, each ending in the constant bias element 1.
///   eight_plane:   [p_ref(3), w, h, 1]
///   double_sphere: [p_ref(3), r1, r2, 1]
///   anatomy:       [p_ref(3), s, 1]
/// `generic` accepts any length and only checks the trailing 1.
enum class Schema { eight_plane, double_sphere, anatomy, generic };

std::string_view to_string(Schema schema);
Schema schema_from_string(std::string_view name);
/// 0 for generic.
int schema_dim(Schema schema);

struct ContextVector {
  Schema schema = Schema::generic;
  Eigen::VectorXd values;

  Vec3 p_ref() const { return values.head<3>(); }
};

/// Throws DimensionMismatch on a wrong length, SchemaMismatch when the bias is not 1.
void validate(const ContextVector& context);

/// Appends the bias element and validates.
ContextVector make_context(Schema schema, const std::vector<double>& features);

/// User-entered context: the schema's features with or without the trailing 1.
/// Throws IncompleteContext on a wrong count, a non-finite value or a last
/// element other than 1 when the full length is given.
ContextVector context_from_values(Schema schema, const std::vector<double>& values);

Eigen::VectorXd flatten(const TipTrajectory& trajectory);
TipTrajectory unflatten(const Eigen::VectorXd& flat, std::size_t waypoints);

struct TrainingSet {
  Schema schema = Schema::generic;
  std::vector<ContextVector> contexts;
  std::vector<TipTrajectory> trajectories;

  std::size_t size() const { return contexts.size(); }
  std::size_t waypoints() const { return trajectories.empty() ? 0 : trajectories.front().size(); }
  Eigen::Index context_dim() const { return contexts.empty() ? 0 : contexts.front().values.size(); }

  /// D x k
  Eigen::MatrixXd context_matrix() const;
  /// D x 3M
  Eigen::MatrixXd trajectory_matrix() const;
};

/// Uniform schema, k and M; D >= 1. Throws EmptyInput / DimensionMismatch / SchemaMismatch.
void validate(const TrainingSet& data);

struct LinearRidgeModel {
  Eigen::MatrixXd weights;  // k x 3M
  double alpha = 0.0;
};

struct KernelRidgeModel {
  Eigen::MatrixXd centers;       // D_k x k
  Eigen::MatrixXd dual_weights;  // D_k x 3M
  double gamma = 1.0;
  double alpha = 0.0;
};

struct NetTraining {
  double learning_rate = 1e-3;
  int epochs = 5000;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  double weight_decay = 1e-3;  // L2 on weights (not biases), added to the gradient
};

struct TrajectoryNetModel {
  std::vector<int> layer_sizes;  // [k, hidden..., 3M]
  Eigen::VectorXd parameters;    // per layer: weights (column-major out x in), then biases
  Eigen::VectorXd input_mean, input_std;
  Eigen::VectorXd output_mean, output_std;
  NetTraining training;
  double final_loss = 0.0;  // mean squared waypoint-coordinate error on the training set, m^2
};

LinearRidgeModel train_linear_ridge(const TrainingSet& data, double alpha);

double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma);
double rbf_kernel(const ContextVector& a, const ContextVector& b, double gamma);

/// Gram matrix of the rows of `points`.
Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& points, double gamma, Exec exec = Exec::serial);

KernelRidgeModel train_kernel_ridge(const TrainingSet& data, double alpha, double gamma);

TrajectoryNetModel train_trajectory_net(const TrainingSet& data, const std::vector<int>& layer_sizes,
                                        const NetTraining& training);

/// Default architecture: two hidden layers of 128.
std::vector<int> default_hidden_layers();

namespace net {

std::size_t parameter_count(const std::vector<int>& layer_sizes);

/// He-style initialization, deterministic in `seed`.
Eigen::VectorXd initialize(const std::vector<int>& layer_sizes, std::uint64_t seed);

/// inputs: k x B, returns 3M x B.
Eigen::MatrixXd forward(const std::vector<int>& layer_sizes, const Eigen::VectorXd& parameters,
                        const Eigen::MatrixXd& inputs);

/// Mean squared error over all output entries; fills `gradient` when non-null.
double loss_and_gradient(const std::vector<int>& layer_sizes, const Eigen::VectorXd& parameters,
                         const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         Eigen::VectorXd* gradient);

}  // namespace net

enum class ModelFamily { linear, rbf, net };

std::string_view to_string(ModelFamily family);
ModelFamily family_from_string(std::string_view name);

struct ContextModel {
  Schema schema = Schema::generic;
  std::size_t waypoints = 0;
  std::variant<LinearRidgeModel, KernelRidgeModel, TrajectoryNetModel> impl;

  ModelFamily family() const { return static_cast<ModelFamily>(impl.index()); }
  Eigen::Index context_dim() const;
};

TipTrajectory predict(const ContextModel& model, const ContextVector& context);

struct HyperParams {
  double alpha = 0.01;
  double gamma = 10.0;
  std::vector<int> hidden = default_hidden_layers();
  NetTraining net;

  std::string label(ModelFamily family) const;
};

ContextModel train(ModelFamily family, const TrainingSet& data, const HyperParams& hyper);

/// Training objective of the fitted model on its own data: sum of squared
/// residuals plus the ridge penalty for the ridge families, the mean squared
/// error for the network.
double training_objective(const ContextModel& model, const TrainingSet& data);

/// Root-mean-square residual of predictions at the training contexts.
double training_residual(const ContextModel& model, const TrainingSet& data);

struct GridResult {
  std::vector<HyperParams> grid;
  std::vector<double> scores;
  std::size_t best = 0;
};

using ModelScorer = std::function<double(const ContextModel&)>;

/// Trains one model per grid point and keeps the lowest score, first on ties.
GridResult grid_search(const TrainingSet& data, ModelFamily family, const std::vector<HyperParams>& grid,
                       const ModelScorer& scorer, Exec exec = Exec::serial);

std::vector<HyperParams> linear_alpha_grid();
std::vector<HyperParams> rbf_grid();
std::vector<HyperParams> architecture_grid();

nlohmann::json model_to_json(const ContextModel& model);
ContextModel model_from_json(const nlohmann::json& doc);
void save_model(const ContextModel& model, const std::filesystem::path& path,
                const nlohmann::json& extra = nlohmann::json::object());
ContextModel load_model(const std::filesystem::path& path);

}  // namespace tdlfd
