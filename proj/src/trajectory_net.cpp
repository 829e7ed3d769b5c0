#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tdlfd/error.hpp"
#include "tdlfd/learning.hpp"

namespace tdlfd {

namespace net {

namespace {

struct LayerView {
  Eigen::Map<const Eigen::MatrixXd> weights;
  Eigen::Map<const Eigen::VectorXd> bias;
};

std::size_t layer_offset(const std::vector<int>& sizes, std::size_t layer) {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    off += static_cast<std::size_t>(sizes[l + 1]) * static_cast<std::size_t>(sizes[l] + 1);
  }
  return off;
}

LayerView layer(const std::vector<int>& sizes, const Eigen::VectorXd& params, std::size_t l) {
  const auto off = static_cast<Eigen::Index>(layer_offset(sizes, l));
  const int in = sizes[l];
  const int out = sizes[l + 1];
  return {Eigen::Map<const Eigen::MatrixXd>(params.data() + off, out, in),
          Eigen::Map<const Eigen::VectorXd>(params.data() + off + static_cast<Eigen::Index>(out) * in, out)};
}

void check_sizes(const std::vector<int>& sizes, const Eigen::VectorXd& params) {
  if (sizes.size() < 2 || std::any_of(sizes.begin(), sizes.end(), [](int s) { return s <= 0; })) {
    throw Error(ErrorCode::DimensionMismatch, "network needs at least an input and an output layer");
  }
  if (static_cast<std::size_t>(params.size()) != parameter_count(sizes)) {
    throw Error(ErrorCode::DimensionMismatch, "parameter vector does not match the layer sizes");
  }
}

}  // namespace

std::size_t parameter_count(const std::vector<int>& layer_sizes) {
  return layer_sizes.size() < 2 ? 0 : layer_offset(layer_sizes, layer_sizes.size() - 1);
}

Eigen::VectorXd initialize(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  Eigen::VectorXd params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count(layer_sizes)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const auto off = static_cast<Eigen::Index>(layer_offset(layer_sizes, l));
    const double scale = std::sqrt(2.0 / layer_sizes[l]);
    const Eigen::Index count = static_cast<Eigen::Index>(layer_sizes[l + 1]) * layer_sizes[l];
    for (Eigen::Index i = 0; i < count; ++i) params[off + i] = scale * normal(rng);
  }
  return params;
}

Eigen::MatrixXd forward(const std::vector<int>& layer_sizes, const Eigen::VectorXd& parameters,
                        const Eigen::MatrixXd& inputs) {
  check_sizes(layer_sizes, parameters);
  if (inputs.rows() != layer_sizes.front()) {
    throw Error(ErrorCode::DimensionMismatch, "network input has the wrong dimension");
  }
  Eigen::MatrixXd act = inputs;
  const std::size_t layers = layer_sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto v = layer(layer_sizes, parameters, l);
    Eigen::MatrixXd z = v.weights * act;
    z.colwise() += v.bias;
    act = l + 1 < layers ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return act;
}

double loss_and_gradient(const std::vector<int>& layer_sizes, const Eigen::VectorXd& parameters,
                         const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         Eigen::VectorXd* gradient) {
  check_sizes(layer_sizes, parameters);
  const std::size_t layers = layer_sizes.size() - 1;
  if (inputs.rows() != layer_sizes.front() || targets.rows() != layer_sizes.back() ||
      inputs.cols() != targets.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "network batch has the wrong shape");
  }

  // acts[l] is the input to layer l; pre[l] its pre-activation output.
  std::vector<Eigen::MatrixXd> acts(layers + 1);
  std::vector<Eigen::MatrixXd> pre(layers);
  acts[0] = inputs;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto v = layer(layer_sizes, parameters, l);
    pre[l] = v.weights * acts[l];
    pre[l].colwise() += v.bias;
    acts[l + 1] = l + 1 < layers ? Eigen::MatrixXd(pre[l].cwiseMax(0.0)) : pre[l];
  }
  const Eigen::MatrixXd diff = acts[layers] - targets;
  const double scale = 1.0 / static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() * scale;
  if (gradient == nullptr) return loss;

  gradient->setZero(parameters.size());
  Eigen::MatrixXd delta = 2.0 * scale * diff;
  for (std::size_t l = layers; l-- > 0;) {
    const auto off = static_cast<Eigen::Index>(layer_offset(layer_sizes, l));
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    Eigen::Map<Eigen::MatrixXd>(gradient->data() + off, out, in) = delta * acts[l].transpose();
    Eigen::Map<Eigen::VectorXd>(gradient->data() + off + static_cast<Eigen::Index>(out) * in, out) =
        delta.rowwise().sum();
    if (l > 0) {
      const auto v = layer(layer_sizes, parameters, l);
      delta = (v.weights.transpose() * delta).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

}  // namespace net

namespace {

void standardize_stats(const Eigen::MatrixXd& columns, Eigen::VectorXd& mean, Eigen::VectorXd& std) {
  mean = columns.rowwise().mean();
  std = ((columns.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
  for (Eigen::Index i = 0; i < std.size(); ++i) {
    if (!(std[i] > 1e-12)) std[i] = 1.0;
  }
}

}  // namespace

TrajectoryNetModel train_trajectory_net(const TrainingSet& data, const std::vector<int>& layer_sizes,
                                        const NetTraining& training) {
  if (data.contexts.empty()) throw Error(ErrorCode::DegenerateData, "no demonstrations to train on");
  validate(data);
  if (layer_sizes.size() < 2 || layer_sizes.front() != data.context_dim() ||
      layer_sizes.back() != static_cast<int>(3 * data.waypoints())) {
    throw Error(ErrorCode::DimensionMismatch, "layer sizes must start at k and end at 3M");
  }

  TrajectoryNetModel model;
  model.layer_sizes = layer_sizes;
  model.training = training;

  const Eigen::MatrixXd x = data.context_matrix().transpose();      // k x D
  const Eigen::MatrixXd y = data.trajectory_matrix().transpose();   // 3M x D
  standardize_stats(x, model.input_mean, model.input_std);
  standardize_stats(y, model.output_mean, model.output_std);
  const Eigen::MatrixXd xn = (x.colwise() - model.input_mean).array().colwise() / model.input_std.array();
  const Eigen::MatrixXd yn = (y.colwise() - model.output_mean).array().colwise() / model.output_std.array();

  Eigen::VectorXd theta = net::initialize(layer_sizes, training.seed);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd grad(theta.size());
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  // 1 on weight entries, 0 on biases.
  Eigen::VectorXd decay_mask = Eigen::VectorXd::Zero(theta.size());
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const auto off = static_cast<Eigen::Index>(net::parameter_count(
        std::vector<int>(layer_sizes.begin(), layer_sizes.begin() + static_cast<std::ptrdiff_t>(l) + 1)));
    decay_mask.segment(off, static_cast<Eigen::Index>(layer_sizes[l + 1]) * layer_sizes[l]).setOnes();
  }

  auto adam_step = [&](const Eigen::MatrixXd& in, const Eigen::MatrixXd& target) {
    net::loss_and_gradient(layer_sizes, theta, in, target, &grad);
    if (training.weight_decay > 0.0) grad += training.weight_decay * decay_mask.cwiseProduct(theta);
    beta1_t *= beta1;
    beta2_t *= beta2;
    m1 = beta1 * m1 + (1.0 - beta1) * grad;
    m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double step = training.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
    theta.array() -= step * m1.array() / (m2.array().sqrt() + eps);
  };

  const auto d = static_cast<Eigen::Index>(data.size());
  const bool full_batch = training.batch_size <= 0 || training.batch_size >= d;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 shuffle_rng(training.seed ^ 0x9e3779b97f4a7c15ULL);

  for (int epoch = 0; epoch < training.epochs; ++epoch) {
    if (full_batch) {
      adam_step(xn, yn);
      continue;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (Eigen::Index start = 0; start < d; start += training.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(training.batch_size, d - start);
      Eigen::MatrixXd bx(xn.rows(), count);
      Eigen::MatrixXd by(yn.rows(), count);
      for (Eigen::Index j = 0; j < count; ++j) {
        bx.col(j) = xn.col(order[static_cast<std::size_t>(start + j)]);
        by.col(j) = yn.col(order[static_cast<std::size_t>(start + j)]);
      }
      adam_step(bx, by);
    }
  }

  model.parameters = std::move(theta);
  const Eigen::MatrixXd pred =
      (net::forward(layer_sizes, model.parameters, xn).array().colwise() * model.output_std.array()).colwise() +
      model.output_mean.array();
  model.final_loss = (pred - y).squaredNorm() / static_cast<double>(y.size());
  return model;
}

}  // namespace tdlfd
