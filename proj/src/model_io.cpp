#include <fstream>

#include "tdlfd/error.hpp"
#include "tdlfd/learning.hpp"

namespace tdlfd {

namespace {

using nlohmann::json;

constexpr int kModelFormatVersion = 1;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != c) throw Error(ErrorCode::ParseError, "ragged matrix in model file");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& arr) {
  const auto values = arr.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

json model_to_json(const ContextModel& model) {
  json doc{{"format", "tdlfd-model"},
           {"version", kModelFormatVersion},
           {"family", std::string(to_string(model.family()))},
           {"schema", std::string(to_string(model.schema))},
           {"waypoints", model.waypoints},
           {"context_dim", model.context_dim()}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearRidgeModel>) {
          doc["hyper"] = {{"alpha", m.alpha}};
          doc["weights"] = matrix_to_json(m.weights);
        } else if constexpr (std::is_same_v<T, KernelRidgeModel>) {
          doc["hyper"] = {{"alpha", m.alpha}, {"gamma", m.gamma}};
          doc["centers"] = matrix_to_json(m.centers);
          doc["dual_weights"] = matrix_to_json(m.dual_weights);
        } else {
          doc["hyper"] = {{"learning_rate", m.training.learning_rate},
                          {"epochs", m.training.epochs},
                          {"batch_size", m.training.batch_size},
                          {"seed", m.training.seed},
                          {"weight_decay", m.training.weight_decay}};
          doc["layer_sizes"] = m.layer_sizes;
          json layers = json::array();
          Eigen::Index off = 0;
          for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
            const int in = m.layer_sizes[l];
            const int out = m.layer_sizes[l + 1];
            const Eigen::MatrixXd w = Eigen::Map<const Eigen::MatrixXd>(m.parameters.data() + off, out, in);
            off += static_cast<Eigen::Index>(out) * in;
            const Eigen::VectorXd b = m.parameters.segment(off, out);
            off += out;
            layers.push_back({{"weights", matrix_to_json(w)}, {"bias", vector_to_json(b)}});
          }
          doc["layers"] = std::move(layers);
          doc["input_mean"] = vector_to_json(m.input_mean);
          doc["input_std"] = vector_to_json(m.input_std);
          doc["output_mean"] = vector_to_json(m.output_mean);
          doc["output_std"] = vector_to_json(m.output_std);
          doc["final_loss"] = m.final_loss;
        }
      },
      model.impl);
  return doc;
}

ContextModel model_from_json(const json& doc) {
  ContextModel model;
  try {
    if (doc.value("format", "") != "tdlfd-model") throw Error(ErrorCode::ParseError, "not a model file");
    model.schema = schema_from_string(doc.at("schema").get<std::string>());
    model.waypoints = doc.at("waypoints").get<std::size_t>();
    const auto& hyper = doc.at("hyper");
    switch (family_from_string(doc.at("family").get<std::string>())) {
      case ModelFamily::linear:
        model.impl = LinearRidgeModel{matrix_from_json(doc.at("weights")), hyper.at("alpha").get<double>()};
        break;
      case ModelFamily::rbf:
        model.impl = KernelRidgeModel{matrix_from_json(doc.at("centers")), matrix_from_json(doc.at("dual_weights")),
                                      hyper.at("gamma").get<double>(), hyper.at("alpha").get<double>()};
        break;
      case ModelFamily::net: {
        TrajectoryNetModel m;
        m.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
        m.parameters.resize(static_cast<Eigen::Index>(net::parameter_count(m.layer_sizes)));
        const auto& layers = doc.at("layers");
        if (layers.size() + 1 != m.layer_sizes.size()) throw Error(ErrorCode::ParseError, "layer count mismatch");
        Eigen::Index off = 0;
        for (std::size_t l = 0; l < layers.size(); ++l) {
          const Eigen::MatrixXd w = matrix_from_json(layers[l].at("weights"));
          const Eigen::VectorXd b = vector_from_json(layers[l].at("bias"));
          if (w.rows() != m.layer_sizes[l + 1] || w.cols() != m.layer_sizes[l] || b.size() != w.rows()) {
            throw Error(ErrorCode::ParseError, "layer " + std::to_string(l) + " has the wrong shape");
          }
          Eigen::Map<Eigen::MatrixXd>(m.parameters.data() + off, w.rows(), w.cols()) = w;
          off += w.size();
          m.parameters.segment(off, b.size()) = b;
          off += b.size();
        }
        m.input_mean = vector_from_json(doc.at("input_mean"));
        m.input_std = vector_from_json(doc.at("input_std"));
        m.output_mean = vector_from_json(doc.at("output_mean"));
        m.output_std = vector_from_json(doc.at("output_std"));
        m.training.learning_rate = hyper.at("learning_rate").get<double>();
        m.training.epochs = hyper.at("epochs").get<int>();
        m.training.batch_size = hyper.at("batch_size").get<int>();
        m.training.seed = hyper.at("seed").get<std::uint64_t>();
        m.training.weight_decay = hyper.value("weight_decay", 0.0);
        m.final_loss = doc.value("final_loss", 0.0);
        model.impl = std::move(m);
        break;
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model file: ") + e.what());
  }
  return model;
}

void save_model(const ContextModel& model, const std::filesystem::path& path, const json& extra) {
  json doc = model_to_json(model);
  for (const auto& [key, value] : extra.items()) doc[key] = value;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write model file " + path.string());
  out << doc.dump() << '\n';
}

ContextModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace tdlfd
