#include "plateflow/classifier.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "plateflow/errors.hpp"
#include "plateflow/rng.hpp"

namespace plateflow {

SoftmaxClassifier::SoftmaxClassifier(int dim, int n_classes) {
  if (dim < 1 || n_classes < 2) throw ConfigError("classifier needs dim >= 1 and >= 2 classes");
  weights_ = Eigen::MatrixXd::Zero(n_classes, dim);
  biases_ = Eigen::VectorXd::Zero(n_classes);
}

Eigen::VectorXd SoftmaxClassifier::probabilities(const FeatureVector& x) const {
  if (x.size() != dim()) throw DataError("classifier: dimension mismatch");
  Eigen::VectorXd logits = weights_ * x + biases_;
  const double peak = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - peak).exp();
  return p / p.sum();
}

int SoftmaxClassifier::predict(const FeatureVector& x) const {
  Eigen::Index best = 0;
  probabilities(x).maxCoeff(&best);
  return static_cast<int>(best);
}

void SoftmaxClassifier::save(const std::string& path) const {
  nlohmann::ordered_json j;
  j["dim"] = dim();
  j["n_classes"] = n_classes();
  j["weights"] = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(weights_.cols()));
    for (Eigen::Index c = 0; c < weights_.cols(); ++c) row[static_cast<std::size_t>(c)] = weights_(r, c);
    j["weights"].push_back(row);
  }
  std::vector<double> biases(static_cast<std::size_t>(biases_.size()));
  for (Eigen::Index i = 0; i < biases_.size(); ++i) biases[static_cast<std::size_t>(i)] = biases_[i];
  j["biases"] = biases;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write classifier: " + path);
  out << j.dump(2) << '\n';
}

SoftmaxClassifier SoftmaxClassifier::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open classifier: " + path);
  nlohmann::json j;
  try {
    in >> j;
    SoftmaxClassifier m(j.at("dim").get<int>(), j.at("n_classes").get<int>());
    const auto& w = j.at("weights");
    const auto& b = j.at("biases");
    if (static_cast<int>(w.size()) != m.n_classes() || static_cast<int>(b.size()) != m.n_classes())
      throw DataError("classifier shape mismatch: " + path);
    for (Eigen::Index r = 0; r < m.weights_.rows(); ++r) {
      const auto& row = w.at(static_cast<std::size_t>(r));
      if (static_cast<int>(row.size()) != m.dim())
        throw DataError("classifier shape mismatch: " + path);
      for (Eigen::Index c = 0; c < m.weights_.cols(); ++c)
        m.weights_(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    for (Eigen::Index i = 0; i < m.biases_.size(); ++i)
      m.biases_[i] = b.at(static_cast<std::size_t>(i)).get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed classifier JSON " + path + ": " + e.what());
  }
}

Eigen::VectorXd smoothed_target(int class_index, int n_classes, double epsilon) {
  if (epsilon < 0.0 || epsilon >= 0.5)
    throw ConfigError("label smoothing epsilon must lie in [0, 0.5)");
  if (class_index < 0 || class_index >= n_classes)
    throw DataError("smoothed_target: class index out of range");
  Eigen::VectorXd t = Eigen::VectorXd::Constant(n_classes, epsilon / n_classes);
  t[class_index] += 1.0 - epsilon;
  return t;
}

ClassifierFitResult train_classifier(SoftmaxClassifier& model,
                                     std::span<const LabeledFeature> samples, double epsilon,
                                     const ClassifierFitConfig& config) {
  if (epsilon < 0.0 || epsilon >= 0.5)
    throw ConfigError("label smoothing epsilon must lie in [0, 0.5)");
  if (config.max_steps < 0 || config.batch_size < 1 || config.lr_schedule.empty())
    throw ConfigError("train_classifier: bad fit config");
  if (samples.empty()) throw DataError("train_classifier: no samples");

  const int n_classes = model.n_classes();
  std::vector<long> per_class(static_cast<std::size_t>(n_classes), 0);
  for (const auto& s : samples) {
    if (s.class_index < 0 || s.class_index >= n_classes)
      throw DataError("train_classifier: class index out of range");
    if (s.features.size() != model.dim())
      throw DataError("train_classifier: feature dimension mismatch");
    ++per_class[static_cast<std::size_t>(s.class_index)];
  }
  for (int k = 0; k < n_classes; ++k) {
    if (per_class[static_cast<std::size_t>(k)] == 0)
      throw DataError("train_classifier: no samples for class " + std::to_string(k));
  }

  // Precompute smoothed targets, one per class.
  std::vector<Eigen::VectorXd> targets;
  targets.reserve(static_cast<std::size_t>(n_classes));
  for (int k = 0; k < n_classes; ++k) targets.push_back(smoothed_target(k, n_classes, epsilon));

  auto full_loss = [&]() {
    double loss = 0.0;
    for (const auto& s : samples) {
      const Eigen::VectorXd p = model.probabilities(s.features);
      loss -= targets[static_cast<std::size_t>(s.class_index)]
                  .dot(p.array().max(1e-300).log().matrix());
    }
    return loss / static_cast<double>(samples.size());
  };

  ClassifierFitResult result;
  result.trace_steps.push_back(0);
  result.loss_trace.push_back(full_loss());

  Rng rng(config.seed);
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const int batch_n =
      static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                             samples.size()));

  const std::size_t n_stages = config.lr_schedule.size();
  for (int step = 1; step <= config.max_steps; ++step) {
    const std::size_t stage = std::min(
        n_stages - 1, static_cast<std::size_t>(static_cast<std::uint64_t>(step - 1) * n_stages /
                                               std::max(1, config.max_steps)));
    const double lr = config.lr_schedule[stage];

    if (cursor + static_cast<std::size_t>(batch_n) > order.size()) {
      rng.shuffle(order);
      cursor = 0;
    }
    Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(model.weights().rows(), model.weights().cols());
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(model.biases().size());
    for (int j = 0; j < batch_n; ++j) {
      const auto& s = samples[static_cast<std::size_t>(order[cursor + static_cast<std::size_t>(j)])];
      const Eigen::VectorXd p = model.probabilities(s.features);
      const Eigen::VectorXd delta = p - targets[static_cast<std::size_t>(s.class_index)];
      gw.noalias() += delta * s.features.transpose();
      gb += delta;
    }
    cursor += static_cast<std::size_t>(batch_n);
    const double scale = -lr / static_cast<double>(batch_n);
    model.weights() += scale * gw;
    model.biases() += scale * gb;

    result.steps_run = step;
    if (step % config.log_every == 0 || step == config.max_steps) {
      result.trace_steps.push_back(step);
      result.loss_trace.push_back(full_loss());
      if (!std::isfinite(result.loss_trace.back()))
        throw NumericError("train_classifier: diverged at step " + std::to_string(step));
    }
  }
  return result;
}

double classifier_accuracy(const SoftmaxClassifier& model,
                           std::span<const LabeledFeature> samples) {
  if (samples.empty()) throw DataError("classifier_accuracy: no samples");
  long correct = 0;
  for (const auto& s : samples) correct += model.predict(s.features) == s.class_index ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace plateflow
