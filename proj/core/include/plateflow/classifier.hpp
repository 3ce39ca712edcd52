#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plateflow/flow.hpp"

namespace plateflow {

struct LabeledFeature {
  FeatureVector features;
  int class_index = 0;
};

/// Multinomial logistic model over feature vectors.
class SoftmaxClassifier {
 public:
  SoftmaxClassifier() = default;
  SoftmaxClassifier(int dim, int n_classes);

  int dim() const { return static_cast<int>(weights_.cols()); }
  int n_classes() const { return static_cast<int>(weights_.rows()); }

  /// Softmax probabilities; entries in (0, 1), summing to 1.
  Eigen::VectorXd probabilities(const FeatureVector& x) const;
  int predict(const FeatureVector& x) const;

  Eigen::MatrixXd& weights() { return weights_; }
  Eigen::VectorXd& biases() { return biases_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& biases() const { return biases_; }

  void save(const std::string& path) const;
  static SoftmaxClassifier load(const std::string& path);

 private:
  Eigen::MatrixXd weights_;  // n_classes x dim
  Eigen::VectorXd biases_;   // n_classes
};

/// Smoothed one-hot target: (1 - epsilon) * onehot + epsilon / n_classes.
Eigen::VectorXd smoothed_target(int class_index, int n_classes, double epsilon);

struct ClassifierFitConfig {
  int max_steps = 3000;
  int batch_size = 64;
  std::vector<double> lr_schedule{0.5, 0.2, 0.05};
  std::uint64_t seed = 0;
  int log_every = 50;
};

struct ClassifierFitResult {
  std::vector<int> trace_steps;
  std::vector<double> loss_trace;  // smoothed cross-entropy on the full set
  int steps_run = 0;
};

/// Gradient descent on label-smoothed cross-entropy. Requires at least one
/// sample for every class index in [0, n_classes) and epsilon in [0, 0.5).
ClassifierFitResult train_classifier(SoftmaxClassifier& model,
                                     std::span<const LabeledFeature> samples, double epsilon,
                                     const ClassifierFitConfig& config);

/// Fraction of samples whose argmax matches the label.
double classifier_accuracy(const SoftmaxClassifier& model,
                           std::span<const LabeledFeature> samples);

}  // namespace plateflow
