#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace plateflow {

/// Standardized feature vector; the flow operates on these.
using FeatureVector = Eigen::VectorXd;

/// One-hidden-layer MLP, tanh nonlinearity, mapping dim/2 -> dim/2 reals.
struct CouplingNet {
  Eigen::MatrixXd w1;  // hidden x in
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // out x hidden
  Eigen::VectorXd b2;  // out

  Eigen::VectorXd apply(const Eigen::VectorXd& in) const {
    return w2 * (w1 * in + b1).array().tanh().matrix() + b2;
  }
};

/// Affine coupling layer: coordinates under the mask pass through unchanged
/// and condition an elementwise affine map of the remaining coordinates.
struct CouplingLayer {
  std::vector<std::uint8_t> mask;  // 1 = pass-through, exactly dim/2 ones
  std::vector<int> pass_idx;       // indices with mask == 1
  std::vector<int> act_idx;        // indices with mask == 0
  CouplingNet scale_net;
  CouplingNet shift_net;
};

struct LayerGrad {
  Eigen::MatrixXd scale_w1, scale_w2, shift_w1, shift_w2;
  Eigen::VectorXd scale_b1, scale_b2, shift_b1, shift_b2;
};

/// Per-parameter partials of the mean NLL over a batch; same shapes as the
/// model parameters.
struct GradientSet {
  std::vector<LayerGrad> layers;
  std::vector<double> flat() const;
};

/// Stack of affine coupling layers over a D-dimensional standard-normal base.
/// Forward maps feature space to latent space; log_prob adds the forward
/// log-determinant with positive sign.
class FlowModel {
 public:
  /// Empty model; usable only after assignment from create() or load().
  FlowModel() = default;

  /// Builds `n_layers` coupling layers with alternating half-masks. Scale and
  /// shift output layers start at zero, so the initial flow is the identity.
  /// Hidden weights are seeded uniform +-1/sqrt(fan_in).
  static FlowModel create(int dim, int n_layers, int hidden, std::uint64_t seed,
                          double scale_clamp = 3.0);

  int dim() const { return dim_; }
  int hidden() const { return hidden_; }
  int layer_count() const { return static_cast<int>(layers_.size()); }
  double scale_clamp() const { return scale_clamp_; }
  const std::vector<CouplingLayer>& layers() const { return layers_; }

  struct ForwardResult {
    FeatureVector z;
    double logdet;
  };

  /// Feature -> latent. logdet is the sum over layers of the clamped scale
  /// outputs on each layer's pass-through half.
  ForwardResult forward(const FeatureVector& x) const;

  /// Applies a single layer; logdet is that layer's contribution only.
  ForwardResult forward_layer(int index, const FeatureVector& x) const;

  /// Latent -> feature; exact inverse of forward.
  FeatureVector inverse(const FeatureVector& z) const;

  /// log p(x) = log N(forward(x).z; 0, I) + forward(x).logdet.
  /// Larger means more in-distribution.
  double log_prob(const FeatureVector& x) const;

  /// Clamped scale activation for one layer given its pass-through half.
  /// Exposed so tests can accumulate per-layer log-determinants independently.
  Eigen::VectorXd layer_scale(int layer, const Eigen::VectorXd& pass_half) const;

  // Flat parameter access (layer order; per layer scale then shift net;
  // each net w1 row-major, b1, w2 row-major, b2). Used by the optimizer,
  // serialization, and finite-difference checks.
  std::size_t parameter_count() const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);

  /// params += step * grads (grads must match this model's shapes).
  void apply_update(const GradientSet& grads, double step);

  GradientSet zero_gradients() const;

  // Single flat binary file, little-endian, magic "PFNF" + version byte.
  // Layout: magic[4], version u8, dim u32, n_layers u32, hidden u32,
  // scale_clamp f64, then per layer: mask bytes [dim], scale net params,
  // shift net params (each net: w1 row-major f64, b1, w2 row-major, b2).
  void save(const std::string& path) const;
  static FlowModel load(const std::string& path);

 private:
  int dim_ = 0;
  int hidden_ = 0;
  double scale_clamp_ = 3.0;
  std::vector<CouplingLayer> layers_;
};

/// Mean of -log_prob over the batch. Throws on an empty batch.
double nll_loss(const FlowModel& model, std::span<const FeatureVector> batch);

/// Mean NLL over the batch plus its gradient (accumulated into `out`,
/// which must come from zero_gradients()). Throws NumericError if the loss
/// or any gradient entry is non-finite.
double nll_loss_gradient(const FlowModel& model, std::span<const FeatureVector> batch,
                         GradientSet& out);

struct FitConfig {
  int max_steps = 3000;
  int batch_size = 64;
  std::vector<double> lr_schedule{1e-3, 1e-4, 1e-5};  // applied in equal spans
  std::uint64_t seed = 0;
  int log_every = 25;
  int patience = 0;          // logging intervals without val improvement; 0 = off
  double val_fraction = 0.1; // held out only when patience > 0
  int eval_subset = 4096;    // trace loss sample cap
};

struct FitResult {
  std::vector<int> trace_steps;    // step index per trace entry; starts at 0
  std::vector<double> loss_trace;  // NLL on the (capped) training subset
  std::vector<double> val_trace;   // NLL on the validation split, if held out
  int steps_run = 0;
  bool early_stopped = false;
};

/// Minibatch gradient descent on the NLL with a stepped learning-rate
/// schedule. Deterministic given the seed. Throws NumericError on divergence.
FitResult fit(FlowModel& model, const std::vector<FeatureVector>& data, const FitConfig& config);

}  // namespace plateflow
