#include "plateflow/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "plateflow/errors.hpp"
#include "plateflow/rng.hpp"

namespace plateflow {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'N', 'F'};
constexpr std::uint8_t kVersion = 1;
constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
  return out;
}

void scatter(Eigen::VectorXd& v, const std::vector<int>& idx, const Eigen::VectorXd& part) {
  for (std::size_t i = 0; i < idx.size(); ++i) v[idx[i]] = part[static_cast<Eigen::Index>(i)];
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

void scatter_rows(Eigen::MatrixXd& m, const std::vector<int>& idx, const Eigen::MatrixXd& part) {
  for (std::size_t i = 0; i < idx.size(); ++i) m.row(idx[i]) = part.row(static_cast<Eigen::Index>(i));
}

// Smooth scale bound: s = c * tanh(raw / c), keeping |s| < c.
Eigen::ArrayXXd clamp_scale(const Eigen::ArrayXXd& raw, double c) {
  return c * (raw / c).tanh();
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
}

void get_matrix(std::istream& in, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get_f64(in);
}

void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v[i]);
}

void get_vector(std::istream& in, Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get_f64(in);
}

void build_indices(CouplingLayer& layer) {
  layer.pass_idx.clear();
  layer.act_idx.clear();
  for (std::size_t i = 0; i < layer.mask.size(); ++i) {
    (layer.mask[i] ? layer.pass_idx : layer.act_idx).push_back(static_cast<int>(i));
  }
}

void validate_masks(const std::vector<CouplingLayer>& layers, int dim) {
  const std::size_t half = static_cast<std::size_t>(dim) / 2;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].mask.size() != static_cast<std::size_t>(dim))
      throw DataError("coupling mask length mismatch");
    std::size_t ones = 0;
    for (auto m : layers[k].mask) ones += (m != 0);
    if (ones != half) throw DataError("coupling mask must select exactly dim/2 coordinates");
    if (k > 0) {
      for (std::size_t i = 0; i < layers[k].mask.size(); ++i) {
        if ((layers[k].mask[i] != 0) == (layers[k - 1].mask[i] != 0))
          throw DataError("consecutive coupling masks must alternate");
      }
    }
  }
}

}  // namespace

std::vector<double> GradientSet::flat() const {
  std::vector<double> out;
  auto push_net = [&out](const Eigen::MatrixXd& w1, const Eigen::VectorXd& b1,
                         const Eigen::MatrixXd& w2, const Eigen::VectorXd& b2) {
    for (Eigen::Index r = 0; r < w1.rows(); ++r)
      for (Eigen::Index c = 0; c < w1.cols(); ++c) out.push_back(w1(r, c));
    for (Eigen::Index i = 0; i < b1.size(); ++i) out.push_back(b1[i]);
    for (Eigen::Index r = 0; r < w2.rows(); ++r)
      for (Eigen::Index c = 0; c < w2.cols(); ++c) out.push_back(w2(r, c));
    for (Eigen::Index i = 0; i < b2.size(); ++i) out.push_back(b2[i]);
  };
  for (const auto& l : layers) {
    push_net(l.scale_w1, l.scale_b1, l.scale_w2, l.scale_b2);
    push_net(l.shift_w1, l.shift_b1, l.shift_w2, l.shift_b2);
  }
  return out;
}

FlowModel FlowModel::create(int dim, int n_layers, int hidden, std::uint64_t seed,
                            double scale_clamp) {
  if (dim < 2 || dim % 2 != 0)
    throw ConfigError("flow dimension must be even and >= 2, got " + std::to_string(dim));
  if (n_layers < 0) throw ConfigError("flow layer count must be >= 0");
  if (hidden < 1) throw ConfigError("flow hidden width must be >= 1");
  if (!(scale_clamp > 0.0)) throw ConfigError("scale clamp must be positive");

  FlowModel m;
  m.dim_ = dim;
  m.hidden_ = hidden;
  m.scale_clamp_ = scale_clamp;
  m.layers_.resize(static_cast<std::size_t>(n_layers));

  const int half = dim / 2;
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(half));

  for (int k = 0; k < n_layers; ++k) {
    auto& layer = m.layers_[static_cast<std::size_t>(k)];
    layer.mask.assign(static_cast<std::size_t>(dim), 0);
    // Alternate pass-through halves layer to layer.
    for (int i = 0; i < half; ++i) layer.mask[static_cast<std::size_t>(k % 2 == 0 ? i : half + i)] = 1;
    build_indices(layer);

    for (CouplingNet* net : {&layer.scale_net, &layer.shift_net}) {
      net->w1.resize(hidden, half);
      for (Eigen::Index r = 0; r < hidden; ++r)
        for (Eigen::Index c = 0; c < half; ++c) net->w1(r, c) = rng.uniform(-bound, bound);
      net->b1 = Eigen::VectorXd::Zero(hidden);
      // Zero output layer: the fresh flow is exactly the identity.
      net->w2 = Eigen::MatrixXd::Zero(half, hidden);
      net->b2 = Eigen::VectorXd::Zero(half);
    }
  }
  return m;
}

FlowModel::ForwardResult FlowModel::forward(const FeatureVector& x) const {
  if (x.size() != dim_) throw DataError("forward: dimension mismatch");
  FeatureVector z = x;
  double logdet = 0.0;
  for (const auto& layer : layers_) {
    const Eigen::VectorXd xa = gather(z, layer.pass_idx);
    const Eigen::VectorXd xb = gather(z, layer.act_idx);
    const Eigen::VectorXd s =
        clamp_scale(layer.scale_net.apply(xa).array(), scale_clamp_).matrix();
    const Eigen::VectorXd t = layer.shift_net.apply(xa);
    const Eigen::VectorXd yb = (xb.array() * s.array().exp() + t.array()).matrix();
    scatter(z, layer.act_idx, yb);
    logdet += s.sum();
  }
  if (!z.allFinite() || !std::isfinite(logdet))
    throw NumericError("forward: non-finite intermediate (exploding scale)");
  return {std::move(z), logdet};
}

FlowModel::ForwardResult FlowModel::forward_layer(int index, const FeatureVector& x) const {
  if (x.size() != dim_) throw DataError("forward_layer: dimension mismatch");
  const auto& layer = layers_.at(static_cast<std::size_t>(index));
  FeatureVector y = x;
  const Eigen::VectorXd xa = gather(y, layer.pass_idx);
  const Eigen::VectorXd xb = gather(y, layer.act_idx);
  const Eigen::VectorXd s = clamp_scale(layer.scale_net.apply(xa).array(), scale_clamp_).matrix();
  const Eigen::VectorXd t = layer.shift_net.apply(xa);
  scatter(y, layer.act_idx, (xb.array() * s.array().exp() + t.array()).matrix());
  return {std::move(y), s.sum()};
}

FeatureVector FlowModel::inverse(const FeatureVector& z) const {
  if (z.size() != dim_) throw DataError("inverse: dimension mismatch");
  FeatureVector x = z;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    const Eigen::VectorXd xa = gather(x, it->pass_idx);
    const Eigen::VectorXd yb = gather(x, it->act_idx);
    const Eigen::VectorXd s = clamp_scale(it->scale_net.apply(xa).array(), scale_clamp_).matrix();
    const Eigen::VectorXd t = it->shift_net.apply(xa);
    scatter(x, it->act_idx, ((yb.array() - t.array()) * (-s.array()).exp()).matrix());
  }
  if (!x.allFinite()) throw NumericError("inverse: non-finite intermediate");
  return x;
}

double FlowModel::log_prob(const FeatureVector& x) const {
  const auto fwd = forward(x);
  const double lp = -0.5 * fwd.z.squaredNorm() - 0.5 * dim_ * kLog2Pi + fwd.logdet;
  if (!std::isfinite(lp)) throw NumericError("log_prob: non-finite result");
  return lp;
}

Eigen::VectorXd FlowModel::layer_scale(int layer, const Eigen::VectorXd& pass_half) const {
  const auto& l = layers_.at(static_cast<std::size_t>(layer));
  return clamp_scale(l.scale_net.apply(pass_half).array(), scale_clamp_).matrix();
}

std::size_t FlowModel::parameter_count() const {
  const std::size_t half = static_cast<std::size_t>(dim_) / 2;
  const std::size_t h = static_cast<std::size_t>(hidden_);
  const std::size_t per_net = h * half + h + half * h + half;
  return layers_.size() * 2 * per_net;
}

std::vector<double> FlowModel::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  auto push_net = [&out](const CouplingNet& n) {
    for (Eigen::Index r = 0; r < n.w1.rows(); ++r)
      for (Eigen::Index c = 0; c < n.w1.cols(); ++c) out.push_back(n.w1(r, c));
    for (Eigen::Index i = 0; i < n.b1.size(); ++i) out.push_back(n.b1[i]);
    for (Eigen::Index r = 0; r < n.w2.rows(); ++r)
      for (Eigen::Index c = 0; c < n.w2.cols(); ++c) out.push_back(n.w2(r, c));
    for (Eigen::Index i = 0; i < n.b2.size(); ++i) out.push_back(n.b2[i]);
  };
  for (const auto& l : layers_) {
    push_net(l.scale_net);
    push_net(l.shift_net);
  }
  return out;
}

void FlowModel::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count())
    throw ConfigError("set_flat_parameters: wrong parameter count");
  std::size_t pos = 0;
  auto pull_net = [&values, &pos](CouplingNet& n) {
    for (Eigen::Index r = 0; r < n.w1.rows(); ++r)
      for (Eigen::Index c = 0; c < n.w1.cols(); ++c) n.w1(r, c) = values[pos++];
    for (Eigen::Index i = 0; i < n.b1.size(); ++i) n.b1[i] = values[pos++];
    for (Eigen::Index r = 0; r < n.w2.rows(); ++r)
      for (Eigen::Index c = 0; c < n.w2.cols(); ++c) n.w2(r, c) = values[pos++];
    for (Eigen::Index i = 0; i < n.b2.size(); ++i) n.b2[i] = values[pos++];
  };
  for (auto& l : layers_) {
    pull_net(l.scale_net);
    pull_net(l.shift_net);
  }
}

GradientSet FlowModel::zero_gradients() const {
  GradientSet g;
  g.layers.resize(layers_.size());
  const int half = dim_ / 2;
  for (auto& lg : g.layers) {
    lg.scale_w1 = Eigen::MatrixXd::Zero(hidden_, half);
    lg.scale_b1 = Eigen::VectorXd::Zero(hidden_);
    lg.scale_w2 = Eigen::MatrixXd::Zero(half, hidden_);
    lg.scale_b2 = Eigen::VectorXd::Zero(half);
    lg.shift_w1 = Eigen::MatrixXd::Zero(hidden_, half);
    lg.shift_b1 = Eigen::VectorXd::Zero(hidden_);
    lg.shift_w2 = Eigen::MatrixXd::Zero(half, hidden_);
    lg.shift_b2 = Eigen::VectorXd::Zero(half);
  }
  return g;
}

void FlowModel::apply_update(const GradientSet& grads, double step) {
  if (grads.layers.size() != layers_.size())
    throw ConfigError("apply_update: gradient shape mismatch");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    auto& l = layers_[k];
    const auto& g = grads.layers[k];
    l.scale_net.w1 += step * g.scale_w1;
    l.scale_net.b1 += step * g.scale_b1;
    l.scale_net.w2 += step * g.scale_w2;
    l.scale_net.b2 += step * g.scale_b2;
    l.shift_net.w1 += step * g.shift_w1;
    l.shift_net.b1 += step * g.shift_b1;
    l.shift_net.w2 += step * g.shift_w2;
    l.shift_net.b2 += step * g.shift_b2;
  }
}

void FlowModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write flow model: " + path);
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(dim_));
  put_u32(out, static_cast<std::uint32_t>(layers_.size()));
  put_u32(out, static_cast<std::uint32_t>(hidden_));
  put_f64(out, scale_clamp_);
  for (const auto& l : layers_) {
    out.write(reinterpret_cast<const char*>(l.mask.data()),
              static_cast<std::streamsize>(l.mask.size()));
    for (const CouplingNet* net : {&l.scale_net, &l.shift_net}) {
      put_matrix(out, net->w1);
      put_vector(out, net->b1);
      put_matrix(out, net->w2);
      put_vector(out, net->b2);
    }
  }
  if (!out) throw DataError("short write: " + path);
}

FlowModel FlowModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open flow model: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a flow model file (bad magic): " + path);
  const int version = in.get();
  if (version != kVersion)
    throw DataError("unsupported flow model version " + std::to_string(version) + ": " + path);

  FlowModel m;
  m.dim_ = static_cast<int>(get_u32(in));
  const auto n_layers = get_u32(in);
  m.hidden_ = static_cast<int>(get_u32(in));
  m.scale_clamp_ = get_f64(in);
  if (!in || m.dim_ < 2 || m.dim_ % 2 != 0 || m.hidden_ < 1 || !(m.scale_clamp_ > 0))
    throw DataError("corrupt flow model header: " + path);

  const int half = m.dim_ / 2;
  m.layers_.resize(n_layers);
  for (auto& l : m.layers_) {
    l.mask.resize(static_cast<std::size_t>(m.dim_));
    in.read(reinterpret_cast<char*>(l.mask.data()), static_cast<std::streamsize>(l.mask.size()));
    for (CouplingNet* net : {&l.scale_net, &l.shift_net}) {
      net->w1.resize(m.hidden_, half);
      net->b1.resize(m.hidden_);
      net->w2.resize(half, m.hidden_);
      net->b2.resize(half);
      get_matrix(in, net->w1);
      get_vector(in, net->b1);
      get_matrix(in, net->w2);
      get_vector(in, net->b2);
    }
    build_indices(l);
  }
  if (!in) throw DataError("truncated flow model: " + path);
  in.get();
  if (!in.eof()) throw DataError("trailing bytes in flow model: " + path);
  validate_masks(m.layers_, m.dim_);
  return m;
}

double nll_loss(const FlowModel& model, std::span<const FeatureVector> batch) {
  if (batch.empty()) throw DataError("nll_loss: empty batch");
  double sum = 0.0;
  for (const auto& x : batch) sum += -model.log_prob(x);
  return sum / static_cast<double>(batch.size());
}

double nll_loss_gradient(const FlowModel& model, std::span<const FeatureVector> batch,
                         GradientSet& out) {
  if (batch.empty()) throw DataError("nll_loss_gradient: empty batch");
  const int dim = model.dim();
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd x(dim, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (batch[static_cast<std::size_t>(j)].size() != dim)
      throw DataError("nll_loss_gradient: dimension mismatch");
    x.col(j) = batch[static_cast<std::size_t>(j)];
  }

  const auto& layers = model.layers();
  const double c = model.scale_clamp();
  const double inv_n = 1.0 / static_cast<double>(n);

  struct Tape {
    Eigen::MatrixXd xa, xb, hs, ht, s, es;
  };
  std::vector<Tape> tapes(layers.size());

  double logdet_total = 0.0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    auto& tp = tapes[k];
    tp.xa = gather_rows(x, l.pass_idx);
    tp.xb = gather_rows(x, l.act_idx);
    tp.hs = ((l.scale_net.w1 * tp.xa).colwise() + l.scale_net.b1).array().tanh().matrix();
    tp.ht = ((l.shift_net.w1 * tp.xa).colwise() + l.shift_net.b1).array().tanh().matrix();
    tp.s = clamp_scale(((l.scale_net.w2 * tp.hs).colwise() + l.scale_net.b2).array(), c).matrix();
    tp.es = tp.s.array().exp().matrix();
    const Eigen::MatrixXd t = (l.shift_net.w2 * tp.ht).colwise() + l.shift_net.b2;
    scatter_rows(x, l.act_idx, (tp.xb.array() * tp.es.array() + t.array()).matrix());
    logdet_total += tp.s.sum();
  }

  const double energy = 0.5 * x.squaredNorm();
  const double loss =
      inv_n * (energy - logdet_total) + 0.5 * dim * kLog2Pi;
  if (!std::isfinite(loss)) throw NumericError("nll_loss_gradient: loss diverged (non-finite)");

  // d(mean NLL)/dz for the quadratic base term.
  Eigen::MatrixXd g = x * inv_n;

  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& l = layers[k];
    const auto& tp = tapes[k];
    auto& lg = out.layers[k];

    const Eigen::MatrixXd ga = gather_rows(g, l.pass_idx);
    const Eigen::MatrixXd gb = gather_rows(g, l.act_idx);

    // y_b = x_b .* exp(s) + t; the log-det term contributes -1/n per scale entry.
    const Eigen::MatrixXd gs_clamped =
        (gb.array() * tp.xb.array() * tp.es.array() - inv_n).matrix();
    const Eigen::MatrixXd gs_raw =
        (gs_clamped.array() * (1.0 - (tp.s.array() / c).square())).matrix();

    lg.scale_w2 += gs_raw * tp.hs.transpose();
    lg.scale_b2 += gs_raw.rowwise().sum();
    const Eigen::MatrixXd gpre_s =
        ((l.scale_net.w2.transpose() * gs_raw).array() * (1.0 - tp.hs.array().square())).matrix();
    lg.scale_w1 += gpre_s * tp.xa.transpose();
    lg.scale_b1 += gpre_s.rowwise().sum();

    lg.shift_w2 += gb * tp.ht.transpose();
    lg.shift_b2 += gb.rowwise().sum();
    const Eigen::MatrixXd gpre_t =
        ((l.shift_net.w2.transpose() * gb).array() * (1.0 - tp.ht.array().square())).matrix();
    lg.shift_w1 += gpre_t * tp.xa.transpose();
    lg.shift_b1 += gpre_t.rowwise().sum();

    const Eigen::MatrixXd gxa = ga + l.scale_net.w1.transpose() * gpre_s +
                                l.shift_net.w1.transpose() * gpre_t;
    const Eigen::MatrixXd gxb = (gb.array() * tp.es.array()).matrix();
    scatter_rows(g, l.pass_idx, gxa);
    scatter_rows(g, l.act_idx, gxb);
  }

  for (const auto& lg : out.layers) {
    if (!lg.scale_w1.allFinite() || !lg.scale_b1.allFinite() || !lg.scale_w2.allFinite() ||
        !lg.scale_b2.allFinite() || !lg.shift_w1.allFinite() || !lg.shift_b1.allFinite() ||
        !lg.shift_w2.allFinite() || !lg.shift_b2.allFinite())
      throw NumericError("nll_loss_gradient: non-finite gradient");
  }
  return loss;
}

FitResult fit(FlowModel& model, const std::vector<FeatureVector>& data, const FitConfig& config) {
  if (config.max_steps < 0) throw ConfigError("fit: max_steps must be >= 0");
  if (config.batch_size < 1) throw ConfigError("fit: batch_size must be >= 1");
  if (config.lr_schedule.empty()) throw ConfigError("fit: empty learning-rate schedule");
  if (config.log_every < 1) throw ConfigError("fit: log_every must be >= 1");
  if (data.size() < 2 * static_cast<std::size_t>(model.dim()))
    throw DataError("fit: need at least 2*dim samples, got " + std::to_string(data.size()));
  for (const auto& v : data) {
    if (v.size() != model.dim()) throw DataError("fit: sample dimension mismatch");
    if (!v.allFinite()) throw DataError("fit: non-finite sample");
  }

  Rng rng(config.seed);
  std::vector<int> all(data.size());
  std::iota(all.begin(), all.end(), 0);

  std::vector<int> val_idx;
  std::vector<int> train_idx;
  if (config.patience > 0) {
    rng.shuffle(all);
    auto n_val = static_cast<std::size_t>(std::ceil(config.val_fraction * data.size()));
    n_val = std::clamp<std::size_t>(n_val, 1, data.size() - 1);
    val_idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_idx.assign(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
  } else {
    train_idx = all;
  }

  // Fixed strided subset keeps the trace cheap on large datasets.
  std::vector<int> eval_idx;
  {
    const std::size_t cap = std::max<std::size_t>(1, static_cast<std::size_t>(config.eval_subset));
    const std::size_t stride = (train_idx.size() + cap - 1) / cap;
    for (std::size_t i = 0; i < train_idx.size(); i += stride) eval_idx.push_back(train_idx[i]);
  }

  auto subset_loss = [&](const std::vector<int>& idx) {
    std::vector<FeatureVector> subset;
    subset.reserve(idx.size());
    for (int i : idx) subset.push_back(data[static_cast<std::size_t>(i)]);
    return nll_loss(model, subset);
  };

  FitResult result;
  result.trace_steps.push_back(0);
  result.loss_trace.push_back(subset_loss(eval_idx));
  double best_val = std::numeric_limits<double>::infinity();
  int stale_intervals = 0;
  if (!val_idx.empty()) {
    result.val_trace.push_back(subset_loss(val_idx));
    best_val = result.val_trace.back();
  }

  const int batch_n = static_cast<int>(std::min<std::size_t>(
      static_cast<std::size_t>(config.batch_size), train_idx.size()));
  std::vector<int> order = train_idx;
  std::size_t cursor = order.size();  // force shuffle on first batch

  GradientSet grads = model.zero_gradients();
  std::vector<FeatureVector> batch(static_cast<std::size_t>(batch_n));

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
    for (int j = 0; j < batch_n; ++j)
      batch[static_cast<std::size_t>(j)] = data[static_cast<std::size_t>(order[cursor + j])];
    cursor += static_cast<std::size_t>(batch_n);

    grads = model.zero_gradients();
    double loss;
    try {
      loss = nll_loss_gradient(model, batch, grads);
    } catch (const NumericError& e) {
      throw NumericError("fit: diverged at step " + std::to_string(step) + ": " + e.what());
    }
    (void)loss;
    model.apply_update(grads, -lr);

    result.steps_run = step;
    if (step % config.log_every == 0 || step == config.max_steps) {
      result.trace_steps.push_back(step);
      result.loss_trace.push_back(subset_loss(eval_idx));
      if (!std::isfinite(result.loss_trace.back()))
        throw NumericError("fit: diverged at step " + std::to_string(step));
      if (!val_idx.empty()) {
        result.val_trace.push_back(subset_loss(val_idx));
        if (result.val_trace.back() < best_val - 1e-12) {
          best_val = result.val_trace.back();
          stale_intervals = 0;
        } else if (++stale_intervals >= config.patience) {
          result.early_stopped = true;
          break;
        }
      }
    }
  }
  return result;
}

}  // namespace plateflow
