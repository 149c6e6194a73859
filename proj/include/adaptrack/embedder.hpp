#pragma once

// Fully connected embedding network with hand-written backpropagation, the
// contrastive / triplet / SymTriplet losses with their analytic gradients,
// and a mini-batch SGD-with-momentum trainer.

#include "adaptrack/core.hpp"
#include "adaptrack/parallel.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace adaptrack {

enum class LossKind { contrastive, triplet, symtriplet };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::contrastive: return "contrastive";
    case LossKind::triplet: return "triplet";
    case LossKind::symtriplet: return "symtriplet";
  }
  return "symtriplet";
}

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "contrastive") return LossKind::contrastive;
  if (s == "triplet") return LossKind::triplet;
  if (s == "symtriplet") return LossKind::symtriplet;
  throw Error(ErrorKind::validation, "unknown loss kind '" + s + "'");
}

struct LossConfig {
  LossKind kind = LossKind::symtriplet;
  double tau = 1.0;    // contrastive margin
  double alpha = 1.0;  // triplet / SymTriplet margin

  void validate() const {
    if (!(tau > 0.0) || !(alpha > 0.0)) throw Error(ErrorKind::validation, "LossConfig: margins must be > 0");
  }
};

struct TrainConfig {
  double learning_rate = 1e-5;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t batch_size = 128;
  std::size_t epochs = 2000;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::validation, "TrainConfig: " + what); };
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0,1)");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (batch_size == 0) fail("batch_size must be positive");
    if (epochs == 0) fail("epochs must be positive");
  }
};

// ---------------------------------------------------------------------------
// Losses. Each returns the loss and its gradient with respect to every input
// embedding. Gradients are zero at and beyond the hinge.

struct PairLoss {
  double loss = 0.0;
  Vector grad_a;
  Vector grad_b;
};

struct TripletLossValue {
  double loss = 0.0;
  Vector grad_anchor;    // e_k
  Vector grad_positive;  // e_l
  Vector grad_negative;  // e_m
};

inline PairLoss contrastive_loss(const Vector& e1, const Vector& e2, bool is_positive, const LossConfig& cfg) {
  const double dist = embed_distance(e1, e2);
  PairLoss r;
  const Vector diff = e1 - e2;
  if (is_positive) {
    r.loss = 0.5 * dist;
    r.grad_a = diff;
    r.grad_b = -diff;
  } else if (dist < cfg.tau) {
    r.loss = 0.5 * (cfg.tau - dist);
    r.grad_a = -diff;
    r.grad_b = diff;
  } else {
    r.grad_a = Vector::Zero(e1.size());
    r.grad_b = Vector::Zero(e1.size());
  }
  return r;
}

inline TripletLossValue triplet_loss(const Vector& ek, const Vector& el, const Vector& em, const LossConfig& cfg) {
  const double hinge = embed_distance(ek, el) - embed_distance(ek, em) + cfg.alpha;
  TripletLossValue r;
  if (hinge > 0.0) {
    const Vector d_lk = el - ek;
    const Vector d_mk = em - ek;
    r.loss = 0.5 * hinge;
    r.grad_anchor = -(d_lk - d_mk);
    r.grad_positive = d_lk;
    r.grad_negative = -d_mk;
  } else {
    r.grad_anchor = r.grad_positive = r.grad_negative = Vector::Zero(ek.size());
  }
  return r;
}

inline TripletLossValue symtriplet_loss(const Vector& ek, const Vector& el, const Vector& em, const LossConfig& cfg) {
  const double hinge = embed_distance(ek, el) - 0.5 * (embed_distance(ek, em) + embed_distance(el, em)) + cfg.alpha;
  TripletLossValue r;
  if (hinge > 0.0) {
    const Vector d_lk = el - ek;
    const Vector d_mk = em - ek;
    const Vector d_ml = em - el;
    r.loss = hinge;
    r.grad_anchor = -(2.0 * d_lk - d_mk);
    r.grad_positive = 2.0 * d_lk + d_ml;
    r.grad_negative = -(d_mk + d_ml);
  } else {
    r.grad_anchor = r.grad_positive = r.grad_negative = Vector::Zero(ek.size());
  }
  return r;
}

/// The quantity inside max(0, .) for the given loss; the loss is active iff
/// it is strictly positive. For a contrastive positive pair there is no
/// hinge and +infinity is returned.
inline double hinge_argument(LossKind kind, const Vector& a, const Vector& b, const Vector& c, bool positive,
                             const LossConfig& cfg) {
  switch (kind) {
    case LossKind::contrastive: return positive ? kInfinity : cfg.tau - embed_distance(a, b);
    case LossKind::triplet: return embed_distance(a, b) - embed_distance(a, c) + cfg.alpha;
    case LossKind::symtriplet:
      return embed_distance(a, b) - 0.5 * (embed_distance(a, c) + embed_distance(b, c)) + cfg.alpha;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Model

/// Parameter gradients, laid out like the model's weights and biases.
struct Gradients {
  std::vector<Matrix> w;
  std::vector<Vector> b;

  void set_zero() {
    for (auto& m : w) m.setZero();
    for (auto& v : b) v.setZero();
  }
  Gradients& operator+=(const Gradients& o) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] += o.w[i];
      b[i] += o.b[i];
    }
    return *this;
  }
  Gradients& operator*=(double s) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] *= s;
      b[i] *= s;
    }
    return *this;
  }
  bool all_finite() const {
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!w[i].allFinite() || !b[i].allFinite()) return false;
    }
    return true;
  }
};

/// Activations recorded by a forward pass, consumed by backward().
struct ForwardTrace {
  std::vector<Vector> inputs;  // input to each layer
  std::vector<Vector> pre;     // pre-activation of each layer
};

class EmbeddingModel {
 public:
  EmbeddingModel() = default;

  /// Zero-initialized network with the given layer sizes [F, H1, ..., D].
  explicit EmbeddingModel(std::vector<std::size_t> sizes, std::uint64_t seed = 0)
      : sizes_(std::move(sizes)), seed_(seed) {
    if (sizes_.size() < 2) throw Error(ErrorKind::validation, "EmbeddingModel: need at least input and output size");
    for (std::size_t s : sizes_) {
      if (s == 0) throw Error(ErrorKind::validation, "EmbeddingModel: layer sizes must be positive");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      w_.push_back(Matrix::Zero(static_cast<Eigen::Index>(sizes_[l + 1]), static_cast<Eigen::Index>(sizes_[l])));
      b_.push_back(Vector::Zero(static_cast<Eigen::Index>(sizes_[l + 1])));
    }
  }

  /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static EmbeddingModel random(std::vector<std::size_t> sizes, std::uint64_t seed) {
    EmbeddingModel m(std::move(sizes), seed);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < m.w_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(m.sizes_[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index r = 0; r < m.w_[l].rows(); ++r) {
        for (Eigen::Index c = 0; c < m.w_[l].cols(); ++c) m.w_[l](r, c) = u(rng);
      }
      for (Eigen::Index r = 0; r < m.b_[l].size(); ++r) m.b_[l](r) = u(rng);
    }
    return m;
  }

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return w_.size(); }
  std::uint64_t seed() const { return seed_; }

  std::vector<Matrix>& weights() { return w_; }
  const std::vector<Matrix>& weights() const { return w_; }
  std::vector<Vector>& biases() { return b_; }
  const std::vector<Vector>& biases() const { return b_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < w_.size(); ++l) n += static_cast<std::size_t>(w_[l].size() + b_[l].size());
    return n;
  }

  /// Flat parameter view: per layer, weights row-major then bias.
  double& parameter(std::size_t index) { return locate(index, w_, b_); }
  double parameter(std::size_t index) const {
    return locate(index, const_cast<std::vector<Matrix>&>(w_), const_cast<std::vector<Vector>&>(b_));
  }
  static double& flat(Gradients& g, std::size_t index) { return locate(index, g.w, g.b); }

  Gradients zero_gradients() const {
    Gradients g;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      g.w.push_back(Matrix::Zero(w_[l].rows(), w_[l].cols()));
      g.b.push_back(Vector::Zero(b_[l].size()));
    }
    return g;
  }

  Vector forward(const Vector& x) const {
    check_input(x);
    Vector a = x;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      Vector z = w_[l] * a + b_[l];
      a = (l + 1 < w_.size()) ? Vector(z.cwiseMax(0.0)) : z;
    }
    return a;
  }

  Vector forward(const Vector& x, ForwardTrace& trace) const {
    check_input(x);
    trace.inputs.clear();
    trace.pre.clear();
    Vector a = x;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      trace.inputs.push_back(a);
      Vector z = w_[l] * a + b_[l];
      trace.pre.push_back(z);
      a = (l + 1 < w_.size()) ? Vector(z.cwiseMax(0.0)) : z;
    }
    return a;
  }

  /// Accumulates dL/dW into `acc` given dL/d(output) for a traced input.
  /// The rectifier derivative is taken as 0 at a zero pre-activation.
  void backward(const ForwardTrace& trace, const Vector& grad_out, Gradients& acc) const {
    Vector delta = grad_out;
    for (std::size_t l = w_.size(); l-- > 0;) {
      if (l + 1 < w_.size()) {
        delta = delta.cwiseProduct((trace.pre[l].array() > 0.0).cast<double>().matrix());
      }
      acc.w[l].noalias() += delta * trace.inputs[l].transpose();
      acc.b[l] += delta;
      if (l > 0) delta = w_[l].transpose() * delta;
    }
  }

  /// v <- momentum*v - lr*(g + decay*W);  W <- W + v
  void apply_momentum_step(const Gradients& g, Gradients& velocity, const TrainConfig& cfg) {
    for (std::size_t l = 0; l < w_.size(); ++l) {
      velocity.w[l] = cfg.momentum * velocity.w[l] - cfg.learning_rate * (g.w[l] + cfg.weight_decay * w_[l]);
      velocity.b[l] = cfg.momentum * velocity.b[l] - cfg.learning_rate * (g.b[l] + cfg.weight_decay * b_[l]);
      w_[l] += velocity.w[l];
      b_[l] += velocity.b[l];
    }
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < w_.size(); ++l) {
      if (!w_[l].allFinite() || !b_[l].allFinite()) return false;
    }
    return true;
  }

  bool operator==(const EmbeddingModel& o) const {
    if (sizes_ != o.sizes_) return false;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      if (w_[l] != o.w_[l] || b_[l] != o.b_[l]) return false;
    }
    return true;
  }

 private:
  void check_input(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != sizes_.front()) {
      throw Error(ErrorKind::dimension_mismatch, "EmbeddingModel::forward: expected input of size " +
                                                     std::to_string(sizes_.front()) + ", got " +
                                                     std::to_string(x.size()));
    }
  }

  static double& locate(std::size_t index, std::vector<Matrix>& w, std::vector<Vector>& b) {
    for (std::size_t l = 0; l < w.size(); ++l) {
      const auto nw = static_cast<std::size_t>(w[l].size());
      if (index < nw) {
        const auto cols = static_cast<std::size_t>(w[l].cols());
        return w[l](static_cast<Eigen::Index>(index / cols), static_cast<Eigen::Index>(index % cols));
      }
      index -= nw;
      const auto nb = static_cast<std::size_t>(b[l].size());
      if (index < nb) return b[l](static_cast<Eigen::Index>(index));
      index -= nb;
    }
    throw Error(ErrorKind::precondition, "parameter index out of range");
  }

  std::vector<std::size_t> sizes_;
  std::vector<Matrix> w_;
  std::vector<Vector> b_;
  std::uint64_t seed_ = 0;
};

// ---------------------------------------------------------------------------
// Training

struct PairSample {
  std::size_t a = 0;
  std::size_t b = 0;
  bool positive = true;
};

struct TripletSample {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// Inputs are indexed once; samples refer to them by position.
struct TrainingData {
  std::vector<Vector> inputs;
  std::vector<PairSample> pairs;
  std::vector<TripletSample> triplets;
};

/// Loss of one sample plus its parameter gradient accumulated into `acc`.
inline double sample_loss_and_gradient(const EmbeddingModel& model, const TrainingData& data, LossKind kind,
                                       std::size_t index, const LossConfig& cfg, Gradients* acc) {
  ForwardTrace t1, t2, t3;
  if (kind == LossKind::contrastive) {
    const PairSample& s = data.pairs[index];
    const Vector e1 = model.forward(data.inputs[s.a], t1);
    const Vector e2 = model.forward(data.inputs[s.b], t2);
    const PairLoss l = contrastive_loss(e1, e2, s.positive, cfg);
    if (acc && l.loss > 0.0) {
      model.backward(t1, l.grad_a, *acc);
      model.backward(t2, l.grad_b, *acc);
    }
    return l.loss;
  }
  const TripletSample& s = data.triplets[index];
  const Vector ek = model.forward(data.inputs[s.anchor], t1);
  const Vector el = model.forward(data.inputs[s.positive], t2);
  const Vector em = model.forward(data.inputs[s.negative], t3);
  const TripletLossValue l =
      kind == LossKind::triplet ? triplet_loss(ek, el, em, cfg) : symtriplet_loss(ek, el, em, cfg);
  if (acc && l.loss > 0.0) {
    model.backward(t1, l.grad_anchor, *acc);
    model.backward(t2, l.grad_positive, *acc);
    model.backward(t3, l.grad_negative, *acc);
  }
  return l.loss;
}

struct TrainResult {
  EmbeddingModel model;
  std::vector<double> epoch_loss;  // mean sample loss per epoch
};

/// Mini-batch SGD with momentum. Samples are reshuffled every epoch from a
/// generator seeded with cfg.seed. Per-sample gradients may be computed in
/// parallel but are summed in sample order, then averaged over the batch.
inline TrainResult train(EmbeddingModel model, const TrainingData& data, const LossConfig& loss_cfg,
                         const TrainConfig& cfg) {
  loss_cfg.validate();
  cfg.validate();
  const std::size_t n = loss_cfg.kind == LossKind::contrastive ? data.pairs.size() : data.triplets.size();
  if (n == 0) {
    throw Error(ErrorKind::precondition, std::string("train: no training samples for loss ") + to_string(loss_cfg.kind));
  }

  TrainResult result;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Gradients velocity = model.zero_gradients();
  Gradients batch_grad = model.zero_gradients();
  std::vector<Gradients> per_sample;
  std::vector<double> per_loss;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      if (per_sample.size() < count) per_sample.resize(count, model.zero_gradients());
      per_loss.assign(count, 0.0);
      parallel_for(count, [&](std::size_t i) {
        per_sample[i].set_zero();
        per_loss[i] = sample_loss_and_gradient(model, data, loss_cfg.kind, order[start + i], loss_cfg, &per_sample[i]);
      });
      batch_grad.set_zero();
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        batch_grad += per_sample[i];
        batch_loss += per_loss[i];
      }
      batch_grad *= 1.0 / static_cast<double>(count);
      if (!std::isfinite(batch_loss) || !batch_grad.all_finite()) {
        std::ostringstream os;
        os << "train: non-finite loss or gradient at epoch " << epoch << ", batch " << batch_index;
        throw Error(ErrorKind::numeric, os.str());
      }
      epoch_sum += batch_loss;
      model.apply_momentum_step(batch_grad, velocity, cfg);
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(n));
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

struct GradCheckSample {
  Vector x1, x2, x3;     // x3 unused for contrastive
  bool positive = true;  // contrastive only
};

struct GradCheckReport {
  bool rejected_at_hinge = false;
  bool active = false;
  double loss = 0.0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t parameters = 0;
  bool passed = false;
};

namespace detail {

inline double sample_loss(const EmbeddingModel& m, const GradCheckSample& s, const LossConfig& cfg, double* hinge) {
  const Vector a = m.forward(s.x1);
  const Vector b = m.forward(s.x2);
  if (cfg.kind == LossKind::contrastive) {
    if (hinge) *hinge = hinge_argument(cfg.kind, a, b, b, s.positive, cfg);
    return contrastive_loss(a, b, s.positive, cfg).loss;
  }
  const Vector c = m.forward(s.x3);
  if (hinge) *hinge = hinge_argument(cfg.kind, a, b, c, s.positive, cfg);
  return cfg.kind == LossKind::triplet ? triplet_loss(a, b, c, cfg).loss : symtriplet_loss(a, b, c, cfg).loss;
}

}  // namespace detail

/// Compares the backpropagated parameter gradient of one sample against
/// central differences with step `epsilon`. The relative error per
/// parameter is |analytic - numeric| / max(|analytic|, |numeric|, floor)
/// with floor = 1e-6 * max(1, largest analytic magnitude). The sample is
/// rejected when any perturbation moves the loss across its hinge.
inline GradCheckReport grad_check(const EmbeddingModel& model, const GradCheckSample& sample, const LossConfig& cfg,
                                  double epsilon, double tolerance) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::precondition, "grad_check: epsilon must be > 0");
  GradCheckReport rep;
  rep.parameters = model.parameter_count();

  TrainingData data;
  data.inputs = {sample.x1, sample.x2, sample.x3.size() ? sample.x3 : sample.x1};
  data.pairs = {PairSample{0, 1, sample.positive}};
  data.triplets = {TripletSample{0, 1, 2}};
  Gradients analytic = model.zero_gradients();
  rep.loss = sample_loss_and_gradient(model, data, cfg.kind, 0, cfg, &analytic);

  double h0 = 0.0;
  detail::sample_loss(model, sample, cfg, &h0);
  rep.active = h0 > 0.0;
  if (std::abs(h0) <= epsilon) {
    rep.rejected_at_hinge = true;
    return rep;
  }

  double scale = 1.0;
  for (std::size_t p = 0; p < rep.parameters; ++p) scale = std::max(scale, std::abs(EmbeddingModel::flat(analytic, p)));
  const double floor = 1e-6 * scale;

  EmbeddingModel probe = model;
  for (std::size_t p = 0; p < rep.parameters; ++p) {
    const double orig = probe.parameter(p);
    double h_plus = 0.0, h_minus = 0.0;
    probe.parameter(p) = orig + epsilon;
    const double l_plus = detail::sample_loss(probe, sample, cfg, &h_plus);
    probe.parameter(p) = orig - epsilon;
    const double l_minus = detail::sample_loss(probe, sample, cfg, &h_minus);
    probe.parameter(p) = orig;
    if ((h_plus > 0.0) != rep.active || (h_minus > 0.0) != rep.active) {
      rep.rejected_at_hinge = true;
      return rep;
    }
    const double numeric = (l_plus - l_minus) / (2.0 * epsilon);
    const double a = EmbeddingModel::flat(analytic, p);
    const double abs_err = std::abs(a - numeric);
    rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
    rep.max_rel_error = std::max(rep.max_rel_error, abs_err / std::max({std::abs(a), std::abs(numeric), floor}));
  }
  rep.passed = rep.max_rel_error <= tolerance;
  return rep;
}

struct GradCheckSummary {
  LossKind kind = LossKind::symtriplet;
  std::size_t samples = 0;
  std::size_t resampled = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Draws `samples` random active samples (random model with 1..max_hidden
/// hidden layers, random inputs), resampling any that sit on the hinge,
/// and grad-checks each one.
inline GradCheckSummary grad_check_random(LossKind kind, std::size_t samples, std::size_t max_hidden,
                                          std::uint64_t seed, double epsilon, double tolerance,
                                          const LossConfig& base = {}) {
  LossConfig cfg = base;
  cfg.kind = kind;
  GradCheckSummary sum;
  sum.kind = kind;
  sum.passed = true;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> width(3, 8);
  std::uniform_int_distribution<std::size_t> depth(1, std::max<std::size_t>(1, max_hidden));
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::size_t attempts = 0;
  while (sum.samples < samples) {
    if (++attempts > samples * 1000) throw Error(ErrorKind::numeric, "grad_check_random: could not draw active samples");
    std::vector<std::size_t> sizes{width(rng)};
    const std::size_t hidden = depth(rng);
    for (std::size_t h = 0; h < hidden; ++h) sizes.push_back(width(rng));
    sizes.push_back(width(rng));
    const EmbeddingModel model = EmbeddingModel::random(sizes, rng());

    auto draw = [&] {
      Vector v(static_cast<Eigen::Index>(sizes.front()));
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = gauss(rng);
      return v;
    };
    GradCheckSample s{draw(), draw(), draw(), false};
    if (kind == LossKind::contrastive) {
      // alternate positive and (close) negative pairs
      s.positive = (sum.samples % 2) == 0;
      if (!s.positive) s.x2 = s.x1 + 0.05 * draw();
    }
    const GradCheckReport r = grad_check(model, s, cfg, epsilon, tolerance);
    if (r.rejected_at_hinge || !r.active) {
      ++sum.resampled;
      continue;
    }
    ++sum.samples;
    sum.max_rel_error = std::max(sum.max_rel_error, r.max_rel_error);
    sum.passed = sum.passed && r.passed;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Checkpoint format: a versioned text header followed by parameters in
// row-major order, one fixed-width scientific value per line.
//
//   adaptrack-model 1
//   layers <L+1> <F> <H1> ... <D>
//   activation relu
//   seed <seed>
//   weight <l> <rows> <cols>
//   <value>...
//   bias <l> <rows>
//   <value>...

inline void save_model(std::ostream& os, const EmbeddingModel& m) {
  os << "adaptrack-model 1\n";
  os << "layers " << m.layer_sizes().size();
  for (std::size_t s : m.layer_sizes()) os << ' ' << s;
  os << "\nactivation relu\nseed " << m.seed() << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%+.17e\n", v);
    os << buf;
  };
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const Matrix& w = m.weights()[l];
    os << "weight " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) put(w(r, c));
    }
    const Vector& b = m.biases()[l];
    os << "bias " << l << ' ' << b.size() << '\n';
    for (Eigen::Index r = 0; r < b.size(); ++r) put(b(r));
  }
}

inline EmbeddingModel load_model(std::istream& is) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::io, "model checkpoint: " + what); };
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "adaptrack-model") fail("bad header");
  if (version != 1) fail("unsupported version " + std::to_string(version));
  std::size_t count = 0;
  if (!(is >> tag >> count) || tag != "layers" || count < 2) fail("bad layers line");
  std::vector<std::size_t> sizes(count);
  for (auto& s : sizes) {
    if (!(is >> s)) fail("bad layer size");
  }
  std::string act;
  if (!(is >> tag >> act) || tag != "activation" || act != "relu") fail("unsupported activation");
  std::uint64_t seed = 0;
  if (!(is >> tag >> seed) || tag != "seed") fail("bad seed line");
  EmbeddingModel m(sizes, seed);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    std::size_t idx = 0;
    Eigen::Index rows = 0, cols = 0;
    Matrix& w = m.weights()[l];
    if (!(is >> tag >> idx >> rows >> cols) || tag != "weight" || idx != l || rows != w.rows() || cols != w.cols()) {
      fail("bad weight block " + std::to_string(l));
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(is >> w(r, c))) fail("truncated weights");
      }
    }
    Vector& b = m.biases()[l];
    if (!(is >> tag >> idx >> rows) || tag != "bias" || idx != l || rows != b.size()) {
      fail("bad bias block " + std::to_string(l));
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!(is >> b(r))) fail("truncated biases");
    }
  }
  return m;
}

}  // namespace adaptrack
