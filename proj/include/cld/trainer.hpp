#pragma once
/*
 * Desk-scale trainer: softmax regression on a seeded Gaussian mixture.
 *
 * The model is convex and has closed-form per-sample gradients, which is what
 * the theory diagnostics need. Training records every sample's loss at each
 * epoch boundary, including epoch 0 before any update, for the train and
 * validation splits; that is the input the scorer consumes.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cld/core.hpp"
#include "cld/losslog.hpp"
#include "cld/random.hpp"

namespace cld {

struct SyntheticSpec {
  int num_classes = 5;
  int input_dim = 20;
  Matrix class_means;       // num_classes x input_dim; drawn from `mean_scale` when empty
  double mean_scale = 0.45; // per-coordinate std of generated class means
  double noise_scale = 1.0;
  std::size_t n_train = 2000;
  std::size_t n_validation = 250;
  std::size_t n_query = 200;
  std::size_t n_reference = 20000;
  double label_noise_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_classes < 2 || input_dim < 1) throw Error(ErrorKind::InvalidArgument, "need >= 2 classes and >= 1 input dim");
    if (n_train == 0 || n_validation == 0 || n_query == 0 || n_reference == 0) {
      throw Error(ErrorKind::InvalidArgument, "split sizes must be positive");
    }
    if (n_reference < 10 * n_train) {
      throw Error(ErrorKind::InvalidArgument, "reference split must be at least 10x the train split");
    }
    if (!(noise_scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "noise scale must be positive");
    if (!(label_noise_fraction >= 0.0 && label_noise_fraction < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "label noise fraction must lie in [0, 1)");
    }
    if (!class_means.empty() && (class_means.rows() != static_cast<std::size_t>(num_classes) ||
                                 class_means.cols() != static_cast<std::size_t>(input_dim))) {
      throw Error(ErrorKind::LengthMismatch, "class means must be num_classes x input_dim");
    }
  }
};

struct DataSplit {
  std::vector<std::int64_t> ids;
  std::vector<int> labels;       // observed (possibly noisy) labels
  std::vector<int> true_labels;  // mixture component that generated the point
  Matrix features;

  std::size_t size() const noexcept { return ids.size(); }
  std::span<const double> x(std::size_t i) const { return features.row(i); }
};

struct Dataset {
  int num_classes = 0;
  int input_dim = 0;
  Matrix class_means;
  DataSplit train;
  DataSplit validation;
  DataSplit query;
  DataSplit reference;
};

namespace detail {
inline DataSplit draw_split(const Matrix& means, std::size_t n, double sigma, std::uint64_t seed) {
  const std::size_t classes = means.rows(), dim = means.cols();
  DataSplit s;
  s.features = Matrix(n, dim);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % classes);
    s.ids.push_back(static_cast<std::int64_t>(i));
    s.labels.push_back(c);
    s.true_labels.push_back(c);
    for (std::size_t j = 0; j < dim; ++j) s.features(i, j) = means(c, j) + sigma * rng.normal();
  }
  return s;
}
}  // namespace detail

/// Label noise is applied to the train split only; validation, query and reference stay clean.
inline Dataset generate_dataset(const SyntheticSpec& spec) {
  spec.validate();
  Dataset d;
  d.num_classes = spec.num_classes;
  d.input_dim = spec.input_dim;
  d.class_means = spec.class_means;
  if (d.class_means.empty()) {
    d.class_means = Matrix(spec.num_classes, spec.input_dim);
    Rng rng(derive_seed(spec.seed, 0));
    for (double& v : d.class_means.data()) v = spec.mean_scale * rng.normal();
  }
  d.train = detail::draw_split(d.class_means, spec.n_train, spec.noise_scale, derive_seed(spec.seed, 1));
  d.validation = detail::draw_split(d.class_means, spec.n_validation, spec.noise_scale, derive_seed(spec.seed, 2));
  d.query = detail::draw_split(d.class_means, spec.n_query, spec.noise_scale, derive_seed(spec.seed, 3));
  d.reference = detail::draw_split(d.class_means, spec.n_reference, spec.noise_scale, derive_seed(spec.seed, 4));

  const auto flips = static_cast<std::size_t>(
      std::llround(spec.label_noise_fraction * static_cast<double>(spec.n_train)));
  if (flips > 0) {
    Rng rng(derive_seed(spec.seed, 5));
    const auto chosen = rng.sample<std::int64_t>(d.train.ids, flips);
    for (auto id : chosen) {
      auto& label = d.train.labels[static_cast<std::size_t>(id)];
      const auto shift = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(spec.num_classes - 1)));
      label = (label + shift) % spec.num_classes;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Model

/// Softmax-regression parameters, flattened as [W (classes x dim, row-major) | b (classes)].
struct ModelParams {
  int classes = 0;
  int dim = 0;
  std::vector<double> values;

  static ModelParams zeros(int classes, int dim) {
    return {classes, dim, std::vector<double>(static_cast<std::size_t>(classes) * (dim + 1), 0.0)};
  }

  std::size_t size() const noexcept { return values.size(); }
  double weight(int c, int j) const { return values[static_cast<std::size_t>(c) * dim + j]; }
  double bias(int c) const { return values[static_cast<std::size_t>(classes) * dim + c]; }
  bool finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

inline std::vector<double> logits(const ModelParams& p, std::span<const double> x) {
  std::vector<double> z(static_cast<std::size_t>(p.classes));
  for (int c = 0; c < p.classes; ++c) {
    double s = p.bias(c);
    const double* w = p.values.data() + static_cast<std::size_t>(c) * p.dim;
    for (int j = 0; j < p.dim; ++j) s += w[j] * x[j];
    z[static_cast<std::size_t>(c)] = s;
  }
  return z;
}

inline std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    p[c] = std::exp(z[c] - m);
    s += p[c];
  }
  for (double& v : p) v /= s;
  return p;
}

/// Cross-entropy of one sample, as (max - z_y) + log1p(sum over the non-max terms). Never
/// negative, and keeps relative precision when the loss is tiny.
inline double sample_loss(const ModelParams& p, std::span<const double> x, int label) {
  const auto z = logits(p, x);
  const auto top = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  double rest = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    if (c != top) rest += std::exp(z[c] - z[top]);
  }
  return (z[top] - z[static_cast<std::size_t>(label)]) + std::log1p(rest);
}

inline double correct_class_probability(const ModelParams& p, std::span<const double> x, int label) {
  return softmax(logits(p, x))[static_cast<std::size_t>(label)];
}

inline int predict(const ModelParams& p, std::span<const double> x) {
  const auto z = logits(p, x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

/// Adds `scale` times the gradient of one sample's loss into `out`.
inline void accumulate_gradient(const ModelParams& p, std::span<const double> x, int label, double scale,
                                std::span<double> out) {
  auto prob = softmax(logits(p, x));
  // p_y - 1 as minus the mass on the other classes; avoids cancellation when p_y is near 1
  double others = 0.0;
  for (std::size_t c = 0; c < prob.size(); ++c) {
    if (c != static_cast<std::size_t>(label)) others += prob[c];
  }
  prob[static_cast<std::size_t>(label)] = -others;
  const std::size_t bias_offset = static_cast<std::size_t>(p.classes) * p.dim;
  for (int c = 0; c < p.classes; ++c) {
    const double e = scale * prob[static_cast<std::size_t>(c)];
    double* g = out.data() + static_cast<std::size_t>(c) * p.dim;
    for (int j = 0; j < p.dim; ++j) g[j] += e * x[j];
    out[bias_offset + c] += e;
  }
}

inline std::vector<double> per_sample_gradient(const ModelParams& p, std::span<const double> x, int label) {
  std::vector<double> g(p.size(), 0.0);
  accumulate_gradient(p, x, label, 1.0, g);
  return g;
}

/// Mean gradient over the given row indices of a split (all rows when `rows` is empty).
inline std::vector<double> batch_gradient(const ModelParams& p, const DataSplit& split,
                                          std::span<const std::size_t> rows = {}) {
  std::vector<double> g(p.size(), 0.0);
  const std::size_t n = rows.empty() ? split.size() : rows.size();
  if (n == 0) return g;
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = rows.empty() ? k : rows[k];
    accumulate_gradient(p, split.x(i), split.labels[i], scale, g);
  }
  return g;
}

/// Gradient of the population-risk proxy: the mean over the frozen reference split.
inline std::vector<double> reference_gradient(const ModelParams& p, const Dataset& data) {
  return batch_gradient(p, data.reference);
}

struct Evaluation {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

inline Evaluation evaluate(const ModelParams& p, const DataSplit& split, std::span<const std::size_t> rows = {}) {
  const std::size_t n = rows.empty() ? split.size() : rows.size();
  Evaluation e;
  if (n == 0) return e;
  std::size_t correct = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = rows.empty() ? k : rows[k];
    e.mean_loss += sample_loss(p, split.x(i), split.labels[i]);
    if (predict(p, split.x(i)) == split.labels[i]) ++correct;
  }
  e.mean_loss /= static_cast<double>(n);
  e.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return e;
}

/// Upper bound on the smoothness constant of the mean softmax cross-entropy over `split`:
/// the per-sample Hessian is bounded by (1/2)(|x|^2 + 1).
inline double softmax_smoothness_upper_bound(const DataSplit& split) {
  double total = 0.0;
  for (std::size_t i = 0; i < split.size(); ++i) total += dot(split.x(i), split.x(i)) + 1.0;
  return 0.5 * total / static_cast<double>(split.size());
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 30;
  std::size_t batch_size = 100;  // 0 = full batch
  std::uint64_t seed = 0;
  bool record_parameter_snapshots = false;
  double init_scale = 0.0;  // 0 = zero init, otherwise N(0, init_scale^2)

  void validate() const {
    if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw Error(ErrorKind::InvalidArgument, "learning rate must be finite and non-negative");
    }
    if (init_scale < 0.0) throw Error(ErrorKind::InvalidArgument, "init scale must be non-negative");
  }
};

struct TrainResult {
  TrainConfig config;
  ModelParams final_params;
  std::vector<std::size_t> trained_rows;             // train-split rows used for updates, ascending
  std::vector<std::vector<double>> snapshots;        // checkpoint 0..T, when recorded
  LossLog train_log;
  LossLog validation_log;
  std::vector<double> epoch_mean_loss;               // mean loss over trained rows at checkpoints 0..T
};

namespace detail {
inline void log_losses(const ModelParams& p, const DataSplit& split, Matrix& losses, std::size_t column, int epoch) {
  for (std::size_t i = 0; i < split.size(); ++i) {
    const double v = sample_loss(p, split.x(i), split.labels[i]);
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::DivergedLoss, "non-finite loss at epoch " + std::to_string(epoch) +
                                               " for sample " + std::to_string(split.ids[i]));
    }
    losses(i, column) = v;
  }
}

inline LossLog empty_log(const DataSplit& split, SplitKind kind, int epochs) {
  LossLog log;
  log.split = kind;
  log.sample_ids = split.ids;
  log.labels = split.labels;
  log.grid = CheckpointGrid::range(epochs);
  log.losses = Matrix(split.size(), static_cast<std::size_t>(epochs) + 1);
  return log;
}
}  // namespace detail

namespace detail {
inline std::vector<std::size_t> resolve_rows(const DataSplit& train,
                                             std::optional<std::span<const std::int64_t>> subset) {
  std::vector<std::size_t> rows;
  if (subset) {
    std::unordered_map<std::int64_t, std::size_t> row_of;
    for (std::size_t i = 0; i < train.size(); ++i) row_of.emplace(train.ids[i], i);
    for (auto id : *subset) {
      const auto it = row_of.find(id);
      if (it == row_of.end()) throw Error(ErrorKind::UnknownId, "train id " + std::to_string(id));
      rows.push_back(it->second);
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  } else {
    for (std::size_t i = 0; i < train.size(); ++i) rows.push_back(i);
  }
  if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "nothing to train on");
  return rows;
}

// Shared update loop; `on_checkpoint(epoch, params)` runs at epoch 0 and after every epoch.
template <class OnCheckpoint>
ModelParams run_descent(const Dataset& data, const TrainConfig& config, const std::vector<std::size_t>& rows,
                        OnCheckpoint&& on_checkpoint) {
  ModelParams params = ModelParams::zeros(data.num_classes, data.input_dim);
  if (config.init_scale > 0.0) {
    Rng init(derive_seed(config.seed, 1));
    for (double& v : params.values) v = config.init_scale * init.normal();
  }
  Rng order_rng(derive_seed(config.seed, 2));
  on_checkpoint(0, params);

  const std::size_t n = rows.size();
  const std::size_t batch = (config.batch_size == 0 || config.batch_size >= n) ? n : config.batch_size;
  std::vector<std::size_t> order = rows;
  std::vector<double> grad(params.size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (batch < n) order_rng.shuffle<std::size_t>(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const auto i = order[k];
        accumulate_gradient(params, data.train.x(i), data.train.labels[i], scale, grad);
      }
      for (std::size_t j = 0; j < grad.size(); ++j) params.values[j] -= config.learning_rate * grad[j];
    }
    if (!params.finite()) {
      throw Error(ErrorKind::DivergedLoss, "non-finite parameters at epoch " + std::to_string(epoch));
    }
    on_checkpoint(epoch, params);
  }
  return params;
}
}  // namespace detail

/// Runs (mini-batch) gradient descent from the configured initialization. When `subset`
/// is given only those train ids drive the updates, but every train and validation sample
/// is still logged at every checkpoint.
inline TrainResult train_and_log(const Dataset& data, const TrainConfig& config,
                                 std::optional<std::span<const std::int64_t>> subset = std::nullopt) {
  config.validate();
  TrainResult r;
  r.config = config;
  r.trained_rows = detail::resolve_rows(data.train, subset);
  r.train_log = detail::empty_log(data.train, SplitKind::train, config.epochs);
  r.validation_log = detail::empty_log(data.validation, SplitKind::validation, config.epochs);

  r.final_params = detail::run_descent(data, config, r.trained_rows, [&](int epoch, const ModelParams& params) {
    const auto col = static_cast<std::size_t>(epoch);
    detail::log_losses(params, data.train, r.train_log.losses, col, epoch);
    detail::log_losses(params, data.validation, r.validation_log.losses, col, epoch);
    double mean = 0.0;
    for (auto row : r.trained_rows) mean += r.train_log.losses(row, col);
    r.epoch_mean_loss.push_back(mean / static_cast<double>(r.trained_rows.size()));
    if (config.record_parameter_snapshots) r.snapshots.push_back(params.values);
  });
  return r;
}

/// Same updates as train_and_log, without any logging; used for retraining studies.
inline ModelParams fit(const Dataset& data, const TrainConfig& config,
                       std::optional<std::span<const std::int64_t>> subset = std::nullopt) {
  config.validate();
  return detail::run_descent(data, config, detail::resolve_rows(data.train, subset),
                             [](int, const ModelParams&) {});
}

/// Per-sample loss log of any split, recomputed from recorded parameter snapshots.
inline LossLog losslog_from_snapshots(const TrainResult& run, const DataSplit& split, SplitKind kind) {
  if (run.snapshots.empty()) throw Error(ErrorKind::MissingSnapshots, "run has no parameter snapshots");
  const int epochs = static_cast<int>(run.snapshots.size()) - 1;
  LossLog log = detail::empty_log(split, kind, epochs);
  for (int t = 0; t <= epochs; ++t) {
    const ModelParams p{run.final_params.classes, run.final_params.dim, run.snapshots[static_cast<std::size_t>(t)]};
    detail::log_losses(p, split, log.losses, static_cast<std::size_t>(t), t);
  }
  return log;
}

inline ModelParams params_from(const ModelParams& like, std::vector<double> values) {
  return {like.classes, like.dim, std::move(values)};
}

}  // namespace cld
