#pragma once
/*
 * Data-attribution studies with CLD_infl(m, q) = pearson(delta_m, delta_q).
 *
 * LDS: for random subsets S_j, correlate (Spearman) the summed attribution of S_j
 * toward query q with the measured outcome of retraining on S_j (mean correct-class
 * probability of q over retraining seeds).
 *
 * Brittleness: remove the k training samples with the largest total attribution
 * toward the query set (or k random samples), retrain, and count flipped predictions.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cld/core.hpp"
#include "cld/losslog.hpp"
#include "cld/parallel.hpp"
#include "cld/random.hpp"
#include "cld/scoring.hpp"
#include "cld/trainer.hpp"

namespace cld {

/// Fractional ranks (1-based); tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "spearman: lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error(ErrorKind::TooShort, "spearman needs at least 2 points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const auto r = pearson(rx, ry);
  if (!r) throw Error(ErrorKind::ConstantVector, "spearman: an input has a single distinct value");
  return *r;
}

/// Maps train ids to CLD_infl rows.
class InfluenceMatrix {
 public:
  InfluenceMatrix(std::vector<std::int64_t> train_ids, Matrix values)
      : ids_(std::move(train_ids)), values_(std::move(values)) {
    if (ids_.size() != values_.rows()) throw Error(ErrorKind::LengthMismatch, "one id per influence row");
    for (std::size_t i = 0; i < ids_.size(); ++i) row_of_.emplace(ids_[i], i);
  }

  const Matrix& values() const noexcept { return values_; }
  std::span<const std::int64_t> train_ids() const noexcept { return ids_; }
  std::size_t queries() const noexcept { return values_.cols(); }

  std::size_t row(std::int64_t id) const {
    const auto it = row_of_.find(id);
    if (it == row_of_.end()) throw Error(ErrorKind::UnknownId, "train id " + std::to_string(id));
    return it->second;
  }

 private:
  std::vector<std::int64_t> ids_;
  Matrix values_;
  std::unordered_map<std::int64_t, std::size_t> row_of_;
};

inline double group_attribution(const InfluenceMatrix& infl, std::size_t query, std::span<const std::int64_t> subset) {
  if (query >= infl.queries()) throw Error(ErrorKind::UnknownId, "query index " + std::to_string(query));
  double s = 0.0;
  for (auto id : subset) s += infl.values()(infl.row(id), query);
  return s;
}

struct SubsetPlan {
  std::size_t num_subsets = 20;
  double alpha = 0.5;
  std::vector<std::uint64_t> retrain_seeds = {0, 1, 2};
  std::uint64_t base_seed = 0;

  std::size_t subset_size(std::size_t n) const {
    return static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-12));
  }
  void validate(std::size_t n) const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
    if (num_subsets < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 subsets");
    if (retrain_seeds.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one retraining seed");
    if (subset_size(n) < 1) throw Error(ErrorKind::InvalidArgument, "subsets would be empty");
  }
};

struct LdsReport {
  std::vector<std::optional<double>> per_query;  // nullopt when either vector is constant
  double mean = 0.0;                              // over defined queries
  std::size_t defined = 0;
  Matrix group_scores;  // subsets x queries
  Matrix outcomes;      // subsets x queries
};

/// Correlates each query's column of `group_scores` with the same column of `outcomes`.
inline LdsReport lds_from(Matrix group_scores, Matrix outcomes) {
  if (group_scores.rows() != outcomes.rows() || group_scores.cols() != outcomes.cols()) {
    throw Error(ErrorKind::LengthMismatch, "group scores and outcomes differ in shape");
  }
  LdsReport r;
  const std::size_t s = group_scores.rows(), q = group_scores.cols();
  std::vector<double> a(s), b(s);
  double total = 0.0;
  for (std::size_t j = 0; j < q; ++j) {
    for (std::size_t i = 0; i < s; ++i) {
      a[i] = group_scores(i, j);
      b[i] = outcomes(i, j);
    }
    try {
      const double v = spearman(a, b);
      r.per_query.emplace_back(v);
      total += v;
      ++r.defined;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ConstantVector) throw;
      r.per_query.emplace_back(std::nullopt);
    }
  }
  r.mean = r.defined ? total / static_cast<double>(r.defined) : 0.0;
  r.group_scores = std::move(group_scores);
  r.outcomes = std::move(outcomes);
  return r;
}

/// Default retraining recipe for attribution studies: mini-batch SGD from a small seeded init,
/// so retraining seeds actually differ.
inline TrainConfig attribution_train_config() {
  TrainConfig c;
  c.init_scale = 0.01;
  return c;
}

/// CLD_infl between every train sample and every query sample, from one full-data run.
inline InfluenceMatrix cld_influence(const Dataset& data, TrainConfig config) {
  config.record_parameter_snapshots = true;
  const auto run = train_and_log(data, config);
  const auto query_log = losslog_from_snapshots(run, data.query, SplitKind::validation);
  return {data.train.ids, cld_infl(delta_trajectories(run.train_log), delta_trajectories(query_log))};
}

/// Random subsets of train ids, each sorted ascending.
inline std::vector<std::vector<std::int64_t>> draw_subsets(const Dataset& data, const SubsetPlan& plan) {
  plan.validate(data.train.size());
  const auto size = plan.subset_size(data.train.size());
  std::vector<std::vector<std::int64_t>> subsets;
  for (std::size_t j = 0; j < plan.num_subsets; ++j) {
    Rng rng(derive_seed(plan.base_seed, 1000 + j));
    auto s = rng.sample<std::int64_t>(data.train.ids, size);
    std::sort(s.begin(), s.end());
    subsets.push_back(std::move(s));
  }
  return subsets;
}

inline LdsReport lds_evaluate(const Dataset& data, const InfluenceMatrix& infl, const SubsetPlan& plan,
                              const TrainConfig& config, unsigned threads = 1) {
  const auto subsets = draw_subsets(data, plan);
  const std::size_t nq = data.query.size(), ns = subsets.size(), nr = plan.retrain_seeds.size();
  if (infl.queries() != nq) throw Error(ErrorKind::LengthMismatch, "influence columns must match the query split");

  Matrix group(ns, nq);
  for (std::size_t j = 0; j < ns; ++j) {
    for (std::size_t q = 0; q < nq; ++q) group(j, q) = group_attribution(infl, q, subsets[j]);
  }

  // one slot per (subset, seed) run, averaged afterwards in a fixed order
  std::vector<std::vector<double>> prob(ns * nr);
  parallel_for(ns * nr, threads, [&](std::size_t task) {
    const std::size_t j = task / nr, r = task % nr;
    TrainConfig c = config;
    c.seed = derive_seed(plan.retrain_seeds[r], j);
    const auto params = fit(data, c, std::span<const std::int64_t>(subsets[j]));
    auto& out = prob[task];
    out.resize(nq);
    for (std::size_t q = 0; q < nq; ++q) out[q] = correct_class_probability(params, data.query.x(q), data.query.labels[q]);
  });
  Matrix outcomes(ns, nq);
  for (std::size_t j = 0; j < ns; ++j) {
    for (std::size_t r = 0; r < nr; ++r) {
      for (std::size_t q = 0; q < nq; ++q) outcomes(j, q) += prob[j * nr + r][q];
    }
    for (std::size_t q = 0; q < nq; ++q) outcomes(j, q) /= static_cast<double>(nr);
  }
  return lds_from(std::move(group), std::move(outcomes));
}

enum class RemovalPolicy { cld_topk, random };

inline std::string_view to_string(RemovalPolicy p) { return p == RemovalPolicy::cld_topk ? "cld_topk" : "random"; }

struct BrittlenessRow {
  RemovalPolicy policy = RemovalPolicy::cld_topk;
  std::size_t k = 0;
  double flip_fraction = 0.0;  // mean over seeds
  std::vector<double> per_seed;
};

struct BrittlenessReport {
  std::vector<BrittlenessRow> rows;

  const BrittlenessRow& at(RemovalPolicy p, std::size_t k) const {
    for (const auto& r : rows) {
      if (r.policy == p && r.k == k) return r;
    }
    throw Error(ErrorKind::InvalidArgument, "no brittleness row for k=" + std::to_string(k));
  }
};

/// Train ids ordered by total influence toward the query split, largest first (ties by id).
inline std::vector<std::int64_t> rank_by_total_influence(const InfluenceMatrix& infl) {
  const auto ids = infl.train_ids();
  std::vector<double> total(ids.size(), 0.0);
  for (std::size_t m = 0; m < ids.size(); ++m) {
    for (std::size_t q = 0; q < infl.queries(); ++q) total[m] += infl.values()(m, q);
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (total[a] != total[b]) return total[a] > total[b];
    return ids[a] < ids[b];
  });
  std::vector<std::int64_t> out;
  for (auto i : order) out.push_back(ids[i]);
  return out;
}

inline BrittlenessReport brittleness(const Dataset& data, const InfluenceMatrix& infl, std::span<const std::size_t> ks,
                                     std::span<const RemovalPolicy> policies, const TrainConfig& config,
                                     std::span<const std::uint64_t> seeds, unsigned threads = 1) {
  const std::size_t n = data.train.size(), nq = data.query.size();
  for (auto k : ks) {
    if (k >= n) throw Error(ErrorKind::SizeTooLarge, "k=" + std::to_string(k) + " must be below N=" + std::to_string(n));
  }
  if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one seed");
  const auto ranked = rank_by_total_influence(infl);

  std::vector<std::vector<int>> baseline(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t s) {
    TrainConfig c = config;
    c.seed = seeds[s];
    const auto params = fit(data, c);
    for (std::size_t q = 0; q < nq; ++q) baseline[s].push_back(predict(params, data.query.x(q)));
  });

  struct Task {
    std::size_t policy, k, seed;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      for (std::size_t s = 0; s < seeds.size(); ++s) tasks.push_back({p, ki, s});
    }
  }
  std::vector<double> flips(tasks.size());
  parallel_for(tasks.size(), threads, [&](std::size_t t) {
    const auto [p, ki, s] = tasks[t];
    const std::size_t k = ks[ki];
    std::vector<std::int64_t> removed;
    if (policies[p] == RemovalPolicy::cld_topk) {
      removed.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      Rng rng(derive_seed(seeds[s], 7000 + k));
      removed = rng.sample<std::int64_t>(data.train.ids, k);
    }
    std::sort(removed.begin(), removed.end());
    std::vector<std::int64_t> keep;
    std::set_difference(data.train.ids.begin(), data.train.ids.end(), removed.begin(), removed.end(),
                        std::back_inserter(keep));
    TrainConfig c = config;
    c.seed = seeds[s];
    const auto params = fit(data, c, std::span<const std::int64_t>(keep));
    std::size_t flipped = 0;
    for (std::size_t q = 0; q < nq; ++q) flipped += predict(params, data.query.x(q)) != baseline[s][q];
    flips[t] = static_cast<double>(flipped) / static_cast<double>(nq);
  });

  BrittlenessReport report;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      BrittlenessRow row;
      row.policy = policies[p];
      row.k = ks[ki];
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const double f = flips[(p * ks.size() + ki) * seeds.size() + s];
        row.per_seed.push_back(f);
        row.flip_fraction += f;
      }
      row.flip_fraction /= static_cast<double>(seeds.size());
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace cld
