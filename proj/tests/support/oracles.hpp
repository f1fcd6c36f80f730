#pragma once
// Brute-force reference implementations and randomized property checks, shared by the
// unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cld/losslog.hpp"
#include "cld/random.hpp"
#include "cld/scoring.hpp"
#include "cld/selection.hpp"

namespace cld::oracle {

struct Tally {
  std::size_t cases = 0;
  std::vector<std::string> failures;

  void check(bool ok, const std::string& what) {
    ++cases;
    if (!ok && failures.size() < 20) failures.push_back(what);
    if (!ok) ++failed;
  }
  bool ok() const { return failed == 0; }
  std::size_t failed = 0;
};

// Plain loops over std::vector, population moments divided out term by term.
inline std::optional<double> pearson_loop(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  bool cx = true, cy = true;
  for (std::size_t i = 1; i < n; ++i) {
    cx = cx && x[i] == x[0];
    cy = cy && y[i] == y[0];
  }
  if (cx || cy) return std::nullopt;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (x[i] - mx) * (y[i] - my) / static_cast<double>(n);
    vx += (x[i] - mx) * (x[i] - mx) / static_cast<double>(n);
    vy += (y[i] - my) * (y[i] - my) / static_cast<double>(n);
  }
  return std::clamp(cov / (std::sqrt(vx) * std::sqrt(vy)), -1.0, 1.0);
}

inline std::vector<std::vector<double>> rows_of(const LossLog& log) {
  std::vector<std::vector<double>> out;
  for (std::size_t m = 0; m < log.size(); ++m) {
    std::vector<double> d;
    for (std::size_t t = 1; t < log.grid.size(); ++t) d.push_back(log.losses(m, t) - log.losses(m, t - 1));
    out.push_back(d);
  }
  return out;
}

inline std::map<int, std::vector<double>> class_means_loop(const LossLog& val) {
  const auto rows = rows_of(val);
  std::map<int, std::vector<double>> sum;
  std::map<int, double> count;
  for (std::size_t m = 0; m < rows.size(); ++m) {
    auto& s = sum[val.labels[m]];
    if (s.empty()) s.assign(rows[m].size(), 0.0);
    for (std::size_t t = 0; t < rows[m].size(); ++t) s[t] += rows[m][t];
    count[val.labels[m]] += 1;
  }
  for (auto& [c, s] : sum) {
    for (double& v : s) v /= count[c];
  }
  return sum;
}

inline std::vector<std::int64_t> topk_loop(const ScoreTable& t, const Quotas& quotas) {
  std::vector<std::int64_t> out;
  for (const auto& [c, k] : quotas) {
    std::vector<ScoreRow> members;
    for (const auto& r : t.rows) {
      if (r.label == c) members.push_back(r);
    }
    std::sort(members.begin(), members.end(), [](const ScoreRow& a, const ScoreRow& b) {
      return a.score > b.score || (a.score == b.score && a.sample_id < b.sample_id);
    });
    for (std::size_t i = 0; i < k; ++i) out.push_back(members[i].sample_id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Log with shuffled ids, occasional constant rows and occasional coarse (tied) values.
inline LossLog random_instance_log(Rng& rng, SplitKind split, std::size_t n, int classes, std::size_t t,
                                   bool all_classes = true) {
  LossLog log;
  log.split = split;
  log.grid = CheckpointGrid::range(static_cast<std::int64_t>(t));
  log.losses = Matrix(n, t + 1);
  std::vector<std::int64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int64_t>(i * 3 + 1);
  rng.shuffle<std::int64_t>(ids);
  const bool coarse = rng.uniform01() < 0.3;
  for (std::size_t i = 0; i < n; ++i) {
    log.sample_ids.push_back(ids[i]);
    const int label = all_classes && i < static_cast<std::size_t>(classes)
                          ? static_cast<int>(i)
                          : static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
    log.labels.push_back(label);
    const bool flat = rng.uniform01() < 0.05;
    const double base = 2.0 * rng.uniform01();
    for (std::size_t c = 0; c <= t; ++c) {
      double v = flat ? base : 2.5 * rng.uniform01();
      if (coarse) v = std::round(v * 4.0) / 4.0;
      log.losses(i, c) = v;
    }
  }
  return log;
}

/// Library scoring and selection against the loop oracles on random instances.
inline Tally scoring_equivalence(std::size_t instances, std::uint64_t seed) {
  Tally tally;
  Rng rng(seed);
  for (std::size_t inst = 0; inst < instances; ++inst) {
    const int classes = 1 + static_cast<int>(rng.uniform_index(5));
    const std::size_t t = 2 + rng.uniform_index(19);
    const std::size_t n = static_cast<std::size_t>(classes) + rng.uniform_index(201 - static_cast<std::uint64_t>(classes));
    const std::size_t q = static_cast<std::size_t>(classes) + rng.uniform_index(51 - static_cast<std::uint64_t>(classes));
    const auto train = random_instance_log(rng, SplitKind::train, n, classes, t);
    const auto val = random_instance_log(rng, SplitKind::validation, q, classes, t);
    const std::string tag = "instance " + std::to_string(inst);

    // class averages
    const auto avg = validation_class_average(delta_trajectories(val));
    const auto means = class_means_loop(val);
    double worst = 0.0;
    bool same_keys = avg.per_class.size() == means.size();
    for (const auto& [c, m] : means) {
      const auto it = avg.per_class.find(c);
      if (it == avg.per_class.end()) {
        same_keys = false;
        continue;
      }
      for (std::size_t j = 0; j < m.size(); ++j) worst = std::max(worst, std::abs(m[j] - it->second[j]));
    }
    tally.check(same_keys && worst <= 1e-12, tag + ": validation_class_average deviates by " + std::to_string(worst));

    // scores
    const auto table = cld_scores(delta_trajectories(train), avg);
    const auto rows = rows_of(train);
    worst = 0.0;
    bool flags = table.size() == n;
    for (std::size_t m = 0; m < n && flags; ++m) {
      const auto r = pearson_loop(rows[m], means.at(train.labels[m]));
      flags = flags && table.rows[m].sample_id == train.sample_ids[m] && table.rows[m].degenerate == !r.has_value();
      worst = std::max(worst, std::abs(table.rows[m].score - r.value_or(0.0)));
    }
    tally.check(flags && worst <= 1e-12, tag + ": cld_scores deviates by " + std::to_string(worst));

    // pairwise influence against the validation rows as queries
    const auto infl = cld_infl(delta_trajectories(train), delta_trajectories(val));
    const auto qrows = rows_of(val);
    worst = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      for (std::size_t j = 0; j < q; ++j) worst = std::max(worst, std::abs(infl(m, j) - pearson_loop(rows[m], qrows[j]).value_or(0.0)));
    }
    tally.check(worst <= 1e-12, tag + ": cld_infl deviates by " + std::to_string(worst));

    // top-k on the computed table
    const std::size_t k = 1 + rng.uniform_index(n);
    const auto quotas = allocate_quotas(k, class_sizes(table));
    tally.check(select_topk(table, quotas).sample_ids == topk_loop(table, quotas), tag + ": select_topk id set differs");
  }
  return tally;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal() * std::exp(3.0 * rng.normal());
  return v;
}

/// Randomized invariants; `per_property` cases for each of the nine properties.
inline Tally property_suite(std::size_t per_property, std::uint64_t seed) {
  Tally tally;
  Rng rng(seed);
  for (std::size_t i = 0; i < per_property; ++i) {
    const std::string tag = " (case " + std::to_string(i) + ")";
    const std::size_t len = 2 + rng.uniform_index(40);
    auto x = random_vector(rng, len), y = random_vector(rng, len);
    const auto r = pearson(x, y);
    if (!r) continue;

    // shift and scale invariance
    const double a = std::exp(2.0 * rng.normal()), b = 10.0 * rng.normal();
    std::vector<double> ax(len), nx(len);
    for (std::size_t j = 0; j < len; ++j) {
      ax[j] = a * x[j] + b;
      nx[j] = -a * x[j] + b;
    }
    const auto ra = pearson(ax, y), rn = pearson(nx, y);
    tally.check(ra && std::abs(*ra - *r) <= 1e-12, "pearson positive affine invariance" + tag);
    tally.check(rn && std::abs(*rn + *r) <= 1e-12, "pearson negative affine flips sign" + tag);

    // symmetry and bounds
    tally.check(*pearson(y, x) == *r, "pearson symmetry" + tag);
    const auto raw = pearson_unclamped(x, y);
    tally.check(*r >= -1.0 && *r <= 1.0 && std::abs(*raw - *r) <= 1e-9, "pearson bound" + tag);
    const auto self = pearson_unclamped(x, x);
    tally.check(std::abs(*self - 1.0) <= 1e-9 && *pearson(x, x) <= 1.0, "pearson self-correlation bound" + tag);
  }

  for (std::size_t i = 0; i < per_property; ++i) {
    const std::string tag = " (case " + std::to_string(i) + ")";
    const std::size_t n = 1 + rng.uniform_index(30), t = 2 + rng.uniform_index(24);
    auto log = random_instance_log(rng, SplitKind::train, n, 1, t);
    for (double& v : log.losses.data()) v *= std::exp(2.0 * rng.normal());
    const auto d = delta_trajectories(log);
    bool ok = true;
    for (std::size_t m = 0; m < n; ++m) {
      double s = 0.0, scale = 0.0;
      for (double v : d.deltas.row(m)) s += v;
      for (double v : log.losses.row(m)) scale = std::max(scale, std::abs(v));
      ok = ok && std::abs(s - (log.losses(m, t) - log.losses(m, 0))) <= 4.0 * t * 1e-16 * std::max(1.0, scale) + 1e-300;
    }
    tally.check(ok, "delta telescoping" + tag);

    // subsampling commutes with row selection
    const auto plan = rng.uniform01() < 0.5 ? SubsamplePlan::stride(1 + rng.uniform_index(2))
                                            : SubsamplePlan::prefix(2 + rng.uniform_index(t));
    std::vector<std::int64_t> pick;
    for (auto id : log.sample_ids) {
      if (rng.uniform01() < 0.5) pick.push_back(id);
    }
    tally.check(subsample_checkpoints(log, plan).select_rows(pick) == subsample_checkpoints(log.select_rows(pick), plan),
                "subsample commutes with row selection" + tag);
  }

  for (std::size_t i = 0; i < per_property; ++i) {
    const std::string tag = " (case " + std::to_string(i) + ")";
    const int classes = 1 + static_cast<int>(rng.uniform_index(6));
    ClassSizes sizes;
    std::size_t total_n = 0;
    for (int c = 0; c < classes; ++c) {
      const auto nc = static_cast<std::size_t>(rng.uniform_index(40));
      if (nc == 0) continue;
      sizes[c] = nc;
      total_n += nc;
    }
    if (total_n == 0) continue;
    const std::size_t k = 1 + rng.uniform_index(total_n);
    const auto q = allocate_quotas(k, sizes);
    bool within = true;
    for (const auto& [c, kc] : q) within = within && kc <= sizes.at(c) && kc > 0;
    tally.check(total(q) == k && within, "quota conservation" + tag);

    // monotonicity: one more slot in one class adds exactly that class's next id
    ScoreTable table;
    std::int64_t id = 0;
    for (const auto& [c, nc] : sizes) {
      for (std::size_t j = 0; j < nc; ++j) table.rows.push_back({id++, c, std::round(rng.normal() * 4.0) / 4.0, false});
    }
    Quotas grown = q;
    std::vector<int> open;
    for (const auto& [c, nc] : sizes) {
      if ((grown.count(c) ? grown.at(c) : 0) < nc) open.push_back(c);
    }
    if (open.empty()) continue;
    ++grown[open[rng.uniform_index(open.size())]];
    const auto before = select_topk(table, q).sample_ids;
    const auto after = select_topk(table, grown).sample_ids;
    std::vector<std::int64_t> added;
    std::set_difference(after.begin(), after.end(), before.begin(), before.end(), std::back_inserter(added));
    tally.check(after.size() == before.size() + 1 && added.size() == 1 &&
                    std::includes(after.begin(), after.end(), before.begin(), before.end()),
                "selection monotone in k" + tag);
  }

  for (std::size_t i = 0; i < per_property; ++i) {
    const std::string tag = " (case " + std::to_string(i) + ")";
    const std::uint64_t s = rng.next_u64();
    auto build = [&] {
      Rng local(s);
      const auto tr = random_instance_log(local, SplitKind::train, 20 + local.uniform_index(60), 3, 2 + local.uniform_index(10));
      const auto va = random_instance_log(local, SplitKind::validation, 10, 3, tr.grid.size() - 1);
      const auto table = score_losslogs(tr, va);
      const auto quotas = allocate_quotas(1 + table.size() / 4, class_sizes(table));
      std::string bytes = score_table_to_csv(table);
      for (const auto& c : {select_topk(table, quotas), select_random(table, quotas, s), ccs_stratified(table, 5, 4, 0.1, s)}) {
        bytes += "|";
        for (auto id : c.sample_ids) bytes += std::to_string(id) + ",";
      }
      return bytes;
    };
    tally.check(build() == build(), "same seed gives identical score and coreset bytes" + tag);

    // scaling all losses leaves the score order (indeed the scores) unchanged
    Rng local(s ^ 0x5555);
    auto tr = random_instance_log(local, SplitKind::train, 30, 2, 6);
    auto va = random_instance_log(local, SplitKind::validation, 8, 2, 6);
    const auto base = score_losslogs(tr, va);
    const double a = std::exp(local.normal());
    for (double& v : tr.losses.data()) v *= a;
    for (double& v : va.losses.data()) v *= a;
    const auto scaled = score_losslogs(tr, va);
    auto order = [](const ScoreTable& t) {
      std::vector<std::size_t> o(t.size());
      for (std::size_t j = 0; j < o.size(); ++j) o[j] = j;
      std::stable_sort(o.begin(), o.end(), [&](auto x, auto y) { return t.rows[x].score > t.rows[y].score; });
      return o;
    };
    double worst = 0.0;
    for (std::size_t j = 0; j < base.size(); ++j) worst = std::max(worst, std::abs(base.rows[j].score - scaled.rows[j].score));
    // near-ties may swap at rounding level, so the order is compared only when scores match exactly
    tally.check(worst <= 1e-12 && (worst > 0.0 || order(base) == order(scaled)),
                "scores invariant under positive loss scaling" + tag);
  }
  return tally;
}

}  // namespace cld::oracle
