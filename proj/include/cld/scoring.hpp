#pragma once
/*
 * CLD scoring.
 *
 * A training sample's score is the Pearson correlation between its
 * loss-difference trajectory and the mean trajectory of the validation
 * samples sharing its label (per-class mode) or of the whole validation split
 * (global mode). A trajectory with zero variance has no defined correlation;
 * such samples score 0 and carry a degenerate flag.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cld/core.hpp"
#include "cld/csv.hpp"
#include "cld/losslog.hpp"

namespace cld {

namespace detail {
inline bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}
}  // namespace detail

/// Correlation before clamping, or nullopt when either input has zero variance.
inline std::optional<double> pearson_unclamped(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "pearson: lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error(ErrorKind::TooShort, "pearson needs at least 2 points");
  if (detail::is_constant(x) || detail::is_constant(y)) return std::nullopt;

  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  // Population normalization: the 1/T factors cancel.
  return sxy / std::sqrt(sxx * syy);
}

/// Pearson correlation clamped to [-1, 1]; nullopt marks a degenerate (zero-variance) input.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  auto r = pearson_unclamped(x, y);
  if (r) *r = std::clamp(*r, -1.0, 1.0);
  return r;
}

struct ClassValidationTrajectory {
  std::map<int, std::vector<double>> per_class;
  std::map<int, std::size_t> counts;
  std::vector<double> global;
};

inline ClassValidationTrajectory validation_class_average(const DeltaMatrix& val) {
  if (val.size() == 0) throw Error(ErrorKind::TooShort, "validation deltas are empty");
  const std::size_t steps = val.length();
  ClassValidationTrajectory out;
  out.global.assign(steps, 0.0);
  for (std::size_t m = 0; m < val.size(); ++m) {
    auto& acc = out.per_class[val.labels[m]];
    if (acc.empty()) acc.assign(steps, 0.0);
    ++out.counts[val.labels[m]];
    const auto row = val.deltas.row(m);
    for (std::size_t t = 0; t < steps; ++t) {
      acc[t] += row[t];
      out.global[t] += row[t];
    }
  }
  for (auto& [c, acc] : out.per_class) {
    const double n = static_cast<double>(out.counts[c]);
    for (double& v : acc) v /= n;
  }
  for (double& v : out.global) v /= static_cast<double>(val.size());
  return out;
}

enum class ScoreMode { per_class, global };

struct ScoreRow {
  std::int64_t sample_id = 0;
  int label = 0;
  double score = 0.0;
  bool degenerate = false;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;

  std::size_t size() const noexcept { return rows.size(); }
  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

inline ScoreTable cld_scores(const DeltaMatrix& train, const ClassValidationTrajectory& val_avg,
                             ScoreMode mode = ScoreMode::per_class) {
  ScoreTable table;
  table.rows.reserve(train.size());
  for (std::size_t m = 0; m < train.size(); ++m) {
    const int label = train.labels[m];
    const std::vector<double>* reference = &val_avg.global;
    if (mode == ScoreMode::per_class) {
      const auto it = val_avg.per_class.find(label);
      if (it == val_avg.per_class.end()) {
        throw Error(ErrorKind::MissingClassValidation,
                    "class " + std::to_string(label) + " has no validation samples");
      }
      reference = &it->second;
    }
    if (reference->size() != train.length()) {
      throw Error(ErrorKind::GridMismatch, "train and validation trajectories differ in length");
    }
    const auto r = pearson(train.deltas.row(m), *reference);
    table.rows.push_back({train.sample_ids[m], label, r.value_or(0.0), !r.has_value()});
  }
  return table;
}

/// End-to-end scoring of a loaded log pair.
inline ScoreTable score_losslogs(const LossLog& train, const LossLog& validation,
                                 ScoreMode mode = ScoreMode::per_class) {
  if (train.grid != validation.grid) {
    throw Error(ErrorKind::GridMismatch, "train grid " + to_string(train.grid) +
                                             " != validation grid " + to_string(validation.grid));
  }
  const auto val_avg = validation_class_average(delta_trajectories(validation));
  return cld_scores(delta_trajectories(train), val_avg, mode);
}

/// Pairwise trajectory correlation: entry (m, q) = pearson(train_m, query_q), 0 when degenerate.
inline Matrix cld_infl(const DeltaMatrix& train, const DeltaMatrix& query) {
  if (train.length() != query.length()) {
    throw Error(ErrorKind::GridMismatch, "train trajectories have length " +
                                             std::to_string(train.length()) + ", query " +
                                             std::to_string(query.length()));
  }
  Matrix out(train.size(), query.size());
  for (std::size_t m = 0; m < train.size(); ++m) {
    for (std::size_t q = 0; q < query.size(); ++q) {
      out(m, q) = pearson(train.deltas.row(m), query.deltas.row(q)).value_or(0.0);
    }
  }
  return out;
}

inline double score_mae(const ScoreTable& a, const ScoreTable& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::IdMismatch, "score tables have " + std::to_string(a.size()) + " and " +
                                           std::to_string(b.size()) + " rows");
  }
  if (a.size() == 0) return 0.0;
  std::unordered_map<std::int64_t, double> lookup;
  for (const auto& r : b.rows) lookup.emplace(r.sample_id, r.score);
  double total = 0.0;
  for (const auto& r : a.rows) {
    const auto it = lookup.find(r.sample_id);
    if (it == lookup.end()) {
      throw Error(ErrorKind::IdMismatch, "sample " + std::to_string(r.sample_id) + " missing from second table");
    }
    total += std::abs(r.score - it->second);
  }
  return total / static_cast<double>(a.size());
}

inline std::string score_table_to_csv(const ScoreTable& t) {
  std::string out = "sample_id,label,score,degenerate\n";
  for (const auto& r : t.rows) {
    out += std::to_string(r.sample_id) + ',' + std::to_string(r.label) + ',' + format_real(r.score) +
           ',' + (r.degenerate ? "1" : "0") + '\n';
  }
  return out;
}

inline void write_score_table(const std::filesystem::path& path, const ScoreTable& t) {
  csv::write_text(path, score_table_to_csv(t));
}

inline ScoreTable read_score_table(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != "sample_id,label,score,degenerate") {
    throw Error(ErrorKind::MalformedRow, path.string() + ": header must be sample_id,label,score,degenerate");
  }
  ScoreTable t;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv::split(lines[i]);
    const auto where = path.string() + ":" + std::to_string(i + 1);
    if (f.size() != 4) throw Error(ErrorKind::MalformedRow, where);
    const auto id = csv::parse_int(f[0]);
    const auto label = csv::parse_int(f[1]);
    const auto score = csv::parse_real(f[2]);
    if (!id || !label || !score || (f[3] != "0" && f[3] != "1")) throw Error(ErrorKind::MalformedRow, where);
    if (!std::isfinite(*score)) throw Error(ErrorKind::NonFiniteLoss, where + ": non-finite score");
    t.rows.push_back({*id, static_cast<int>(*label), *score, f[3] == "1"});
  }
  return t;
}

}  // namespace cld
