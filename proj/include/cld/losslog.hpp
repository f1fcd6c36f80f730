#pragma once
/*
 * Per-sample loss trajectories.
 *
 * A LossLog holds one split's losses at every checkpoint of a CheckpointGrid.
 * Column 0 is always the evaluation at initialization, so a log with T+1
 * columns yields T loss differences per sample.
 *
 * On disk a log directory holds `manifest.json` plus one CSV per split:
 *
 *   sample_id,label,loss_0,loss_1,...,loss_T
 *
 * where the suffix of every `loss_` column is the checkpoint id. Reals are
 * written with 17 significant digits so a load/write cycle is byte-stable.
 */

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "cld/core.hpp"
#include "cld/csv.hpp"
#include "json.hpp"

namespace cld {

enum class SplitKind { train, validation };

inline std::string_view to_string(SplitKind s) {
  return s == SplitKind::train ? "train" : "validation";
}

struct CheckpointGrid {
  std::vector<std::int64_t> indices;

  static CheckpointGrid range(std::int64_t last) {
    CheckpointGrid g;
    for (std::int64_t i = 0; i <= last; ++i) g.indices.push_back(i);
    return g;
  }

  std::size_t size() const noexcept { return indices.size(); }
  std::size_t num_differences() const noexcept { return indices.empty() ? 0 : indices.size() - 1; }

  void validate() const {
    if (indices.size() < 2) {
      throw Error(ErrorKind::EmptyGrid, "checkpoint grid needs at least 2 entries, has " +
                                            std::to_string(indices.size()));
    }
    if (indices.front() != 0) {
      throw Error(ErrorKind::InvalidArgument, "checkpoint grid must start at 0");
    }
    for (std::size_t i = 1; i < indices.size(); ++i) {
      if (indices[i] <= indices[i - 1]) {
        throw Error(ErrorKind::InvalidArgument, "checkpoint grid must be strictly increasing");
      }
    }
  }

  friend bool operator==(const CheckpointGrid&, const CheckpointGrid&) = default;
};

inline std::string to_string(const CheckpointGrid& g) {
  std::string s = "(";
  for (std::size_t i = 0; i < g.indices.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(g.indices[i]);
  }
  return s + ")";
}

struct LossLog {
  SplitKind split = SplitKind::train;
  std::vector<std::int64_t> sample_ids;
  std::vector<int> labels;
  CheckpointGrid grid;
  Matrix losses;  // sample_ids.size() x grid.size()

  std::size_t size() const noexcept { return sample_ids.size(); }

  /// Throws on any violated invariant.
  void validate() const {
    grid.validate();
    if (labels.size() != sample_ids.size() || losses.rows() != sample_ids.size()) {
      throw Error(ErrorKind::LengthMismatch, "sample_ids, labels and loss rows disagree in length");
    }
    if (!sample_ids.empty() && losses.cols() != grid.size()) {
      throw Error(ErrorKind::MalformedRow, "loss matrix has " + std::to_string(losses.cols()) +
                                               " columns, grid has " +
                                               std::to_string(grid.size()));
    }
    std::unordered_set<std::int64_t> seen;
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
      if (sample_ids[i] < 0) {
        throw Error(ErrorKind::InvalidArgument, "negative sample id " + std::to_string(sample_ids[i]));
      }
      if (!seen.insert(sample_ids[i]).second) {
        throw Error(ErrorKind::DuplicateSampleId, "sample id " + std::to_string(sample_ids[i]));
      }
      if (labels[i] < 0) {
        throw Error(ErrorKind::InvalidArgument, "negative label for sample " + std::to_string(sample_ids[i]));
      }
      for (double v : losses.row(i)) {
        if (!std::isfinite(v)) {
          throw Error(ErrorKind::NonFiniteLoss, "sample id " + std::to_string(sample_ids[i]));
        }
        if (v < 0.0) {
          throw Error(ErrorKind::NegativeLoss, "sample id " + std::to_string(sample_ids[i]));
        }
      }
    }
  }

  /// Rows whose ids appear in `ids`, in this log's order.
  LossLog select_rows(std::span<const std::int64_t> ids) const {
    const std::unordered_set<std::int64_t> wanted(ids.begin(), ids.end());
    LossLog out;
    out.split = split;
    out.grid = grid;
    out.losses = Matrix(0, grid.size());
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
      if (!wanted.count(sample_ids[i])) continue;
      out.sample_ids.push_back(sample_ids[i]);
      out.labels.push_back(labels[i]);
      out.losses.append_row(losses.row(i));
    }
    return out;
  }

  friend bool operator==(const LossLog&, const LossLog&) = default;
};

/// Per-sample loss-difference trajectories: column t is loss[t] - loss[t-1] over the grid.
struct DeltaMatrix {
  std::vector<std::int64_t> sample_ids;
  std::vector<int> labels;
  Matrix deltas;  // M x T

  std::size_t size() const noexcept { return sample_ids.size(); }
  std::size_t length() const noexcept { return deltas.cols(); }
};

inline DeltaMatrix delta_trajectories(const LossLog& log) {
  log.grid.validate();
  DeltaMatrix out;
  out.sample_ids = log.sample_ids;
  out.labels = log.labels;
  const std::size_t steps = log.grid.num_differences();
  out.deltas = Matrix(log.size(), steps);
  for (std::size_t m = 0; m < log.size(); ++m) {
    const auto row = log.losses.row(m);
    for (std::size_t t = 0; t < steps; ++t) out.deltas(m, t) = row[t + 1] - row[t];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint subsampling

struct SubsamplePlan {
  struct Prefix { std::size_t count; };
  struct Stride { std::size_t step; };
  struct Explicit { std::vector<std::int64_t> indices; };
  std::variant<Prefix, Stride, Explicit> rule;

  static SubsamplePlan prefix(std::size_t n) { return {Prefix{n}}; }
  static SubsamplePlan stride(std::size_t s) { return {Stride{s}}; }
  static SubsamplePlan explicit_indices(std::vector<std::int64_t> idx) { return {Explicit{std::move(idx)}}; }
};

/// Column positions of `grid` retained by `plan`.
inline std::vector<std::size_t> retained_positions(const CheckpointGrid& grid, const SubsamplePlan& plan) {
  std::vector<std::size_t> keep;
  if (const auto* p = std::get_if<SubsamplePlan::Prefix>(&plan.rule)) {
    for (std::size_t i = 0; i < std::min(p->count, grid.size()); ++i) keep.push_back(i);
  } else if (const auto* s = std::get_if<SubsamplePlan::Stride>(&plan.rule)) {
    if (s->step == 0) throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
    for (std::size_t i = 0; i < grid.size(); i += s->step) keep.push_back(i);
  } else {
    auto wanted = std::get<SubsamplePlan::Explicit>(plan.rule).indices;
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
    for (auto idx : wanted) {
      const auto it = std::lower_bound(grid.indices.begin(), grid.indices.end(), idx);
      if (it == grid.indices.end() || *it != idx) {
        throw Error(ErrorKind::UnknownIndex, "checkpoint " + std::to_string(idx) + " is not in grid " +
                                                 to_string(grid));
      }
      keep.push_back(static_cast<std::size_t>(it - grid.indices.begin()));
    }
    if (keep.empty() || keep.front() != 0) {
      throw Error(ErrorKind::InvalidArgument, "explicit checkpoint selection must retain checkpoint 0");
    }
  }
  if (keep.size() < 2) {
    throw Error(ErrorKind::EmptyGrid, "subsampling " + to_string(grid) + " leaves " +
                                          std::to_string(keep.size()) + " checkpoint(s)");
  }
  return keep;
}

inline LossLog subsample_checkpoints(const LossLog& log, const SubsamplePlan& plan) {
  const auto keep = retained_positions(log.grid, plan);
  LossLog out;
  out.split = log.split;
  out.sample_ids = log.sample_ids;
  out.labels = log.labels;
  for (auto pos : keep) out.grid.indices.push_back(log.grid.indices[pos]);
  out.losses = Matrix(log.size(), keep.size());
  for (std::size_t m = 0; m < log.size(); ++m) {
    for (std::size_t j = 0; j < keep.size(); ++j) out.losses(m, j) = log.losses(m, keep[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV format

inline std::string losslog_to_csv(const LossLog& log) {
  std::string out = "sample_id,label";
  for (auto idx : log.grid.indices) out += ",loss_" + std::to_string(idx);
  out += '\n';
  for (std::size_t m = 0; m < log.size(); ++m) {
    out += std::to_string(log.sample_ids[m]);
    out += ',';
    out += std::to_string(log.labels[m]);
    for (double v : log.losses.row(m)) {
      out += ',';
      out += format_real(v);
    }
    out += '\n';
  }
  return out;
}

inline void write_losslog_csv(const std::filesystem::path& path, const LossLog& log) {
  csv::write_text(path, losslog_to_csv(log));
}

inline LossLog read_losslog_csv(const std::filesystem::path& path, SplitKind split) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::MissingFile, path.string());
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw Error(ErrorKind::MalformedRow, path.string() + ": missing header");

  const auto header = csv::split(lines[0]);
  if (header.size() < 4 || header[0] != "sample_id" || header[1] != "label") {
    throw Error(ErrorKind::MalformedRow,
                path.string() + ": header must be sample_id,label,loss_0,...,loss_T");
  }
  LossLog log;
  log.split = split;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const auto name = header[c];
    std::optional<std::int64_t> idx;
    if (name.starts_with("loss_")) idx = csv::parse_int(name.substr(5));
    if (!idx) throw Error(ErrorKind::MalformedRow, path.string() + ": bad column '" + std::string(name) + "'");
    log.grid.indices.push_back(*idx);
  }
  log.grid.validate();
  const std::size_t width = log.grid.size();
  log.losses = Matrix(0, width);

  std::vector<double> row(width);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = csv::split(lines[li]);
    const auto where = path.string() + ":" + std::to_string(li + 1);
    if (fields.size() != width + 2) {
      throw Error(ErrorKind::MalformedRow, where + ": expected " + std::to_string(width) +
                                               " losses, found " +
                                               std::to_string(fields.size() < 2 ? 0 : fields.size() - 2));
    }
    const auto id = csv::parse_int(fields[0]);
    const auto label = csv::parse_int(fields[1]);
    if (!id || !label) throw Error(ErrorKind::MalformedRow, where + ": bad sample_id or label");
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = csv::parse_real(fields[c + 2]);
      if (!v) throw Error(ErrorKind::MalformedRow, where + ": bad loss value '" + std::string(fields[c + 2]) + "'");
      if (!std::isfinite(*v)) {
        throw Error(ErrorKind::NonFiniteLoss, "sample id " + std::to_string(*id) + " (" + where + ")");
      }
      row[c] = *v;
    }
    log.sample_ids.push_back(*id);
    log.labels.push_back(static_cast<int>(*label));
    log.losses.append_row(row);
  }
  log.validate();
  return log;
}

// ---------------------------------------------------------------------------
// Manifest and directory layout

struct Manifest {
  std::string version = "1";
  std::string dataset_name;
  int num_classes = 0;
  std::uint64_t seed = 0;
  std::string checkpoint_unit = "epoch";
  std::map<std::string, std::string> files{{"train", "train.csv"}, {"validation", "validation.csv"}};
};

inline nlohmann::ordered_json to_json(const Manifest& m) {
  nlohmann::ordered_json files;
  for (const auto& [k, v] : m.files) files[k] = v;
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["dataset_name"] = m.dataset_name;
  j["num_classes"] = m.num_classes;
  j["seed"] = m.seed;
  j["checkpoint_unit"] = m.checkpoint_unit;
  j["files"] = files;
  return j;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    m.version = j.at("version").get<std::string>();
    m.dataset_name = j.value("dataset_name", std::string{});
    m.num_classes = j.at("num_classes").get<int>();
    m.seed = j.value("seed", std::uint64_t{0});
    m.checkpoint_unit = j.value("checkpoint_unit", std::string{"epoch"});
    m.files.clear();
    for (const auto& [k, v] : j.at("files").items()) m.files[k] = v.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedRow, std::string("manifest: ") + e.what());
  }
  if (m.checkpoint_unit != "epoch") {
    throw Error(ErrorKind::InvalidArgument, "unsupported checkpoint_unit '" + m.checkpoint_unit + "'");
  }
  if (!m.files.count("train") || !m.files.count("validation")) {
    throw Error(ErrorKind::MalformedRow, "manifest must list train and validation files");
  }
  return m;
}

struct LossLogBundle {
  Manifest manifest;
  LossLog train;
  LossLog validation;
};

/// Checks the cross-split invariants: identical grids and a class count matching the labels.
inline void validate_bundle(const LossLogBundle& b) {
  b.train.validate();
  b.validation.validate();
  if (b.train.grid != b.validation.grid) {
    throw Error(ErrorKind::GridMismatch, "train grid " + to_string(b.train.grid) +
                                             " != validation grid " + to_string(b.validation.grid));
  }
  std::set<int> classes(b.train.labels.begin(), b.train.labels.end());
  classes.insert(b.validation.labels.begin(), b.validation.labels.end());
  if (static_cast<int>(classes.size()) != b.manifest.num_classes ||
      (!classes.empty() && *classes.rbegin() >= b.manifest.num_classes)) {
    throw Error(ErrorKind::InvalidArgument,
                "manifest num_classes=" + std::to_string(b.manifest.num_classes) +
                    " but logs use " + std::to_string(classes.size()) + " distinct labels");
  }
}

inline LossLogBundle load_losslog(const std::filesystem::path& manifest_path) {
  std::filesystem::path path = manifest_path;
  if (std::filesystem::is_directory(path)) path /= "manifest.json";
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::MissingFile, path.string());

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MalformedRow, path.string() + ": " + e.what());
  }
  LossLogBundle b;
  b.manifest = manifest_from_json(j);
  const auto dir = path.parent_path();
  b.train = read_losslog_csv(dir / b.manifest.files.at("train"), SplitKind::train);
  b.validation = read_losslog_csv(dir / b.manifest.files.at("validation"), SplitKind::validation);
  validate_bundle(b);
  return b;
}

inline void write_losslog(const std::filesystem::path& dir, const LossLogBundle& b) {
  validate_bundle(b);
  std::filesystem::create_directories(dir);
  write_losslog_csv(dir / b.manifest.files.at("train"), b.train);
  write_losslog_csv(dir / b.manifest.files.at("validation"), b.validation);
  csv::write_text(dir / "manifest.json", to_json(b.manifest).dump(2) + "\n");
}

}  // namespace cld
