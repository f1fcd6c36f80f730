#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cld/losslog.hpp"
#include "cld/random.hpp"

namespace cld::testing {

inline LossLog make_log(SplitKind split, std::vector<std::int64_t> ids, std::vector<int> labels,
                        std::vector<std::vector<double>> rows, std::vector<std::int64_t> grid = {}) {
  LossLog log;
  log.split = split;
  log.sample_ids = std::move(ids);
  log.labels = std::move(labels);
  if (grid.empty()) {
    for (std::size_t i = 0; i < (rows.empty() ? 0 : rows[0].size()); ++i) grid.push_back(static_cast<std::int64_t>(i));
  }
  log.grid.indices = std::move(grid);
  log.losses = Matrix(0, log.grid.size());
  for (const auto& r : rows) log.losses.append_row(r);
  return log;
}

/// Random non-negative log with `n` samples over `classes` labels and grid 0..t.
inline LossLog random_log(Rng& rng, SplitKind split, std::size_t n, int classes, std::size_t t,
                          std::int64_t first_id = 0) {
  LossLog log;
  log.split = split;
  log.grid = CheckpointGrid::range(static_cast<std::int64_t>(t));
  log.losses = Matrix(n, t + 1);
  for (std::size_t i = 0; i < n; ++i) {
    log.sample_ids.push_back(first_id + static_cast<std::int64_t>(i));
    log.labels.push_back(static_cast<int>(i % static_cast<std::size_t>(classes)));
    for (std::size_t c = 0; c <= t; ++c) log.losses(i, c) = 3.0 * rng.uniform01();
  }
  return log;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cld_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace cld::testing
