#pragma once
/*
 * Coreset construction from a ScoreTable.
 *
 *  - allocate_quotas: split a total budget over classes proportionally
 *    (largest remainder, ties to the lowest class id).
 *  - select_topk: per class, highest scores first, ties broken by sample id.
 *  - ccs_stratified: prune the lowest scores, bin the rest by equal-width
 *    score intervals, draw an equal number per bin.
 *  - build_validation_set: score-driven pickers for constructing a
 *    validation split out of a pool.
 *
 * Every random draw goes through cld::Rng, so results depend only on the seed.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cld/core.hpp"
#include "cld/csv.hpp"
#include "cld/random.hpp"
#include "cld/scoring.hpp"
#include "json.hpp"

namespace cld {

using ClassSizes = std::map<int, std::size_t>;
using Quotas = std::map<int, std::size_t>;

inline ClassSizes class_sizes(const ScoreTable& t) {
  ClassSizes sizes;
  for (const auto& r : t.rows) ++sizes[r.label];
  return sizes;
}

inline std::size_t total(const Quotas& q) {
  std::size_t s = 0;
  for (const auto& [c, k] : q) s += k;
  return s;
}

inline Quotas allocate_quotas(std::size_t k, const ClassSizes& sizes) {
  std::size_t n = 0;
  for (const auto& [c, nc] : sizes) n += nc;
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "budget must be positive");
  if (k > n) {
    throw Error(ErrorKind::BudgetTooLarge, "budget " + std::to_string(k) + " exceeds " + std::to_string(n) + " samples");
  }
  Quotas quotas;
  std::vector<std::pair<int, std::uint64_t>> remainders;  // (class, k*n_c mod n)
  std::size_t assigned = 0;
  for (const auto& [c, nc] : sizes) {
    const auto scaled = static_cast<unsigned __int128>(k) * nc;
    const auto base = static_cast<std::size_t>(scaled / n);
    quotas[c] = std::min(base, nc);
    assigned += quotas[c];
    remainders.emplace_back(c, static_cast<std::uint64_t>(scaled % n));
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::size_t residue = k - assigned;
  for (const auto& [c, rem] : remainders) {
    if (residue == 0) break;
    if (quotas[c] < sizes.at(c)) {
      ++quotas[c];
      --residue;
    }
  }
  // Anything still unplaced goes to the classes with the most spare capacity.
  while (residue > 0) {
    int best = -1;
    std::size_t best_spare = 0;
    for (const auto& [c, nc] : sizes) {
      const std::size_t spare = nc - quotas[c];
      if (spare > best_spare) {
        best = c;
        best_spare = spare;
      }
    }
    ++quotas[best];
    --residue;
  }
  for (auto it = quotas.begin(); it != quotas.end();) {
    it = it->second == 0 ? quotas.erase(it) : std::next(it);
  }
  return quotas;
}

/// Budget specification: a fraction of N, an absolute total, or explicit per-class counts.
struct Budget {
  struct Fraction { double p; };
  struct Total { std::size_t k; };
  struct PerClass { Quotas quotas; };
  std::variant<Fraction, Total, PerClass> spec;

  static Budget fraction(double p) { return {Fraction{p}}; }
  static Budget total(std::size_t k) { return {Total{k}}; }
  static Budget per_class(Quotas q) { return {PerClass{std::move(q)}}; }

  Quotas resolve(const ClassSizes& sizes) const {
    std::size_t n = 0;
    for (const auto& [c, nc] : sizes) n += nc;
    if (const auto* f = std::get_if<Fraction>(&spec)) {
      if (!(f->p > 0.0 && f->p <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "fraction must lie in (0, 1]");
      }
      return allocate_quotas(static_cast<std::size_t>(std::llround(f->p * static_cast<double>(n))), sizes);
    }
    if (const auto* t = std::get_if<Total>(&spec)) return allocate_quotas(t->k, sizes);
    const auto& q = std::get<PerClass>(spec).quotas;
    for (const auto& [c, kc] : q) {
      const auto it = sizes.find(c);
      const std::size_t nc = it == sizes.end() ? 0 : it->second;
      if (kc > nc) {
        throw Error(ErrorKind::QuotaExceedsClass, "class " + std::to_string(c) + ": quota " +
                                                      std::to_string(kc) + " > size " + std::to_string(nc));
      }
    }
    return q;
  }
};

enum class Provenance { cld_topk, ccs_stratified, random };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::cld_topk: return "cld_topk";
    case Provenance::ccs_stratified: return "ccs_stratified";
    case Provenance::random: return "random";
  }
  return "unknown";
}

struct Coreset {
  std::vector<std::int64_t> sample_ids;  // ascending
  std::map<int, std::size_t> per_class;
  Provenance provenance = Provenance::cld_topk;
  Quotas quotas;
  std::optional<std::uint64_t> seed;

  std::size_t size() const noexcept { return sample_ids.size(); }
};

namespace detail {

inline Coreset finish(std::vector<const ScoreRow*> chosen, Provenance prov) {
  std::sort(chosen.begin(), chosen.end(), [](auto* a, auto* b) { return a->sample_id < b->sample_id; });
  Coreset c;
  c.provenance = prov;
  for (const auto* r : chosen) {
    c.sample_ids.push_back(r->sample_id);
    ++c.per_class[r->label];
  }
  return c;
}

inline bool by_score_desc(const ScoreRow* a, const ScoreRow* b) {
  if (a->score != b->score) return a->score > b->score;
  return a->sample_id < b->sample_id;
}

inline bool by_score_asc(const ScoreRow* a, const ScoreRow* b) {
  if (a->score != b->score) return a->score < b->score;
  return a->sample_id < b->sample_id;
}

/// Equal split of `budget` over bins with the given capacities; leftovers are dealt
/// round-robin over bins that still have room.
inline std::vector<std::size_t> equal_bin_quotas(std::span<const std::size_t> capacity, std::size_t budget) {
  std::vector<std::size_t> q(capacity.size(), 0);
  std::size_t remaining = budget;
  while (remaining > 0) {
    bool progressed = false;
    for (std::size_t b = 0; b < capacity.size() && remaining > 0; ++b) {
      if (q[b] < capacity[b]) {
        ++q[b];
        --remaining;
        progressed = true;
      }
    }
    if (!progressed) throw Error(ErrorKind::BudgetTooLarge, "bins cannot hold the requested budget");
  }
  return q;
}

/// Equal-width bin index of each value over [min, max].
inline std::vector<std::size_t> bin_values(std::span<const double> values, std::size_t num_bins) {
  std::vector<std::size_t> bins(values.size(), 0);
  if (values.empty()) return bins;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) return bins;
  const double width = (hi - lo) / static_cast<double>(num_bins);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto b = static_cast<std::size_t>(std::floor((values[i] - lo) / width));
    bins[i] = std::min(b, num_bins - 1);
  }
  return bins;
}

}  // namespace detail

inline Coreset select_topk(const ScoreTable& scores, const Quotas& quotas) {
  std::map<int, std::vector<const ScoreRow*>> by_class;
  for (const auto& r : scores.rows) by_class[r.label].push_back(&r);

  std::vector<const ScoreRow*> chosen;
  for (const auto& [c, kc] : quotas) {
    if (kc == 0) continue;
    auto it = by_class.find(c);
    const std::size_t nc = it == by_class.end() ? 0 : it->second.size();
    if (kc > nc) {
      throw Error(ErrorKind::QuotaExceedsClass, "class " + std::to_string(c) + ": quota " +
                                                    std::to_string(kc) + " > size " + std::to_string(nc));
    }
    auto& members = it->second;
    std::partial_sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(kc), members.end(),
                      detail::by_score_desc);
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(kc));
  }
  auto out = detail::finish(std::move(chosen), Provenance::cld_topk);
  out.quotas = quotas;
  return out;
}

/// The lowest-scoring k_c per class; the mirror image of select_topk, used as a control.
inline Coreset select_bottomk(const ScoreTable& scores, const Quotas& quotas) {
  ScoreTable negated = scores;
  for (auto& r : negated.rows) r.score = -r.score;
  return select_topk(negated, quotas);
}

/// Class-balanced uniform sample with the given quotas.
inline Coreset select_random(const ScoreTable& scores, const Quotas& quotas, std::uint64_t seed) {
  std::map<int, std::vector<const ScoreRow*>> by_class;
  for (const auto& r : scores.rows) by_class[r.label].push_back(&r);
  Rng rng(seed);
  std::vector<const ScoreRow*> chosen;
  for (const auto& [c, kc] : quotas) {
    auto& members = by_class[c];
    if (kc > members.size()) {
      throw Error(ErrorKind::QuotaExceedsClass, "class " + std::to_string(c));
    }
    auto picked = rng.sample<const ScoreRow*>(members, kc);
    chosen.insert(chosen.end(), picked.begin(), picked.end());
  }
  auto out = detail::finish(std::move(chosen), Provenance::random);
  out.quotas = quotas;
  out.seed = seed;
  return out;
}

inline Coreset ccs_stratified(const ScoreTable& scores, std::size_t k, std::size_t num_bins = 50,
                              double prune_hardest_fraction = 0.1, std::uint64_t seed = 0) {
  if (num_bins == 0) throw Error(ErrorKind::InvalidArgument, "num_bins must be >= 1");
  if (!(prune_hardest_fraction >= 0.0 && prune_hardest_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "prune fraction must lie in [0, 1)");
  }
  std::vector<const ScoreRow*> order;
  for (const auto& r : scores.rows) order.push_back(&r);
  std::sort(order.begin(), order.end(), detail::by_score_asc);
  const auto pruned = static_cast<std::size_t>(
      std::floor(prune_hardest_fraction * static_cast<double>(order.size()) + 1e-9));
  order.erase(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(pruned));
  if (k > order.size()) {
    throw Error(ErrorKind::BudgetTooLarge, "budget " + std::to_string(k) + " exceeds " +
                                               std::to_string(order.size()) + " samples left after pruning");
  }

  std::vector<double> values;
  for (const auto* r : order) values.push_back(r->score);
  const auto bin_of = detail::bin_values(values, num_bins);
  std::vector<std::vector<const ScoreRow*>> bins(num_bins);
  for (std::size_t i = 0; i < order.size(); ++i) bins[bin_of[i]].push_back(order[i]);
  for (auto& b : bins) {
    std::sort(b.begin(), b.end(), [](auto* x, auto* y) { return x->sample_id < y->sample_id; });
  }
  std::vector<std::size_t> capacity;
  for (const auto& b : bins) capacity.push_back(b.size());
  const auto per_bin = detail::equal_bin_quotas(capacity, k);

  Rng rng(seed);
  std::vector<const ScoreRow*> chosen;
  for (std::size_t b = 0; b < num_bins; ++b) {
    auto picked = rng.sample<const ScoreRow*>(bins[b], per_bin[b]);
    chosen.insert(chosen.end(), picked.begin(), picked.end());
  }
  auto out = detail::finish(std::move(chosen), Provenance::ccs_stratified);
  out.quotas = out.per_class;
  out.seed = seed;
  return out;
}

enum class ValidationHeuristic { random, lowest, highest, equal_bin, proportional };

inline std::vector<std::int64_t> build_validation_set(const std::map<std::int64_t, double>& pool_scores,
                                                      std::size_t size, ValidationHeuristic heuristic,
                                                      std::size_t bins = 10, std::uint64_t seed = 0) {
  if (size > pool_scores.size()) {
    throw Error(ErrorKind::SizeTooLarge, "requested " + std::to_string(size) + " from a pool of " +
                                             std::to_string(pool_scores.size()));
  }
  std::vector<std::int64_t> ids;
  std::vector<double> values;
  for (const auto& [id, s] : pool_scores) {
    ids.push_back(id);
    values.push_back(s);
  }
  std::vector<std::int64_t> picked;
  Rng rng(seed);

  switch (heuristic) {
    case ValidationHeuristic::random:
      picked = rng.sample<std::int64_t>(ids, size);
      break;
    case ValidationHeuristic::lowest:
    case ValidationHeuristic::highest: {
      std::vector<std::size_t> order(ids.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      const bool low = heuristic == ValidationHeuristic::lowest;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return low ? values[a] < values[b] : values[a] > values[b];
      });
      for (std::size_t i = 0; i < size; ++i) picked.push_back(ids[order[i]]);
      break;
    }
    case ValidationHeuristic::equal_bin:
    case ValidationHeuristic::proportional: {
      if (bins == 0) throw Error(ErrorKind::InvalidArgument, "bins must be >= 1");
      const auto bin_of = detail::bin_values(values, bins);
      std::vector<std::vector<std::int64_t>> members(bins);
      for (std::size_t i = 0; i < ids.size(); ++i) members[bin_of[i]].push_back(ids[i]);
      std::vector<std::size_t> capacity;
      for (const auto& m : members) capacity.push_back(m.size());
      std::vector<std::size_t> quota(bins, 0);
      if (heuristic == ValidationHeuristic::equal_bin) {
        quota = detail::equal_bin_quotas(capacity, size);
      } else if (size > 0) {
        ClassSizes hist;
        for (std::size_t b = 0; b < bins; ++b) {
          if (capacity[b] > 0) hist[static_cast<int>(b)] = capacity[b];
        }
        for (const auto& [b, q] : allocate_quotas(size, hist)) quota[static_cast<std::size_t>(b)] = q;
      }
      for (std::size_t b = 0; b < bins; ++b) {
        auto drawn = rng.sample<std::int64_t>(members[b], quota[b]);
        picked.insert(picked.end(), drawn.begin(), drawn.end());
      }
      break;
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

// ---------------------------------------------------------------------------
// Coreset file: `sample_id,label` CSV plus a JSON sidecar at `<path>.json`.

inline void write_coreset(const std::filesystem::path& path, const Coreset& c, const ScoreTable& source) {
  std::map<std::int64_t, int> labels;
  for (const auto& r : source.rows) labels[r.sample_id] = r.label;
  std::string text = "sample_id,label\n";
  for (auto id : c.sample_ids) text += std::to_string(id) + ',' + std::to_string(labels.at(id)) + '\n';
  csv::write_text(path, text);

  nlohmann::ordered_json side;
  side["provenance"] = to_string(c.provenance);
  side["size"] = c.size();
  nlohmann::ordered_json quotas = nlohmann::ordered_json::object();
  for (const auto& [cls, k] : c.quotas) quotas[std::to_string(cls)] = k;
  side["quotas"] = quotas;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [cls, k] : c.per_class) counts[std::to_string(cls)] = k;
  side["per_class"] = counts;
  if (c.seed) side["seed"] = *c.seed;
  else side["seed"] = nullptr;
  auto sidecar = path;
  sidecar += ".json";
  csv::write_text(sidecar, side.dump(2) + "\n");
}

inline std::vector<std::int64_t> read_coreset_ids(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != "sample_id,label") {
    throw Error(ErrorKind::MalformedRow, path.string() + ": header must be sample_id,label");
  }
  std::vector<std::int64_t> ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv::split(lines[i]);
    const auto id = f.size() == 2 ? csv::parse_int(f[0]) : std::nullopt;
    if (!id) throw Error(ErrorKind::MalformedRow, path.string() + ":" + std::to_string(i + 1));
    ids.push_back(*id);
  }
  return ids;
}

}  // namespace cld
