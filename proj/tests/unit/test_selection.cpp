#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "cld/selection.hpp"
#include "fixtures.hpp"

using namespace cld;

namespace {
ScoreTable table(std::vector<ScoreRow> rows) { return ScoreTable{std::move(rows)}; }

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::Io;
}
}  // namespace

TEST(AllocateQuotas, Examples) {
  EXPECT_EQ(allocate_quotas(4, {{0, 2}, {1, 2}}), (Quotas{{0, 2}, {1, 2}}));
  EXPECT_EQ(allocate_quotas(3, {{0, 2}, {1, 2}}), (Quotas{{0, 2}, {1, 1}}));
  EXPECT_EQ(kind_of([] { allocate_quotas(5, {{0, 2}, {1, 2}}); }), ErrorKind::BudgetTooLarge);
}

TEST(AllocateQuotas, LargestRemainder) {
  // 10 * (5, 3, 2) / 10 exact; 7 * (5, 3, 2) / 10 = (3.5, 2.1, 1.4) -> (4, 2, 1)
  EXPECT_EQ(allocate_quotas(7, {{0, 5}, {1, 3}, {2, 2}}), (Quotas{{0, 4}, {1, 2}, {2, 1}}));
  const auto q = allocate_quotas(1, {{0, 3}, {1, 3}, {2, 3}});
  EXPECT_EQ(q, (Quotas{{0, 1}}));
}

TEST(Budget, Resolution) {
  const ClassSizes sizes{{0, 10}, {1, 10}};
  EXPECT_EQ(total(Budget::fraction(0.1).resolve(sizes)), 2u);
  EXPECT_EQ(Budget::per_class({{0, 3}, {1, 2}}).resolve(sizes), (Quotas{{0, 3}, {1, 2}}));
  EXPECT_EQ(kind_of([&] { Budget::per_class({{0, 11}}).resolve(sizes); }), ErrorKind::QuotaExceedsClass);
}

TEST(SelectTopk, TieBrokenById) {
  const auto t = table({{1, 0, 0.9, false}, {2, 0, 0.5, false}, {3, 0, 0.9, false}});
  EXPECT_EQ(select_topk(t, {{0, 2}}).sample_ids, (std::vector<std::int64_t>{1, 3}));
}

TEST(SelectTopk, FullQuotaAndEmptyClass) {
  const auto t = table({{1, 0, 0.1, false}, {2, 1, 0.5, false}, {3, 1, -0.3, false}});
  EXPECT_EQ(select_topk(t, {{0, 1}, {1, 2}}).sample_ids, (std::vector<std::int64_t>{1, 2, 3}));
  const auto c = select_topk(t, {{0, 0}, {1, 1}});
  EXPECT_EQ(c.sample_ids, (std::vector<std::int64_t>{2}));
  EXPECT_EQ(c.per_class.count(0), 0u);
  EXPECT_EQ(kind_of([&] { select_topk(t, {{0, 2}}); }), ErrorKind::QuotaExceedsClass);
}

TEST(SelectBottomk, PicksLowest) {
  const auto t = table({{1, 0, 0.9, false}, {2, 0, 0.5, false}, {3, 0, -0.9, false}});
  EXPECT_EQ(select_bottomk(t, {{0, 2}}).sample_ids, (std::vector<std::int64_t>{2, 3}));
}

TEST(SelectRandom, DeterministicAndBalanced) {
  std::vector<ScoreRow> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({i, i % 2, 0.0, false});
  const auto t = table(rows);
  const auto a = select_random(t, {{0, 5}, {1, 3}}, 11);
  EXPECT_EQ(a.sample_ids, select_random(t, {{0, 5}, {1, 3}}, 11).sample_ids);
  EXPECT_EQ(a.per_class.at(0), 5u);
  EXPECT_EQ(a.per_class.at(1), 3u);
  EXPECT_EQ(a.provenance, Provenance::random);
  EXPECT_NE(a.sample_ids, select_random(t, {{0, 5}, {1, 3}}, 12).sample_ids);
}

TEST(CcsStratified, TwoBinsSplitEvenly) {
  std::vector<ScoreRow> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({i, 0, i / 10.0, false});
  const auto c = ccs_stratified(table(rows), 4, 2, 0.0, 3);
  ASSERT_EQ(c.size(), 4u);
  const auto low = std::count_if(c.sample_ids.begin(), c.sample_ids.end(), [](auto id) { return id < 5; });
  EXPECT_EQ(low, 2);
}

TEST(CcsStratified, PruneNeverSelectsHardest) {
  std::vector<ScoreRow> rows;
  for (int i = 0; i < 100; ++i) rows.push_back({i, i % 3, (i * 37 % 100) / 100.0, false});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = ccs_stratified(table(rows), 50, 5, 0.3, seed);
    for (auto id : c.sample_ids) EXPECT_GE((id * 37 % 100) / 100.0, 0.3);
  }
  EXPECT_EQ(kind_of([&] { ccs_stratified(table(rows), 71, 5, 0.3, 0); }), ErrorKind::BudgetTooLarge);
}

TEST(CcsStratified, UnderfullBinsRedistribute) {
  // 1 sample in the upper bin, 9 in the lower one: k=6 -> 1 + 5
  std::vector<ScoreRow> rows;
  for (int i = 0; i < 9; ++i) rows.push_back({i, 0, 0.01 * i, false});
  rows.push_back({9, 0, 1.0, false});
  const auto c = ccs_stratified(table(rows), 6, 2, 0.0, 1);
  EXPECT_EQ(c.size(), 6u);
  EXPECT_TRUE(std::binary_search(c.sample_ids.begin(), c.sample_ids.end(), 9));
}

TEST(ValidationSet, Heuristics) {
  const std::map<std::int64_t, double> pool{{1, 0.1}, {2, 0.2}, {3, 0.3}, {4, 0.9}};
  EXPECT_EQ(build_validation_set(pool, 3, ValidationHeuristic::lowest), (std::vector<std::int64_t>{1, 2, 3}));
  EXPECT_EQ(build_validation_set(pool, 2, ValidationHeuristic::highest), (std::vector<std::int64_t>{3, 4}));
  EXPECT_EQ(kind_of([&] { build_validation_set(pool, 5, ValidationHeuristic::random); }), ErrorKind::SizeTooLarge);
  EXPECT_EQ(build_validation_set(pool, 2, ValidationHeuristic::random, 10, 4),
            build_validation_set(pool, 2, ValidationHeuristic::random, 10, 4));
}

TEST(ValidationSet, EqualBinAndProportional) {
  std::map<std::int64_t, double> pool;
  for (int i = 0; i < 8; ++i) pool[i] = i / 7.0;  // two bins of four
  const auto eq = build_validation_set(pool, 4, ValidationHeuristic::equal_bin, 2, 5);
  ASSERT_EQ(eq.size(), 4u);
  EXPECT_EQ(std::count_if(eq.begin(), eq.end(), [](auto id) { return id < 4; }), 2);
  const auto prop = build_validation_set(pool, 4, ValidationHeuristic::proportional, 2, 5);
  EXPECT_EQ(std::count_if(prop.begin(), prop.end(), [](auto id) { return id < 4; }), 2);

  std::map<std::int64_t, double> skewed;
  for (int i = 0; i < 9; ++i) skewed[i] = 0.0;
  skewed[9] = 1.0;
  skewed[10] = 0.9;
  skewed[11] = 0.95;
  // histogram 9:3 over two bins -> proportional 3:1, equal 2:2
  const auto p = build_validation_set(skewed, 4, ValidationHeuristic::proportional, 2, 1);
  EXPECT_EQ(std::count_if(p.begin(), p.end(), [](auto id) { return id >= 9; }), 1);
  const auto e = build_validation_set(skewed, 4, ValidationHeuristic::equal_bin, 2, 1);
  EXPECT_EQ(std::count_if(e.begin(), e.end(), [](auto id) { return id >= 9; }), 2);
}

TEST(CoresetIo, RoundTripAndSidecar) {
  cld::testing::TempDir dir;
  const auto t = table({{4, 0, 0.3, false}, {7, 1, 0.8, false}, {9, 1, 0.1, false}});
  const auto c = select_topk(t, {{0, 1}, {1, 1}});
  write_coreset(dir.path() / "c.csv", c, t);
  EXPECT_EQ(read_coreset_ids(dir.path() / "c.csv"), (std::vector<std::int64_t>{4, 7}));
  const auto side = nlohmann::json::parse(csv::read_text(dir.path() / "c.csv.json"));
  EXPECT_EQ(side["provenance"], "cld_topk");
  EXPECT_EQ(side["size"], 2);
  EXPECT_TRUE(side["seed"].is_null());
}
