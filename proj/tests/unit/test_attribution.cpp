#include <gtest/gtest.h>

#include <cmath>

#include "cld/attribution.hpp"

using namespace cld;

namespace {
Dataset tiny(std::uint64_t seed = 1) {
  SyntheticSpec s;
  s.n_train = 120;
  s.n_validation = 40;
  s.n_query = 15;
  s.n_reference = 1200;
  s.seed = seed;
  return generate_dataset(s);
}

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

TEST(Spearman, Examples) {
  const std::vector<double> x{1, 2, 3, 4}, rev{4, 3, 2, 1}, y{1, 3, 2, 4};
  EXPECT_DOUBLE_EQ(spearman(x, x), 1.0);
  EXPECT_DOUBLE_EQ(spearman(x, rev), -1.0);
  EXPECT_NEAR(spearman(x, y), 0.8, 1e-15);
}

TEST(Spearman, TiesUseAverageRanks) {
  const std::vector<double> v{10, 20, 20, 30};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{1, 2.5, 2.5, 4}));
  // Pearson of ranks (1,2.5,2.5,4) against (1,2,3,4)
  const std::vector<double> r{1, 2, 3, 4};
  EXPECT_NEAR(spearman(v, r), 4.5 / std::sqrt(4.5 * 5.0), 1e-15);
}

TEST(Spearman, Errors) {
  const std::vector<double> one{1}, flat{2, 2, 2}, x{1, 2, 3}, pair{1, 2};
  EXPECT_EQ(kind_of([&] { spearman(one, one); }), ErrorKind::TooShort);
  EXPECT_EQ(kind_of([&] { spearman(flat, x); }), ErrorKind::ConstantVector);
  EXPECT_EQ(kind_of([&] { spearman(x, pair); }), ErrorKind::LengthMismatch);
}

TEST(Spearman, MonotoneTransformInvariance) {
  Rng rng(6);
  std::vector<double> x(30), y(30), ex(30);
  for (std::size_t i = 0; i < 30; ++i) {
    x[i] = rng.normal();
    y[i] = x[i] + rng.normal();
    ex[i] = std::exp(3.0 * x[i]) - 7.0;
  }
  EXPECT_EQ(spearman(x, y), spearman(ex, y));
}

TEST(GroupAttribution, SumsColumns) {
  Matrix m(3, 2);
  m(0, 0) = 0.5, m(1, 0) = -0.25, m(2, 0) = 1.0, m(0, 1) = 0.1;
  const InfluenceMatrix infl({10, 20, 30}, m);
  const std::vector<std::int64_t> one{20}, all{10, 20, 30}, a{10}, b{20, 30};
  EXPECT_EQ(group_attribution(infl, 0, one), -0.25);
  EXPECT_EQ(group_attribution(infl, 0, all), 1.25);
  EXPECT_EQ(group_attribution(infl, 0, a) + group_attribution(infl, 0, b), group_attribution(infl, 0, all));
  const std::vector<std::int64_t> bad{99};
  EXPECT_EQ(kind_of([&] { group_attribution(infl, 0, bad); }), ErrorKind::UnknownId);
}

TEST(Lds, SelfConsistency) {
  Rng rng(2);
  Matrix outcomes(12, 4);
  for (double& v : outcomes.data()) v = rng.uniform01();
  const auto r = lds_from(outcomes, outcomes);
  for (const auto& v : r.per_query) EXPECT_EQ(*v, 1.0);
  EXPECT_EQ(r.mean, 1.0);
}

TEST(Lds, TwoSubsetsAndZeroAttribution) {
  Matrix g(2, 3), o(2, 3);
  g(0, 0) = 1, g(1, 0) = 2, o(0, 0) = 0.3, o(1, 0) = 0.1;
  g(0, 1) = 1, g(1, 1) = 2, o(0, 1) = 0.1, o(1, 1) = 0.3;
  o(0, 2) = 1, o(1, 2) = 2;  // g column 2 is all zero
  const auto r = lds_from(g, o);
  EXPECT_EQ(*r.per_query[0], -1.0);
  EXPECT_EQ(*r.per_query[1], 1.0);
  EXPECT_FALSE(r.per_query[2].has_value());
  EXPECT_EQ(r.defined, 2u);
}

TEST(Lds, PlanValidation) {
  SubsetPlan p;
  p.num_subsets = 1;
  EXPECT_THROW(p.validate(10), Error);
  p = SubsetPlan{};
  p.alpha = 1.0;
  EXPECT_THROW(p.validate(10), Error);
  p = SubsetPlan{};
  EXPECT_EQ(p.subset_size(11), 6u);
}

TEST(Lds, HarnessRunsAndIsThreadIndependent) {
  const auto data = tiny();
  const auto cfg = attribution_train_config();
  const auto infl = cld_influence(data, cfg);
  EXPECT_EQ(infl.values().rows(), data.train.size());
  EXPECT_EQ(infl.queries(), data.query.size());
  SubsetPlan plan;
  plan.num_subsets = 6;
  plan.retrain_seeds = {0, 1};
  const auto a = lds_evaluate(data, infl, plan, cfg, 1);
  const auto b = lds_evaluate(data, infl, plan, cfg, 4);
  EXPECT_EQ(a.outcomes, b.outcomes);
  EXPECT_EQ(a.per_query, b.per_query);
  for (const auto& v : a.per_query) {
    if (v) {
      EXPECT_GE(*v, -1.0);
      EXPECT_LE(*v, 1.0);
    }
  }
}

TEST(Brittleness, ExtremeRemovalFlipsMore) {
  const auto data = tiny();
  const auto cfg = attribution_train_config();
  const auto infl = cld_influence(data, cfg);
  const std::vector<std::size_t> ks{0, data.train.size() - 5};
  const std::vector<RemovalPolicy> pol{RemovalPolicy::cld_topk, RemovalPolicy::random};
  const std::vector<std::uint64_t> seeds{0, 1};
  const auto r = brittleness(data, infl, ks, pol, cfg, seeds, 2);
  for (const auto& row : r.rows) {
    EXPECT_GE(row.flip_fraction, 0.0);
    EXPECT_LE(row.flip_fraction, 1.0);
  }
  EXPECT_GT(r.at(RemovalPolicy::random, ks[1]).flip_fraction, r.at(RemovalPolicy::random, 0).flip_fraction);
  const std::vector<std::size_t> too_many{data.train.size()};
  EXPECT_EQ(kind_of([&] { brittleness(data, infl, too_many, pol, cfg, seeds); }), ErrorKind::SizeTooLarge);
}
