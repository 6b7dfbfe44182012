#include <gtest/gtest.h>

#include "../oracles/metrics_oracle.hpp"
#include "support.hpp"
#include "user/common/error.hpp"
#include "user/common/rng.hpp"
#include "user/eval/metrics.hpp"

namespace user {
namespace {

TEST(Metrics, SinglePositiveAtTop) {
  EXPECT_EQ(metric_map({1, 0, 0}), 1.0);
  EXPECT_EQ(metric_p1({1, 0, 0}), 1.0);
  EXPECT_EQ(metric_avgc({1, 0, 0}), 1.0);
}

TEST(Metrics, TwoPositivesAtOneAndThree) { EXPECT_NEAR(metric_map({1, 0, 1, 0}), 5.0 / 6.0, 1e-15); }

TEST(Metrics, SinglePositiveAtThree) {
  const std::vector<int> r{0, 0, 1, 0, 0};
  EXPECT_NEAR(metric_mrr(r), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(metric_map(r), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(metric_avgc(r), 3.0);
  EXPECT_EQ(metric_p1(r), 0.0);
}

TEST(Metrics, PositivesAtTwoAndFour) {
  const std::vector<int> r{0, 1, 0, 1, 0, 0};
  EXPECT_EQ(metric_avgc(r), 3.0);
  EXPECT_NEAR(metric_ndcg(r, 5), (1 / std::log2(3.0) + 1 / std::log2(5.0)) / (1 + 1 / std::log2(3.0)), 1e-15);
  EXPECT_NEAR(metric_ndcg(r, 5), 0.6509, 5e-5);
  EXPECT_NEAR(metric_ndcg(r, 1), 0.0, 1e-15);
}

TEST(Metrics, MrrEqualsMapForOnePositive) {
  for (std::size_t r = 0; r < 10; ++r) {
    std::vector<int> ranked(10, 0);
    ranked[r] = 1;
    EXPECT_NEAR(metric_mrr(ranked), 1.0 / static_cast<double>(r + 1), 1e-15);
    EXPECT_NEAR(metric_map(ranked), metric_mrr(ranked), 1e-15);
  }
}

TEST(Metrics, AucTiesCountHalf) {
  EXPECT_EQ(metric_auc({0.5, 0.5, 0.5}, {1, 0, 0}), 0.5);
  EXPECT_EQ(metric_auc({0.9, 0.1, 0.5}, {1, 0, 0}), 1.0);
  EXPECT_EQ(metric_auc({0.1, 0.9, 0.5}, {1, 0, 0}), 0.0);
  EXPECT_NEAR(metric_auc({0.5, 0.5, 0.2, 0.7}, {1, 0, 1, 0}), 0.125, 1e-15);
}

TEST(Metrics, RejectDegenerateInput) {
  EXPECT_THROW(metric_map({0, 0}), Error);
  EXPECT_THROW(metric_ndcg({0, 0}, 5), Error);
  EXPECT_THROW(metric_auc({1, 2}, {1, 1}), Error);
  EXPECT_THROW(metric_auc({1, 2}, {1}), Error);
  EXPECT_THROW(expected_random_ap(3, 0), Error);
}

TEST(Metrics, ExpectedRandomApMatchesEnumeration) {
  for (std::size_t n = 1; n <= 9; ++n)
    for (std::size_t m = 1; m <= n; ++m)
      EXPECT_NEAR(expected_random_ap(n, m), oracle::enumerated_random_ap(n, m), 1e-12) << n << " " << m;
  EXPECT_NEAR(expected_random_ap(10, 1), harmonic(10) / 10, 1e-15);
  EXPECT_NEAR(harmonic(10), 2.9289682539682538, 1e-15);
}

Impression random_impression(Rng& rng, std::size_t idx) {
  Impression imp;
  imp.id = "i" + std::to_string(idx);
  const auto n = static_cast<std::size_t>(rng.integer(2, 20));
  for (std::size_t i = 0; i < n; ++i) {
    imp.candidates.push_back(testing::doc("d" + std::to_string(rng.integer(0, 99)) + "_" + std::to_string(i), ""));
    imp.labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
  }
  imp.labels[rng.index(n)] = 1;
  return imp;
}

std::vector<double> random_scores(Rng& rng, std::size_t n) {
  std::vector<double> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<double>(rng.integer(0, 6)) / 4.0);  // many ties
  return s;
}

TEST(Metrics, MatchOracleOnRandomImpressions) {
  Rng rng(99);
  for (std::size_t k = 0; k < 1000; ++k) {
    const auto imp = random_impression(rng, k);
    const auto scores = random_scores(rng, imp.candidates.size());
    std::vector<std::string> ids;
    for (const auto& d : imp.candidates) ids.push_back(d.id);
    const auto want = oracle::metrics(scores, imp.labels, ids);
    const auto got = impression_metrics(imp, scores);
    ASSERT_NEAR(got.map, want.map, 1e-9) << k;
    ASSERT_NEAR(got.mrr, want.mrr, 1e-9) << k;
    ASSERT_NEAR(got.p1, want.p1, 1e-9) << k;
    ASSERT_NEAR(got.avgc, want.avgc, 1e-9) << k;
    ASSERT_NEAR(got.ndcg5, want.ndcg5, 1e-9) << k;
    ASSERT_NEAR(got.ndcg10, want.ndcg10, 1e-9) << k;
    ASSERT_EQ(got.has_auc, want.auc >= 0) << k;
    if (got.has_auc) ASSERT_NEAR(got.auc, want.auc, 1e-9) << k;
  }
}

TEST(Metrics, RankedLabelsBreakTiesByDocId) {
  Impression imp;
  imp.candidates = {testing::doc("b", ""), testing::doc("a", ""), testing::doc("c", "")};
  imp.labels = {1, 0, 0};
  EXPECT_EQ(ranked_labels(imp, {0.5, 0.5, 0.9}), (std::vector<int>{0, 0, 1}));
  EXPECT_EQ(ranked_labels(imp, {0.5, 0.4, 0.1}), (std::vector<int>{1, 0, 0}));
}

TEST(Evaluate, AveragesAndExcludes) {
  Impression a, b, c;
  for (auto* imp : {&a, &b, &c}) imp->candidates = {testing::doc("x", ""), testing::doc("y", "")};
  a.id = "a";
  a.labels = {1, 0};
  b.id = "b";
  b.labels = {0, 1};
  c.id = "c";
  c.labels = {0, 0};
  Impression d = a;
  d.id = "d";
  d.labels = {1, 1};
  const auto r = evaluate_scores({a, b, c, d}, {{1, 0}, {1, 0}, {1, 0}, {1, 0}}, "search", true);
  EXPECT_EQ(r.impressions, 3u);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(r.auc_excluded, 1u);
  EXPECT_NEAR(r.map, (1 + 0.5 + 1) / 3.0, 1e-15);
  EXPECT_NEAR(r.auc, 0.5, 1e-15);
  EXPECT_EQ(r.per_impression.size(), 3u);
  EXPECT_THROW(evaluate_scores({c}, {{1, 0}}, "search"), Error);
  EXPECT_THROW(evaluate_scores({a}, {}, "search"), Error);
  const auto tsv = per_impression_tsv(r);
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 4);
}

TEST(Evaluate, RandomExpectationForOneInTen) {
  Rng rng(5);
  double ap = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    std::vector<int> ranked(10, 0);
    ranked[rng.index(10)] = 1;
    ap += metric_map(ranked);
  }
  EXPECT_NEAR(ap / n, harmonic(10) / 10, 0.01);
}

}  // namespace
}  // namespace user
