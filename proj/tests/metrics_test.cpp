#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hycount/metrics.hpp"
#include "oracles.hpp"
#include "random_data.hpp"

using namespace hycount;
using namespace hycount::metrics;

TEST(Match, Examples) {
  const std::vector<BBox> gts{{0, 0, 10, 10}, {20, 20, 30, 30}, {50, 0, 60, 10}};
  std::vector<Detection> perfect;
  for (const auto& g : gts) perfect.push_back({g, 0.5});
  const auto m = match_detections(perfect, gts);
  EXPECT_EQ(m.tp(), 3u);
  EXPECT_EQ(m.fp(), 0u);
  EXPECT_EQ(m.fn(), 0u);

  const auto none = match_detections({}, std::vector<BBox>(5, BBox{0, 0, 1, 1}));
  EXPECT_EQ(none.fn(), 5u);
  EXPECT_EQ(none.tp() + none.fp(), 0u);

  const auto two = match_detections({{{0, 0, 10, 10}, 0.8}, {{0, 0, 10, 9}, 0.9}}, {{0, 0, 10, 10}});
  EXPECT_EQ(two.tp(), 1u);
  EXPECT_EQ(two.fp(), 1u);
  EXPECT_EQ(two.fn(), 0u);
  EXPECT_EQ(two.pairs[0].first, 1u);  // the 0.9 prediction claims the gt

  EXPECT_THROW(match_detections({}, {}, 0.0), Error);
  EXPECT_THROW(match_detections({}, {}, 1.1), Error);
}

TEST(Match, PicksHighestIouGt) {
  // One prediction overlapping two gts; it takes the closer one.
  const auto m = match_detections({{{2, 0, 12, 10}, 0.9}}, {{0, 0, 10, 10}, {3, 0, 13, 10}}, 0.3);
  ASSERT_EQ(m.tp(), 1u);
  EXPECT_EQ(m.pairs[0].second, 1u);
}

TEST(PrecisionRecall, Examples) {
  EXPECT_EQ(precision(1, 0), 1.0);
  EXPECT_EQ(precision(0, 0), 0.0);
  EXPECT_EQ(recall(3, 1), 0.75);
  EXPECT_EQ(recall(0, 0), 0.0);
}

TEST(AveragePrecision, Examples) {
  const BBox g{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(average_precision({{{{g, 0.7}}, {g}}}), 1.0);
  EXPECT_DOUBLE_EQ(average_precision({{{{g, 0.7}}, {g, {20, 20, 30, 30}}}}), 0.5);
  EXPECT_DOUBLE_EQ(average_precision({{{}, {g}}}), 0.0);
  EXPECT_THROW(average_precision({{{{g, 0.7}}, {}}}), Error);
  // FP ranked first: P = 0 then 1/2 at R = 1, envelope gives 0.5.
  EXPECT_DOUBLE_EQ(average_precision({{{{g, 0.6}, {{50, 50, 60, 60}, 0.9}}, {g}}}), 0.5);
}

TEST(AveragePrecision, MatchesBruteForce) {
  std::mt19937_64 rng(123);
  for (int n = 0; n < 500; ++n) {
    const auto data = fixtures::small_dataset(rng);
    ASSERT_NEAR(average_precision(data, 0.5), oracle::brute_force_ap(data, 0.5), 1e-9);
  }
}

TEST(AveragePrecision, InvariantUnderMonotoneRescaling) {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 300; ++n) {
    auto data = fixtures::small_dataset(rng);
    const double before = average_precision(data);
    for (auto& im : data)
      for (auto& d : im.predictions) d.score = 0.1 + 0.5 * d.score * d.score;
    EXPECT_DOUBLE_EQ(average_precision(data), before);
  }
}

TEST(Counting, Examples) {
  EXPECT_EQ(mae({{3, 3}, {7, 7}}), 0.0);
  EXPECT_EQ(rmse({{3, 3}, {7, 7}}), 0.0);
  EXPECT_DOUBLE_EQ(mae({{12, 10}, {17, 20}}), 2.5);
  EXPECT_DOUBLE_EQ(rmse({{12, 10}, {17, 20}}), std::sqrt(6.5));
  EXPECT_NEAR(mae({{231.4, 228}}), 3.4, 1e-12);
  EXPECT_THROW(mae({}), Error);
  EXPECT_THROW(rmse({}), Error);
}

TEST(Counting, RmseAtLeastMae) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 300);
  for (int n = 0; n < 1000; ++n) {
    std::vector<CountPair> v(1 + n % 20);
    for (auto& p : v) p = {u(rng), u(rng)};
    ASSERT_GE(rmse(v) + 1e-12, mae(v));
  }
}

TEST(Confusion, Rows) {
  const BBox g{0, 0, 10, 10};
  const auto m = match_detections({{g, 0.9}, {g, 0.8}}, {g});
  const auto rep = confusion_report({{"a", m}, {"b", std::nullopt}, {"c", match_detections({}, {g, g})}});
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_EQ(rep.rows[0].tp, 1u);
  EXPECT_EQ(rep.rows[0].fp, 1u);
  EXPECT_EQ(rep.rows[0].fn, 0u);
  EXPECT_FALSE(rep.rows[1].applicable);
  EXPECT_EQ(rep.rows[2].fn, 2u);
  EXPECT_EQ(rep.totals.tp, 1u);
  EXPECT_EQ(rep.totals.fn, 2u);
}

TEST(Match, CountIdentities) {
  std::mt19937_64 rng(31);
  for (int n = 0; n < 1000; ++n)
    for (const auto& im : fixtures::small_dataset(rng)) {
      const auto m = match_detections(im.predictions, im.ground_truth, 0.5);
      ASSERT_EQ(m.tp() + m.fn(), im.ground_truth.size());
      ASSERT_EQ(m.tp() + m.fp(), im.predictions.size());
    }
}
