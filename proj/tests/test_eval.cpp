#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wms/eval/metrics.hpp"

using namespace wms;
using namespace wms::eval;

namespace {

Mask mask(std::size_t h, std::size_t w, std::vector<std::uint8_t> v) { return Mask(h, w, std::move(v)); }

}  // namespace

TEST(Dice, Examples) {
  const auto a = mask(2, 4, {1, 1, 1, 1, 0, 0, 0, 0});
  const auto b = mask(2, 4, {0, 0, 1, 1, 1, 1, 0, 0});
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(dice(a, mask(2, 4, {0, 0, 0, 0, 1, 1, 1, 1})), 0.0);
  EXPECT_DOUBLE_EQ(dice(a, b), 0.5);
  EXPECT_THROW(dice(a, Mask(4, 2, 0)), Error);
  EXPECT_EQ(dice(Mask(2, 2, 0), Mask(2, 2, 0)), 1.0);
  EXPECT_EQ(dice(Mask(2, 2, 0), mask(2, 2, {1, 0, 0, 0})), 0.0);
}

TEST(Jaccard, Examples) {
  const auto a = mask(2, 4, {1, 1, 1, 1, 0, 0, 0, 0});
  const auto b = mask(2, 4, {0, 0, 1, 1, 1, 1, 0, 0});
  EXPECT_EQ(jaccard(a, a), 1.0);
  EXPECT_DOUBLE_EQ(jaccard(a, b), 1.0 / 3.0);
  EXPECT_EQ(jaccard(Mask(2, 2, 0), Mask(2, 2, 0)), 1.0);
}

TEST(Similarity, IdentitySymmetryMonotonicity) {
  SeededRng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = oracle::random_mask(8, 8, 0.4, rng);
    auto b = oracle::random_mask(8, 8, 0.4, rng);
    const double d = dice(a, b), j = jaccard(a, b);
    EXPECT_NEAR(d, 2 * j / (1 + j), 1e-12);
    EXPECT_EQ(d, dice(b, a));
    EXPECT_EQ(j, jaccard(b, a));
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] && !b[i]) {
        b[i] = 1;
        EXPECT_GE(dice(a, b), d);
        EXPECT_GE(jaccard(a, b), j);
        break;
      }
    }
  }
}

TEST(Surface, HandExamples) {
  Mask a(1, 8, 0), b(1, 8, 0);
  a[1] = 1;
  b[4] = 1;
  EXPECT_EQ(assd(a, b), 3.0);
  EXPECT_EQ(assd(a, a), 0.0);
  EXPECT_EQ(hd95(a, a), 0.0);
}

TEST(Surface, EmptyMaskReportsSide) {
  const Mask full(3, 3, 1), empty(3, 3, 0);
  try {
    assd(empty, full);
    FAIL();
  } catch (const EmptyMaskError& e) {
    EXPECT_EQ(e.side(), "pred");
  }
  try {
    hd95(full, empty);
    FAIL();
  } catch (const EmptyMaskError& e) {
    EXPECT_EQ(e.side(), "gt");
  }
  const auto m = evaluate_pair(empty, empty, 3, 1);
  EXPECT_FALSE(m.assd.has_value());
  EXPECT_EQ(m.empty_side, "both");
  EXPECT_EQ(m.dsc, 1.0);
}

TEST(Surface, MatchesBruteForceExactly) {
  SeededRng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t h = 1 + rng.below(12), w = 1 + rng.below(12);
    const auto a = oracle::random_mask(h, w, rng.uniform(0.05, 0.7), rng);
    const auto b = oracle::random_mask(h, w, rng.uniform(0.05, 0.7), rng);
    ASSERT_EQ(assd(a, b), oracle::brute_assd(a, b));
    ASSERT_EQ(hd95(a, b), oracle::brute_hd95(a, b));
    EXPECT_EQ(assd(a, b), assd(b, a));
    EXPECT_EQ(hd95(a, b), hd95(b, a));
    EXPECT_LE(hd95(a, b), oracle::brute_hausdorff(a, b));
    EXPECT_GE(hd95(a, b), 0.0);
  }
}

TEST(Surface, ZeroIffBoundariesCoincide) {
  SeededRng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = oracle::random_mask(6, 6, 0.5, rng);
    const auto b = oracle::random_mask(6, 6, 0.5, rng);
    EXPECT_EQ(assd(a, b) == 0.0, boundary(a) == boundary(b));
  }
}

TEST(Aggregate, Examples) {
  SampleMetrics a;
  a.dsc = 0.4;
  a.jaccard = 0.25;
  a.assd = 2.0;
  a.hd95 = 4.0;
  const auto one = aggregate({a});
  EXPECT_EQ(one.dsc, 0.4);
  EXPECT_EQ(one.assd, 2.0);
  SampleMetrics b = a;
  b.dsc = 0.6;
  EXPECT_DOUBLE_EQ(aggregate({a, b}).dsc, 0.5);
  SampleMetrics skipped;
  skipped.sample_id = 9;
  skipped.dsc = 0.0;
  skipped.empty_side = "pred";
  b.assd = 4.0;
  const auto r = aggregate({a, b, skipped});
  EXPECT_EQ(r.count, 3u);
  EXPECT_EQ(r.scored, 2u);
  EXPECT_EQ(r.skipped_ids, std::vector<std::size_t>{9});
  EXPECT_DOUBLE_EQ(r.assd, 3.0);
  EXPECT_THROW(aggregate({}), Error);
}
