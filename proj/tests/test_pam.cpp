#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "wms/pam/refine.hpp"

using namespace wms;
using namespace wms::pam;

namespace {

SparseMatrix two_by_two(double off) { return SparseMatrix(2, {{0, 0, 1.0}, {0, 1, off}, {1, 0, off}, {1, 1, 1.0}}); }

Field2D random_field(std::size_t h, std::size_t w, SeededRng& rng) {
  Field2D f(h, w, 0.0);
  for (double& v : f.values()) v = rng.uniform();
  return f;
}

prompt::PromptMask pm(std::size_t h, std::size_t w, std::vector<double> v) {
  return {Field2D(h, w, std::move(v)), {}};
}

}  // namespace

TEST(Aggregate, DisjointHalvesGiveZeroField) {
  const std::vector<prompt::PromptMask> masks = {pm(2, 2, {1, 1, 0, 0}), pm(2, 2, {0, 0, 1, 1})};
  EXPECT_EQ(aggregate_affinity(masks, 2, 2), Field2D(2, 2, 0.0));
}

TEST(Aggregate, ThreeLevels) {
  const std::vector<prompt::PromptMask> masks = {pm(1, 3, {0, 1, 1}), pm(1, 3, {0, 0, 1})};
  EXPECT_EQ(aggregate_affinity(masks, 1, 3).vec(), (std::vector<double>{0, 0.5, 1}));
}

TEST(Aggregate, OrderFree) {
  SeededRng rng(2);
  std::vector<prompt::PromptMask> masks;
  for (int i = 0; i < 6; ++i) {
    std::vector<double> v(16);
    for (double& x : v) x = rng.bernoulli(0.4);
    masks.push_back(pm(4, 4, v));
  }
  const auto a = aggregate_affinity(masks, 2, 2);
  std::ranges::reverse(masks);
  EXPECT_EQ(aggregate_affinity(masks, 2, 2), a);
  masks.push_back(pm(2, 2, {0, 0, 0, 0}));
  EXPECT_THROW(aggregate_affinity(masks, 2, 2), Error);
}

TEST(PairwiseAffinity, KernelAndLocality) {
  const Field2D m(1, 4, std::vector<double>{0.5, 0.2, 0.5, 0.9});
  const auto a = pairwise_affinity(m, 1.0);
  EXPECT_NEAR(a.at(0, 1), std::exp(-0.3), 1e-15);
  EXPECT_NEAR(std::exp(-0.3), 0.740818, 1e-6);
  EXPECT_EQ(a.at(0, 0), 1.0);
  EXPECT_EQ(a.at(0, 2), 0.0);  // beyond the radius: not stored
  EXPECT_TRUE(a.is_symmetric());
  const auto b = pairwise_affinity(Field2D(3, 3, 0.4), 1.5);
  for (const auto& e : b.entries()) EXPECT_EQ(e.weight, 1.0);
}

TEST(Transition, HandExamples) {
  const auto t1 = transition_matrix(two_by_two(0.5), 1.0);
  EXPECT_NEAR(t1.at(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(t1.at(0, 1), 1.0 / 3.0, 1e-15);
  const auto t2 = transition_matrix(two_by_two(0.5), 2.0);
  EXPECT_NEAR(t2.at(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(t2.at(1, 0), 0.2, 1e-15);
  for (double beta : {1.0, 3.0, 8.0}) {
    const auto t = transition_matrix(SparseMatrix::identity(5), beta);
    for (const auto& e : t.entries()) {
      EXPECT_EQ(e.row, e.col);
      EXPECT_EQ(e.weight, 1.0);
    }
  }
}

TEST(Transition, ZeroRowIsInvariantViolation) {
  EXPECT_THROW(transition_matrix(SparseMatrix(2, {{0, 0, 1.0}}), 1.0), InvariantError);
}

TEST(Transition, RowStochasticOverBetaRange) {
  SeededRng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = oracle::random_symmetric(2 + rng.below(30), rng.uniform(0.05, 0.6), rng);
    EXPECT_TRUE(transition_matrix(a, rng.uniform(1.0, 16.0)).is_row_stochastic(1e-9));
  }
}

TEST(Transition, LargerBetaConcentratesRows) {
  SeededRng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_symmetric(20, 0.3, rng);
    const auto t1 = transition_matrix(a, 1.0);
    const auto t4 = transition_matrix(a, 4.0);
    for (std::size_t r = 0; r < 20; ++r) {
      const auto w1 = t1.row_weights(r), w4 = t4.row_weights(r);
      EXPECT_GE(*std::ranges::max_element(w4), *std::ranges::max_element(w1) - 1e-15);
    }
  }
}

TEST(RandomWalk, Identities) {
  const Field2D cam(2, 2, std::vector<double>{0.1, 0.7, 0.0, 1.0});
  EXPECT_EQ(random_walk(transition_matrix(two_by_two(0.5), 1.0), Field2D(1, 2, std::vector<double>{0.3, 1}), 0),
            Field2D(1, 2, std::vector<double>{0.3, 1}));
  EXPECT_EQ(random_walk(SparseMatrix::identity(4), cam, 5), cam);
  const auto t = transition_matrix(pairwise_affinity(Field2D(2, 2, std::vector<double>{0, 1, 0.2, 0.5}), 1.5), 2.0);
  EXPECT_EQ(propagate(t, Field2D(2, 2, 0.37), 6), Field2D(2, 2, 0.37));
}

TEST(RandomWalk, TwoStepHandPower) {
  const SparseMatrix t(2, {{0, 0, 0.8}, {0, 1, 0.2}, {1, 0, 0.2}, {1, 1, 0.8}});
  const auto out = propagate(t, Field2D(1, 2, std::vector<double>{1, 0}), 2);
  EXPECT_NEAR(out[0], 0.68, 1e-15);
  EXPECT_NEAR(out[1], 0.32, 1e-15);
}

TEST(RandomWalk, DimensionMismatch) {
  EXPECT_THROW(random_walk(SparseMatrix::identity(3), Field2D(2, 2, 0.0), 1), Error);
}

TEST(RandomWalk, ConvexAndLinear) {
  SeededRng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_field(6, 6, rng);
    const auto t = transition_matrix(pairwise_affinity(m, 2.0), 2.0);
    const auto u = random_field(6, 6, rng), v = random_field(6, 6, rng);
    const auto pu = propagate(t, u, 3), pv = propagate(t, v, 3);
    Field2D mix(6, 6, 0.0);
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * u[i] - 0.5 * v[i];
    const auto pm = propagate(t, mix, 3);
    const auto [lo, hi] = std::ranges::minmax(u.values());
    for (std::size_t i = 0; i < u.size(); ++i) {
      EXPECT_GE(pu[i], lo - 1e-12);
      EXPECT_LE(pu[i], hi + 1e-12);
      EXPECT_NEAR(pm[i], 2.0 * pu[i] - 0.5 * pv[i], 1e-12);
    }
  }
}

TEST(RandomWalk, MatchesDenseOracle) {
  SeededRng rng(6);
  for (std::size_t side : {3, 7, 12}) {
    for (double gamma : {1.0, 2.0, 5.0}) {
      const auto m = random_field(side, side, rng);
      const auto cam = random_field(side, side, rng);
      for (double beta : {1.0, 2.0, 4.0}) {
        for (std::size_t t : {1, 4}) {
          RefinementConfig cfg;
          cfg.radius = gamma;
          cfg.beta = beta;
          cfg.steps = t;
          const std::vector<Field2D> cams = {cam};
          const auto got = refine_cams(cams, m, cfg)[0];
          const auto want = oracle::dense_walk(oracle::dense_transition(oracle::dense_affinity(m, gamma), beta), cam, t);
          for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-6);
        }
      }
    }
  }
}

TEST(PseudoLabel, Examples) {
  const std::vector<Field2D> zero = {Field2D(2, 2, 0.0)};
  EXPECT_EQ(pseudo_label(zero, 0.25), LabelMap(2, 2, 0));
  const std::vector<Field2D> one = {Field2D(1, 2, std::vector<double>{1.0, 0.1})};
  EXPECT_EQ(pseudo_label(one, 0.25).vec(), (std::vector<std::uint8_t>{1, 0}));
  const std::vector<Field2D> tie = {Field2D(1, 1, 0.6), Field2D(1, 1, 0.6)};
  EXPECT_EQ(pseudo_label(tie, 0.25)[0], 1);
  const std::vector<Field2D> two = {Field2D(1, 1, 0.3), Field2D(1, 1, 0.6)};
  EXPECT_EQ(pseudo_label(two, 0.25)[0], 2);
}

TEST(IntensityBaseline, ConstantAndCheckerboard) {
  const auto flat = intensity_affinity_baseline(Field2D(4, 4, 0.5), 4, 4, 1.5, 0.1);
  for (const auto& e : flat.entries()) EXPECT_EQ(e.weight, 1.0);
  const auto t = transition_matrix(flat, 2.0);
  for (std::size_t r = 0; r < 16; ++r) {
    const auto w = t.row_weights(r);
    for (double x : w) EXPECT_NEAR(x, 1.0 / static_cast<double>(w.size()), 1e-15);
  }
  Field2D board(4, 4, 0.0);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) board(r, c) = (r + c) % 2 ? 1.0 : 0.0;
  const auto sharp = intensity_affinity_baseline(board, 4, 4, 1.0, 0.1);
  for (const auto& e : sharp.entries())
    if (e.row != e.col) EXPECT_LT(e.weight, 0.01);
  const auto wide = intensity_affinity_baseline(board, 4, 4, 1.0, 1e9);
  for (const auto& e : wide.entries()) EXPECT_NEAR(e.weight, 1.0, 1e-8);
}
