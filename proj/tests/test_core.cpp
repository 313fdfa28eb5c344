#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "oracles.hpp"
#include "wms/core/distance.hpp"
#include "wms/core/field.hpp"
#include "wms/core/io.hpp"
#include "wms/core/rng.hpp"
#include "wms/core/sparse.hpp"

using namespace wms;

namespace {

SparseMatrix dense_to_sparse(const std::vector<std::vector<double>>& m) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      if (m[i][j] != 0.0) t.push_back({i, j, m[i][j]});
  return SparseMatrix(m.size(), t);
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  SeededRng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  SeededRng a2(42);
  EXPECT_NE(a2.next_u64(), c.next_u64());
}

TEST(Rng, BelowStaysInRange) {
  SeededRng r(1);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(r.below(7), 7u);
}

TEST(Rng, MixSeedSeparatesSalts) {
  EXPECT_NE(mix_seed(5, 1), mix_seed(5, 2));
  EXPECT_NE(mix_seed(5, 1), mix_seed(6, 1));
  EXPECT_EQ(mix_seed(5, 1), mix_seed(5, 1));
}

TEST(Sparse, IdentityMatvec) {
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_EQ(sparse_matvec(SparseMatrix::identity(4), v), v);
}

TEST(Sparse, HandMatvec) {
  const auto t = dense_to_sparse({{0.8, 0.2}, {0.2, 0.8}});
  const std::vector<double> v = {1, 0};
  const auto out = sparse_matvec(t, v);
  EXPECT_DOUBLE_EQ(out[0], 0.8);
  EXPECT_DOUBLE_EQ(out[1], 0.2);
}

TEST(Sparse, ConstantVectorFixedPoint) {
  const auto t = dense_to_sparse({{0.5, 0.25, 0.25}, {0.1, 0.9, 0}, {0, 0, 1}});
  const std::vector<double> v(3, 2.5);
  for (double x : sparse_matvec(t, v)) EXPECT_NEAR(x, 2.5, 1e-15);
}

TEST(Sparse, MatvecDimensionMismatch) {
  const std::vector<double> v = {1, 2, 3};
  EXPECT_THROW(sparse_matvec(SparseMatrix::identity(4), v), Error);
}

TEST(Sparse, RejectsBadEntries) {
  EXPECT_THROW(SparseMatrix(2, {{0, 2, 1.0}}), Error);
  EXPECT_THROW(SparseMatrix(2, {{0, 1, 0.0}}), Error);
  EXPECT_THROW(SparseMatrix(2, {{0, 1, 0.5}, {0, 1, 0.5}}), Error);
}

TEST(Sparse, HadamardPowerExamples) {
  const auto ones = dense_to_sparse({{1, 1}, {1, 1}});
  for (const auto& e : hadamard_power(ones, 4).entries()) EXPECT_EQ(e.weight, 1.0);
  const auto half = dense_to_sparse({{1, 0.5}, {0.5, 1}});
  EXPECT_DOUBLE_EQ(hadamard_power(half, 2).at(0, 1), 0.25);
  const auto p9 = dense_to_sparse({{1, 0.9}, {0.9, 1}});
  EXPECT_NEAR(hadamard_power(p9, 4).at(0, 1), 0.6561, 1e-12);
}

TEST(Sparse, HadamardPowerRejectsBetaBelowOne) {
  EXPECT_THROW(hadamard_power(SparseMatrix::identity(2), 0.5), Error);
  EXPECT_NO_THROW(hadamard_power(SparseMatrix::identity(2), 1.0));
}

TEST(Sparse, RandomSymmetricIsSymmetric) {
  SeededRng rng(3);
  EXPECT_TRUE(oracle::random_symmetric(20, 0.3, rng).is_symmetric());
}

TEST(Field, MinmaxHandExample) {
  const auto out = minmax_normalize(Field2D(2, 2, std::vector<double>{0, 2, 4, 2}));
  EXPECT_EQ(out.vec(), (std::vector<double>{0, 0.5, 1, 0.5}));
}

TEST(Field, MinmaxConstantIsZero) {
  const auto out = minmax_normalize(Field2D(3, 3, 7.0));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Field, MinmaxBinaryUnchanged) {
  const Field2D f(1, 3, std::vector<double>{0, 1, 1});
  EXPECT_EQ(minmax_normalize(f), f);
}

TEST(Field, DownsampleExamples) {
  const auto ones = downsample_avg(Field2D(4, 4, 1.0), 2, 2);
  EXPECT_EQ(ones, Field2D(2, 2, 1.0));
  const auto m = downsample_avg(Field2D(2, 2, std::vector<double>{0, 2, 4, 6}), 1, 1);
  EXPECT_DOUBLE_EQ(m(0, 0), 3.0);
  const Field2D f(2, 2, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(downsample_avg(f, 2, 2), f);
  EXPECT_THROW(downsample_avg(Field2D(5, 5, 1.0), 2, 2), Error);
}

TEST(Field, UpsampleNearest) {
  const Grid<int> g(1, 2, std::vector<int>{1, 2});
  const auto up = upsample_nearest(g, 2, 4);
  EXPECT_EQ(up.vec(), (std::vector<int>{1, 1, 2, 2, 1, 1, 2, 2}));
}

TEST(Field, MaxNormalize) {
  const auto out = max_normalize(Field2D(1, 2, std::vector<double>{0.5, 2.0}));
  EXPECT_EQ(out.vec(), (std::vector<double>{0.25, 1.0}));
  EXPECT_EQ(max_normalize(Field2D(1, 2, 0.0)), Field2D(1, 2, 0.0));
}

TEST(Distance, MatchesBruteForce) {
  SeededRng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 1 + rng.below(12), w = 1 + rng.below(12);
    Grid<std::uint8_t> f(h, w, 0);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.bernoulli(0.1);
    f[rng.below(f.size())] = 1;
    const auto d = squared_distance_transform(f);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        std::int64_t best = kNoFeature;
        for (std::size_t r2 = 0; r2 < h; ++r2)
          for (std::size_t c2 = 0; c2 < w; ++c2)
            if (f(r2, c2)) {
              const auto dr = static_cast<std::int64_t>(r) - static_cast<std::int64_t>(r2);
              const auto dc = static_cast<std::int64_t>(c) - static_cast<std::int64_t>(c2);
              best = std::min(best, dr * dr + dc * dc);
            }
        ASSERT_EQ(d(r, c), best);
      }
    }
  }
}

TEST(Io, WcfRoundTrip) {
  const Field2D f(2, 3, std::vector<double>{0, 0.25, 0.5, 0.75, 1, 0.125});
  EXPECT_EQ(io::decode_wcf(io::encode_wcf(f)), f);
  EXPECT_THROW(io::decode_wcf("nope"), Error);
}

TEST(Io, PgmRoundTrip) {
  const LabelMap m(2, 2, std::vector<std::uint8_t>{0, 1, 128, 255});
  EXPECT_EQ(io::decode_pgm(io::encode_pgm(m)), m);
  EXPECT_THROW(io::decode_pgm("P6\n1 1\n255\n\0"), Error);
}

TEST(Io, MissingFileNamesPath) {
  try {
    io::read_file("/nonexistent/dir/file.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/file.bin"), std::string::npos);
  }
}
