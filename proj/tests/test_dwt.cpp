#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "csi_sentry/classify/dwt.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace {

using namespace csi_sentry;
using namespace csi_sentry::classify;

double energy(const HaarDecomposition& d) {
  double e = 0.0;
  for (const auto& level : d.details) {
    for (double v : level) e += v * v;
  }
  for (double v : d.approximation) e += v * v;
  return e;
}

// Closed form for dyadic lengths: the level-j detail of block i is the
// difference of its two half-block sums scaled by 2^(-j/2); the level-J
// approximation is the block sum scaled the same way.
double block_sum(const std::vector<double>& x, std::size_t lo, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = lo; i < lo + n; ++i) s += x[i];
  return s;
}

std::vector<double> oracle_detail(const std::vector<double>& x, std::size_t j) {
  const std::size_t block = std::size_t{1} << j;
  std::vector<double> d;
  for (std::size_t lo = 0; lo + block <= x.size(); lo += block) {
    d.push_back((block_sum(x, lo, block / 2) - block_sum(x, lo + block / 2, block / 2)) /
                std::pow(2.0, static_cast<double>(j) / 2.0));
  }
  return d;
}

std::vector<double> oracle_approx(const std::vector<double>& x, std::size_t levels) {
  const std::size_t block = std::size_t{1} << levels;
  std::vector<double> a;
  for (std::size_t lo = 0; lo + block <= x.size(); lo += block) {
    a.push_back(block_sum(x, lo, block) / std::pow(2.0, static_cast<double>(levels) / 2.0));
  }
  return a;
}

TEST(Haar, ConstantHasZeroDetails) {
  const std::vector<double> x(64, 3.25);
  const auto d = haar_dwt(x, 4);
  for (const auto& level : d.details) {
    for (double v : level) EXPECT_EQ(v, 0.0);
  }
  for (double v : d.approximation) EXPECT_NEAR(v, 3.25 * 4.0, 1e-12);
}

TEST(Haar, OneToEightSingleLevel) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};
  const auto d = haar_dwt(x, 1);
  ASSERT_EQ(d.details.size(), 1u);
  ASSERT_EQ(d.details[0].size(), 4u);
  for (double v : d.details[0]) EXPECT_NEAR(v, -1.0 / std::sqrt(2.0), 1e-15);
  const std::vector<double> approx{3 / std::sqrt(2.0), 7 / std::sqrt(2.0), 11 / std::sqrt(2.0), 15 / std::sqrt(2.0)};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(d.approximation[i], approx[i], 1e-14);
}

TEST(Haar, DyadicMatchesBlockSumOracle) {
  std::mt19937_64 rng(5);
  const auto x = fixtures::random_series(rng, 128);
  const auto d = haar_dwt(x, 5);
  for (std::size_t j = 1; j <= 5; ++j) {
    const auto ref = oracle_detail(x, j);
    ASSERT_EQ(d.details[j - 1].size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(d.details[j - 1][i], ref[i], 1e-11);
  }
  const auto ref = oracle_approx(x, 5);
  ASSERT_EQ(d.approximation.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(d.approximation[i], ref[i], 1e-11);
}

TEST(Haar, ParsevalDyadicAndNonDyadic) {
  std::mt19937_64 rng(6);
  for (std::size_t n : {8u, 16u, 64u, 256u, 9u, 13u, 37u, 100u, 255u}) {
    const auto x = fixtures::random_series(rng, n);
    double ex = 0.0;
    for (double v : x) ex += v * v;
    for (std::size_t levels = 1; (std::size_t{1} << levels) <= n; ++levels) {
      ASSERT_LE(oracle::relative_error(energy(haar_dwt(x, levels)), ex), 1e-9) << "n=" << n << " J=" << levels;
    }
  }
}

TEST(Haar, OddTailCarried) {
  const std::vector<double> x{1, 1, 5};
  const auto d = haar_dwt(x, 1);
  EXPECT_EQ(d.details[0].size(), 1u);
  ASSERT_EQ(d.approximation.size(), 2u);
  EXPECT_EQ(d.approximation[1], 5.0);
}

TEST(Features, LengthIsThreeJPlusThreePerChannel) {
  std::mt19937_64 rng(7);
  for (std::size_t channels : {1u, 3u}) {
    for (std::size_t levels : {1u, 2u, 4u}) {
      const auto s = fixtures::activity_sample(Activity::Run, 32, channels, fixtures::random_series(rng, 32 * channels));
      EXPECT_EQ(dwt_features(s, levels).size(), (3 * levels + 3) * channels);
      EXPECT_EQ(feature_length(levels, channels), (3 * levels + 3) * channels);
    }
  }
}

TEST(Features, DefaultLevels) {
  EXPECT_EQ(default_dwt_levels(8), 3u);
  EXPECT_EQ(default_dwt_levels(15), 3u);
  EXPECT_EQ(default_dwt_levels(16), 4u);
  EXPECT_EQ(default_dwt_levels(1000), 4u);
}

TEST(Features, TooShortForLevels) {
  const auto s = fixtures::activity_sample(Activity::Sit, 8, 1, std::vector<double>(8, 0.0));
  EXPECT_ERRC(dwt_features(s, 4), Errc::TooShort);
  EXPECT_NO_THROW(dwt_features(s, 3));
}

TEST(Features, MatchDirectComputation) {
  std::mt19937_64 rng(8);
  const std::size_t T = 64, F = 2, J = 4;
  const auto s = fixtures::activity_sample(Activity::Walk, T, F, fixtures::random_series(rng, T * F));
  const auto feat = dwt_features(s, J);
  std::size_t k = 0;
  for (std::size_t f = 0; f < F; ++f) {
    const auto x = s.channel(f);
    for (std::size_t j = 1; j <= J; ++j) {
      const auto d = oracle_detail(x, j);
      double e = 0.0, mabs = 0.0;
      for (double v : d) {
        e += v * v;
        mabs += std::abs(v);
      }
      EXPECT_NEAR(feat[k++], std::log1p(e), 1e-9);
      EXPECT_NEAR(feat[k++], mabs / static_cast<double>(d.size()), 1e-9);
      EXPECT_NEAR(feat[k++], std::sqrt(oracle::population_variance(d)), 1e-9);
    }
    const auto a = oracle_approx(x, J);
    double e = 0.0;
    for (double v : a) e += v * v;
    EXPECT_NEAR(feat[k++], oracle::mean(a), 1e-9);
    EXPECT_NEAR(feat[k++], std::sqrt(oracle::population_variance(a)), 1e-9);
    EXPECT_NEAR(feat[k++], std::log1p(e), 1e-9);
  }
  EXPECT_EQ(k, feat.size());
}

TEST(Features, ConstantSeriesDetailFeaturesVanish) {
  const auto s = fixtures::activity_sample(Activity::Sit, 64, 1, std::vector<double>(64, -2.0));
  const auto feat = dwt_features(s, 4);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(feat[i], 0.0) << i;
  EXPECT_NEAR(feat[12], -8.0, 1e-12);
  EXPECT_NEAR(feat[13], 0.0, 1e-12);
  EXPECT_NEAR(feat[14], std::log1p(64.0 * 4.0), 1e-12);
}

}  // namespace
