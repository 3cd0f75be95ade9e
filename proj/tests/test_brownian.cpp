#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "sdebnn/brownian.hpp"
#include "sdebnn/errors.hpp"
#include "test_models.hpp"

namespace sdebnn {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

TEST(Brownian, ZeroLengthInterval) {
  const BrownianPath path({42, 3}, 4);
  EXPECT_EQ(path.increment(0.5, 0.5), std::vector<double>(4, 0.0));
}

TEST(Brownian, RepeatedQueriesIdentical) {
  const BrownianPath a({42, 3}, 3);
  const BrownianPath b({42, 3}, 3);
  EXPECT_EQ(a.increment(0.125, 0.7), a.increment(0.125, 0.7));
  EXPECT_EQ(a.increment(0.125, 0.7), b.increment(0.125, 0.7));
  EXPECT_EQ(a.value(0.3), b.value(0.3));
}

TEST(Brownian, HalvesSumToWhole) {
  const BrownianPath path({7, 0}, 5);
  const auto whole = path.increment(0.0, 1.0);
  const auto left = path.increment(0.0, 0.5);
  const auto right = path.increment(0.5, 1.0);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(left[j] + right[j], whole[j], 4 * kEps * std::abs(whole[j]) + 1e-300);
}

TEST(Brownian, OutOfHorizonRejected) {
  const BrownianPath path({1, 1}, 2);
  EXPECT_THROW((void)path.increment(-0.1, 0.5), DomainError);
  EXPECT_THROW((void)path.increment(0.2, 1.5), DomainError);
  EXPECT_THROW((void)path.increment(0.6, 0.5), DomainError);
  EXPECT_THROW((void)path.value(std::nan("")), DomainError);
}

TEST(Brownian, SubdivideOutsideIntervalRejected) {
  const BrownianPath path({1, 1}, 2);
  EXPECT_THROW((void)path.subdivide(0.0, 0.5, 0.5), DomainError);
  EXPECT_THROW((void)path.subdivide(0.0, 0.5, 0.7), DomainError);
  EXPECT_THROW((void)path.subdivide(0.25, 0.5, 0.1), DomainError);
}

TEST(Brownian, SubdivideNearLeftEndpointVanishes) {
  const BrownianPath path({5, 9}, 3);
  const double tiny = 1e-14;
  for (double v : path.subdivide(0.0, 0.5, tiny)) EXPECT_LT(std::abs(v), 10 * std::sqrt(tiny));
}

TEST(Brownian, SubdivideThenSumReproducesParent) {
  const BrownianPath path({5, 9}, 3);
  const auto parent = path.increment(0.25, 0.75);
  const auto left = path.subdivide(0.25, 0.75, 0.5);
  const auto right = path.increment(0.5, 0.75);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(left[j] + right[j], parent[j], 8 * kEps);
}

TEST(Brownian, IncrementVarianceMatchesInterval) {
  const std::size_t n = 100000;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = BrownianPath({2024, i}, 1).increment(0.0, 0.25)[0];
  const auto m = testing::moments(xs);
  const double se = 0.25 * std::sqrt(2.0 / static_cast<double>(n));
  EXPECT_NEAR(m.var, 0.25, 3 * se);
  EXPECT_NEAR(m.mean, 0.0, 3 * std::sqrt(0.25 / static_cast<double>(n)));
}

TEST(Brownian, BridgeMidpointVariance) {
  // B(1/2) - B(1)/2 is the bridge residual at the midpoint of [0, 1].
  const std::size_t n = 40000;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const BrownianPath p({77, i}, 1);
    xs[i] = p.subdivide(0.0, 1.0, 0.5)[0] - 0.5 * p.increment(0.0, 1.0)[0];
  }
  const auto m = testing::moments(xs);
  EXPECT_NEAR(m.var, 0.25, 3 * 0.25 * std::sqrt(2.0 / static_cast<double>(n)));
  EXPECT_NEAR(m.mean, 0.0, 3 * m.se_mean);
}

TEST(Brownian, OffGridBridgeVariance) {
  // Off the dyadic tree: B(0.3) - B(0.1) has variance 0.2.
  const std::size_t n = 40000;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = BrownianPath({91, i}, 1).increment(0.1, 0.3)[0];
  const auto m = testing::moments(xs);
  EXPECT_NEAR(m.var, 0.2, 3 * 0.2 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST(Brownian, NonOverlappingIncrementsUncorrelated) {
  const std::size_t n = 40000;
  double cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const BrownianPath p({13, i}, 1);
    cov += p.increment(0.0, 0.4)[0] * p.increment(0.4, 0.9)[0];
  }
  cov /= static_cast<double>(n);
  // sd of the product is sqrt(0.4 * 0.5)
  EXPECT_NEAR(cov, 0.0, 3 * std::sqrt(0.2 / static_cast<double>(n)));
}

TEST(Brownian, DistinctPathIdsUncorrelated) {
  const std::size_t n = 40000;
  double cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += BrownianPath({13, 2 * i}, 1).increment(0.0, 1.0)[0] * BrownianPath({13, 2 * i + 1}, 1).increment(0.0, 1.0)[0];
  }
  EXPECT_NEAR(cov / static_cast<double>(n), 0.0, 3 / std::sqrt(static_cast<double>(n)));
}

TEST(Brownian, TerminalMeanNearZero) {
  const std::size_t n = 10000;
  const std::size_t dim = 3;
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = BrownianPath({8, i}, dim).increment(0.0, 1.0)[j];
    const auto m = testing::moments(xs);
    EXPECT_NEAR(m.mean, 0.0, 3 * m.se_mean) << "component " << j;
  }
}

TEST(Brownian, DyadicLeavesSumToWhole) {
  const BrownianPath path({31, 4}, 2);
  const auto whole = path.increment(0.0, 1.0);
  for (int d = 0; d <= 12; ++d) {
    const std::size_t n = std::size_t{1} << d;
    std::vector<double> grid(n + 1);
    for (std::size_t i = 0; i <= n; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(n);
    const auto inc = path.increments(grid);
    for (std::size_t j = 0; j < 2; ++j) {
      double sum = 0.0, mag = std::abs(whole[j]);
      for (const auto& v : inc) {
        sum += v[j];
        mag = std::max(mag, std::abs(v[j]));
      }
      EXPECT_NEAR(sum, whole[j], static_cast<double>(n) * kEps * std::max(mag, 1.0)) << "depth " << d;
    }
  }
}

TEST(Brownian, GridIncrementsMatchSingleQueries) {
  const BrownianPath path({3, 3}, 2);
  const std::vector<double> grid{0.0, 0.05, 0.1, 0.35, 0.5, 1.0};
  const auto inc = path.increments(grid);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) EXPECT_EQ(inc[i], path.increment(grid[i], grid[i + 1]));
}

TEST(Brownian, QueryOrderIrrelevant) {
  const BrownianPath path({3, 8}, 1);
  const std::vector<double> fwd{0.1, 0.2, 0.7, 0.99};
  const std::vector<double> rev{0.99, 0.7, 0.2, 0.1};
  const auto a = path.values(fwd);
  const auto b = path.values(rev);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a[i], b[3 - i]);
}

TEST(Brownian, CoarseGridIsSubsetOfFine) {
  const BrownianPath path({12, 0}, 1);
  const auto coarse = path.increments(std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  const auto fine = path.increments(std::vector<double>{0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0});
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(fine[2 * i][0] + fine[2 * i + 1][0], coarse[i][0], 4 * kEps);
  }
}

TEST(Brownian, ZeroDimensionRejected) { EXPECT_THROW(BrownianPath({0, 0}, 0), ContractError); }

}  // namespace
}  // namespace sdebnn
