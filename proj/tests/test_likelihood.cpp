#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "fd_oracle.hpp"
#include "sdebnn/likelihood.hpp"
#include "sdebnn/random.hpp"

namespace sdebnn::lik {
namespace {

TEST(LogProb, UniformCategorical) {
  const Tensor logits(Shape{1, 10}, 0.3);
  const std::size_t y[] = {4};
  EXPECT_NEAR(log_prob(Likelihood::categorical(10), logits, y).item(), -std::log(10.0), 1e-15);
}

TEST(LogProb, CauchyAtMode) {
  const Tensor y = Tensor::vector({2.5});
  EXPECT_NEAR(log_prob(Likelihood::cauchy(1.0), y, y).item(), -std::log(std::numbers::pi), 1e-15);
  EXPECT_NEAR(log_prob(Likelihood::cauchy(1.0), y, y).item(), -1.144730, 1e-6);
}

TEST(LogProb, GaussianAtMean) {
  const double s = 0.3;
  const Tensor y = Tensor::vector({-1.0});
  EXPECT_NEAR(log_prob(Likelihood::gaussian(s), y, y).item(), -0.5 * std::log(2 * std::numbers::pi * s * s), 1e-15);
}

TEST(LogProb, GaussianAndCauchyOffMode) {
  const Tensor mu = Tensor::vector({0.0, 1.0});
  const Tensor y = Tensor::vector({0.5, -1.0});
  const double s = 0.7;
  double g = 0.0, c = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const double z = (y[i] - mu[i]) / s;
    g += -0.5 * z * z - std::log(s) - 0.5 * std::log(2 * std::numbers::pi);
    c += -std::log(std::numbers::pi * s * (1 + z * z));
  }
  EXPECT_NEAR(log_prob(Likelihood::gaussian(s), mu, y).item(), g, 1e-14);
  EXPECT_NEAR(log_prob(Likelihood::cauchy(s), mu, y).item(), c, 1e-14);
}

TEST(LogProb, InvalidInputs) {
  const Tensor logits(Shape{2, 3});
  const std::size_t bad[] = {0, 3};
  EXPECT_THROW((void)log_prob(Likelihood::categorical(3), logits, bad), ContractError);
  const std::size_t good[] = {0, 2};
  EXPECT_THROW((void)log_prob(Likelihood::categorical(4), logits, good), ContractError);
  EXPECT_THROW((void)log_prob(Likelihood::gaussian(0.0), Tensor::vector({1.0}), Tensor::vector({1.0})), DomainError);
  EXPECT_THROW((void)log_prob(Likelihood::gaussian(1.0), Tensor::vector({1.0}), Tensor::vector({1.0, 2.0})),
               ContractError);
}

TEST(LogProb, DifferentiableInPrediction) {
  rng::SequentialRng rng(2);
  Tensor logits(Shape{4, 3});
  for (auto& v : logits.values()) v = rng.uniform(-2, 2);
  const std::size_t y[] = {0, 2, 1, 1};
  const Tensor mu = Tensor::vector({0.1, -0.4, 2.0});
  const Tensor target = Tensor::vector({0.3, 0.3, -1.0});
  for (const auto& L : {Likelihood::gaussian(0.5), Likelihood::cauchy(0.5)}) {
    ad::Tape tape;
    const ad::Var m = tape.variable(mu);
    const ad::Var wrt[] = {m};
    const auto g = tape.backward(log_prob(L, m, target), wrt)[m];
    const auto f = [&](const Tensor& p) { return log_prob(L, p, target).item(); };
    EXPECT_LT(testing::max_relative_error(g, testing::central_difference(f, mu)), 1e-6);
  }
  ad::Tape tape;
  const ad::Var l = tape.variable(logits);
  const ad::Var wrt[] = {l};
  const auto g = tape.backward(log_prob(Likelihood::categorical(3), l, y), wrt)[l];
  const auto f = [&](const Tensor& p) { return log_prob(Likelihood::categorical(3), p, y).item(); };
  EXPECT_LT(testing::max_relative_error(g, testing::central_difference(f, logits)), 1e-6);
}

TEST(Softmax, RowsSumToOne) {
  rng::SequentialRng rng(3);
  Tensor logits(Shape{50, 10});
  for (auto& v : logits.values()) v = rng.uniform(-30, 30);
  const Tensor p = softmax_rows(logits);
  for (std::size_t i = 0; i < 50; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 10; ++j) s += p.at(i, j);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Calibration, PerfectPredictor) {
  const Tensor p = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const std::size_t y[] = {0, 1, 2};
  const auto r = calibration(p, y);
  EXPECT_EQ(r.ece, 0.0);
  EXPECT_EQ(r.brier, 0.0);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.nll, 0.0);
  EXPECT_EQ(r.bins.size(), 15u);
  EXPECT_EQ(r.bins.back().count, 3u);
}

TEST(Calibration, UniformBinaryBalanced) {
  const Tensor p(Shape{4, 2}, 0.5);
  const std::size_t y[] = {0, 1, 1, 0};
  const auto r = calibration(p, y);
  EXPECT_EQ(r.accuracy, 0.5);
  EXPECT_NEAR(r.ece, 0.0, 1e-15);
  // 0.5 falls in (7/15, 8/15].
  EXPECT_EQ(r.bins[7].count, 4u);
  EXPECT_EQ(r.bins[7].confidence, 0.5);
}

TEST(Calibration, SingleConfidentMistake) {
  const Tensor p = Tensor::matrix(1, 2, {0.9, 0.1});
  const std::size_t y[] = {1};
  const auto r = calibration(p, y);
  EXPECT_NEAR(r.ece, 0.9, 1e-15);
  // (0.9 - 0)^2 + (0.1 - 1)^2 summed over classes.
  EXPECT_NEAR(r.brier, 1.62, 1e-15);
  EXPECT_NEAR(r.nll, -std::log(0.1), 1e-15);
  EXPECT_EQ(r.accuracy, 0.0);
}

TEST(Calibration, EceMatchesDirectFormula) {
  rng::SequentialRng rng(5);
  const std::size_t n = 400, c = 4;
  Tensor logits(Shape{n, c});
  for (auto& v : logits.values()) v = rng.uniform(-3, 3);
  const Tensor p = softmax_rows(logits);
  std::vector<std::size_t> y(n);
  for (auto& v : y) v = rng.below(c);
  const auto r = calibration(p, y);

  // Oracle: direct per-bin sums.
  std::vector<double> conf(15), acc(15), cnt(15);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t top = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (p.at(i, j) > p.at(i, top)) top = j;
    int b = static_cast<int>(std::ceil(p.at(i, top) * 15)) - 1;
    b = std::max(b, 0);
    conf[b] += p.at(i, top);
    acc[b] += top == y[i] ? 1 : 0;
    cnt[b] += 1;
  }
  double ece = 0.0;
  for (int b = 0; b < 15; ++b)
    if (cnt[b] > 0) ece += std::abs(acc[b] - conf[b]) / n;
  EXPECT_NEAR(r.ece, ece, 1e-12);
  EXPECT_GE(r.brier, 0.0);
  EXPECT_LE(r.brier, 2.0);

  // Permutation invariance.
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = (i * 7 + 3) % n;
  Tensor p2(p.shape());
  std::vector<std::size_t> y2(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) p2.at(i, j) = p.at(perm[i], j);
    y2[i] = y[perm[i]];
  }
  const auto r2 = calibration(p2, y2);
  EXPECT_NEAR(r2.ece, r.ece, 1e-14);
  EXPECT_NEAR(r2.brier, r.brier, 1e-14);
  EXPECT_NEAR(r2.nll, r.nll, 1e-14);
  EXPECT_EQ(r2.accuracy, r.accuracy);
}

TEST(Calibration, RejectsUnnormalisedRows) {
  const Tensor p = Tensor::matrix(1, 2, {0.6, 0.6});
  const std::size_t y[] = {0};
  EXPECT_THROW((void)calibration(p, y), ContractError);
}

TEST(Calibration, JsonKeysStable) {
  const Tensor p = Tensor::matrix(1, 2, {0.9, 0.1});
  const std::size_t y[] = {0};
  const auto j = to_json(calibration(p, y));
  for (const char* key : {"accuracy", "nll", "ece", "brier", "bins"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["bins"].size(), 15u);
  EXPECT_TRUE(j["bins"][0].contains("confidence"));
}

TEST(Predictive, AveragesProbabilitiesNotLogits) {
  const Tensor a = Tensor::matrix(1, 2, {0.99, 0.01});
  const Tensor b = Tensor::matrix(1, 2, {0.01, 0.99});
  const Tensor samples[] = {a, b};
  const Tensor m = average_probabilities(samples);
  EXPECT_DOUBLE_EQ(m[0], 0.5);
  EXPECT_DOUBLE_EQ(m[1], 0.5);
}

}  // namespace
}  // namespace sdebnn::lik
