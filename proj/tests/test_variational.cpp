#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fd_oracle.hpp"
#include "sdebnn/toys.hpp"
#include "sdebnn/variational.hpp"
#include "test_models.hpp"

namespace sdebnn::vi {
namespace {

using ad::Shape;
using testing::latent_model;

TEST(ClosedFormKl, Values) {
  EXPECT_EQ(kl_closed_form_check(0.7, 0.7, 0.3, 2.0), 0.0);
  EXPECT_EQ(kl_closed_form_check(0.0, 1.0, 1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(kl_closed_form_check(0.2, -1.0, 0.6, 1.5), kl_closed_form_check(0.2, -1.0, 0.3, 1.5) / 4.0);
  EXPECT_THROW((void)kl_closed_form_check(0.0, 1.0, 0.0, 1.0), DomainError);
  EXPECT_THROW((void)kl_closed_form_check(0.0, 1.0, -1.0, 1.0), DomainError);
}

TEST(Estimator, ParseRoundTrip) {
  for (auto e : kAllEstimators) EXPECT_EQ(parse_estimator(to_string(e)), e);
  EXPECT_THROW((void)parse_estimator("reinforce"), ConfigError);
}

ElboProblem terminal_problem(const SdeBnnModel& m, std::size_t rows) {
  ElboProblem p;
  p.model = &m;
  p.paths_per_sample = rows;
  p.data_scale = 3.0;
  std::vector<double> y;
  p.loglik = observation_loglik(lik::Likelihood::gaussian(0.5), {0.5, 1.0}, {0.3, -0.2});
  p.terminal_only = false;
  return p;
}

TEST(Elbo, ZeroDriftMeansValueIsLoglik) {
  auto m = latent_model(2, 0.1, 0.4, {5});
  rng::SequentialRng rng(3);
  m.drift.initialize(rng);
  const auto p = terminal_problem(m, 3);
  for (auto e : kAllEstimators) {
    const auto b = elbo_estimate(p, e, 4, 11);
    EXPECT_EQ(b.kl, 0.0);
    EXPECT_EQ(b.mart, 0.0);
    EXPECT_EQ(b.value, b.loglik);
    EXPECT_EQ(b.samples, 4u);
  }
}

TEST(Elbo, ConstantDriftKlMatchesClosedForm) {
  auto m = latent_model(1, 1.0, 0.0);
  m.drift.set_phi(Tensor::vector({0.0, 0.0, 1.0}));
  auto p = terminal_problem(m, 1);
  const auto b = elbo_estimate(p, Estimator::standard, 10000, 5);
  std::vector<double> kls;
  // kl is path-independent here, so every sample equals the closed form.
  EXPECT_NEAR(b.kl, kl_closed_form_check(0.0, 1.0, 1.0, 1.0), 1e-12);
}

TEST(Elbo, EstimatorsDifferOnlyByMartingale) {
  const auto m = latent_model(2, 0.2, 0.4, {4}, 0.5, 9);
  const auto p = terminal_problem(m, 1);
  const std::size_t n = 10000;
  const auto s = elbo_estimate(p, Estimator::standard, n, 21);
  const auto f = elbo_estimate(p, Estimator::fullmc, n, 21);
  const auto t = elbo_estimate(p, Estimator::stl, n, 21);
  EXPECT_EQ(f.value, t.value);
  EXPECT_EQ(s.kl, f.kl);
  EXPECT_NEAR(s.value - f.value, f.mart, 1e-12 * std::abs(s.value));
  // Means agree within 3 SE of the per-sample difference, which is the martingale.
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = s.sample_values[i] - f.sample_values[i];
  const auto mo = testing::moments(diff);
  EXPECT_GT(mo.var, 0.0);
  EXPECT_LT(std::abs(mo.mean), 3 * mo.se_mean);
}

TEST(Elbo, SameSeedSameValue) {
  const auto m = latent_model(2, 0.2, 0.4, {4}, 0.5, 9);
  auto p = terminal_problem(m, 2);
  const auto a = elbo_estimate(p, Estimator::fullmc, 5, 8);
  p.workers = 3;
  const auto b = elbo_estimate(p, Estimator::fullmc, 5, 8);
  EXPECT_EQ(a.sample_values, b.sample_values);
  EXPECT_NE(a.value, elbo_estimate(p, Estimator::fullmc, 5, 9).value);
}

// Frozen-noise surrogate used as the finite-difference oracle. For STL the
// martingale integrand keeps phi fixed at phi_blocked while the weight path
// moves with phi.
double surrogate(const SdeBnnModel& base, const Tensor& phi, const Tensor& phi_blocked, Estimator e,
                 const ElboProblem& p, std::size_t n_samples, std::uint64_t seed) {
  SdeBnnModel m = base;
  m.drift.set_phi(phi);
  double total = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto paths = testing::make_paths(seed, p.paths_per_sample, m.weight_dim(), s * p.paths_per_sample);
    BoundModel<Tensor> bound{&m, m.drift.bind(phi), m.drift.bind(phi_blocked)};
    const auto mode = e == Estimator::stl ? MartingaleMode::blocked_phi : MartingaleMode::full;
    const auto grid = fixed_grid(p.solver.steps);
    auto state = initial_state(m, Tensor(Shape{0}), p.paths_per_sample);
    ad::Tape tape;
    TapedTrajectory traj{grid, {}};
    auto lift = [&](const AugmentedState<Tensor>& st) {
      return AugmentedState<Var>{tape.constant(st.w), tape.constant(st.h), tape.constant(st.kl),
                                 tape.constant(st.mart)};
    };
    traj.states.push_back(lift(state));
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      state = em_step(state, grid[k], grid[k + 1] - grid[k], stacked_increment(paths, grid[k], grid[k + 1]), bound,
                      mode);
      traj.states.push_back(lift(state));
    }
    const double ll = p.loglik(tape, traj, {}).value().item() * p.data_scale;
    double penalty = state.kl.item();
    if (e != Estimator::standard) penalty += state.mart.item();
    total += (ll - p.kl_scale * penalty) / static_cast<double>(p.paths_per_sample);
  }
  return total / static_cast<double>(n_samples);
}

TEST(ElboGradient, MatchesFrozenNoiseFiniteDifferences) {
  const auto m = latent_model(2, 0.3, 0.4, {3}, 0.6, 12);
  auto p = terminal_problem(m, 2);
  p.kl_scale = 0.8;
  p.solver.steps = 8;
  for (auto e : kAllEstimators) {
    const auto g = elbo_gradient(p, e, 2, 31);
    const Tensor phi0 = m.drift.phi();
    const auto f = [&](const Tensor& phi) { return -surrogate(m, phi, phi0, e, p, 2, 31); };
    EXPECT_NEAR(surrogate(m, phi0, phi0, e, p, 2, 31), g.elbo.value, 1e-12 * std::abs(g.elbo.value));
    EXPECT_LT(testing::max_relative_error(g.d_phi, testing::central_difference(f, phi0)), 1e-4) << to_string(e);
  }
}

TEST(ElboGradient, StlDiffersFromFullMc) {
  const auto m = latent_model(2, 0.3, 0.4, {3}, 0.6, 12);
  const auto p = terminal_problem(m, 1);
  const auto full = elbo_gradient(p, Estimator::fullmc, 1, 31);
  const auto stl = elbo_gradient(p, Estimator::stl, 1, 31);
  EXPECT_EQ(full.elbo.value, stl.elbo.value);
  EXPECT_GT((full.d_phi - stl.d_phi).max_abs(), 1e-6);
}

TEST(ElboGradient, AdjointMatchesBackprop) {
  const auto m = latent_model(2, 0.3, 0.4, {3}, 0.6, 12);
  auto p = terminal_problem(m, 2);
  p.loglik = observation_loglik(lik::Likelihood::cauchy(0.5), {1.0}, {0.3});
  p.terminal_only = true;
  for (auto e : kAllEstimators) {
    const auto bp = elbo_gradient(p, e, 2, 4);
    auto pa = p;
    pa.method = GradientMethod::adjoint;
    const auto adj = elbo_gradient(pa, e, 2, 4);
    EXPECT_LT(testing::max_relative_error(adj.d_phi, bp.d_phi, 1e-300), 1e-10);
    EXPECT_LT(testing::max_relative_error(adj.d_w0, bp.d_w0, 1e-300), 1e-10);
  }
  p.terminal_only = false;
  p.method = GradientMethod::adjoint;
  EXPECT_THROW((void)elbo_gradient(p, Estimator::stl, 1, 4), ContractError);
}

TEST(ElboGradient, ObservationOffGridRejected) {
  const auto m = latent_model(1, 0.1, 0.0);
  auto p = terminal_problem(m, 1);
  p.loglik = observation_loglik(lik::Likelihood::gaussian(1.0), {0.33}, {0.0});
  EXPECT_THROW((void)elbo_estimate(p, Estimator::standard, 1, 1), ContractError);
}

TEST(Variance, StlVanishesAtExactPosterior) {
  const double sigma = 0.5, alpha = -0.8, beta = 0.3;
  auto m = latent_model(1, sigma, 0.2);
  m.drift.set_phi(Tensor::vector({alpha, 0.0, beta}));
  ElboProblem p;
  p.model = &m;
  p.loglik = toys::conjugate_potential_loglik(alpha, beta, sigma);
  p.terminal_only = false;
  // Exact posterior: the full estimator equals log evidence = 0 on every path.
  const auto full = elbo_estimate(p, Estimator::fullmc, 50, 3);
  for (double v : full.sample_values) EXPECT_NEAR(v, 0.0, 1e-12);
  const auto stl = grad_variance_probe(p, Estimator::stl, 200, 3);
  const auto std_ = grad_variance_probe(p, Estimator::standard, 200, 3);
  EXPECT_LT(stl.var_grad, 1e-24);
  EXPECT_GT(std_.var_grad, 1e-3);
}

TEST(Variance, EstimatorsUnbiased) {
  const auto m = latent_model(1, 0.3, 0.5, {2}, 0.7, 2);
  auto p = terminal_problem(m, 1);
  const std::size_t n = 4000;
  std::vector<VarianceSummary> v;
  for (auto e : kAllEstimators) v.push_back(grad_variance_probe(p, e, n, 17));
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a + 1; b < 3; ++b) {
      for (std::size_t j = 0; j < v[a].mean.size(); ++j) {
        const double se = std::sqrt((v[a].variance[j] + v[b].variance[j]) / static_cast<double>(n));
        EXPECT_LT(std::abs(v[a].mean[j] - v[b].mean[j]), 3 * se) << a << " vs " << b << " param " << j;
      }
    }
  }
}

TEST(Variance, CsvHasThreeSeries) {
  std::vector<VarianceRow> rows;
  for (auto e : kAllEstimators) rows.push_back({e, 10, 1.0, 0.5, 0.25});
  std::ostringstream os;
  write_variance_csv(os, rows);
  EXPECT_EQ(os.str(),
            "estimator,step,mean_grad_norm,var_grad,var_grad_norm\n"
            "standard,10,1,0.5,0.25\nfullmc,10,1,0.5,0.25\nstl,10,1,0.5,0.25\n");
}

}  // namespace
}  // namespace sdebnn::vi
