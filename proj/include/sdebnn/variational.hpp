#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sdebnn/likelihood.hpp"
#include "sdebnn/sde.hpp"

namespace sdebnn::vi {

enum class Estimator {
  standard,  ///< loglik - kl
  fullmc,    ///< loglik - kl - mart, gradients through everything
  stl,       ///< as fullmc, with phi blocked inside u of the martingale term
};

Estimator parse_estimator(std::string_view name);
std::string_view to_string(Estimator e);
inline constexpr Estimator kAllEstimators[] = {Estimator::standard, Estimator::fullmc, Estimator::stl};

/// Exact path-space KL between dw = a dt + sigma dB and dw = b dt + sigma dB
/// over [0, T]: T (b - a)^2 / (2 sigma^2).
double kl_closed_form_check(double a, double b, double sigma, double T);

/// Data log-likelihood of one Monte Carlo sample, summed over the minibatch.
/// `extras` are the likelihood-side parameters (e.g. a readout).
using LoglikFn = std::function<Var(ad::Tape&, const TapedTrajectory&, std::span<const Var> extras)>;

/// Likelihood of observations of one weight component at solver grid times,
/// summed over observations and over every weight row (path) of the solve.
/// Observation times must coincide with grid points to within 1e-12.
LoglikFn observation_loglik(lik::Likelihood lik, std::vector<double> times, std::vector<double> values,
                           std::size_t component = 0);

enum class GradientMethod { backprop, adjoint };

/// Everything the ELBO needs besides the noise.
struct ElboProblem {
  const SdeBnnModel* model = nullptr;
  Tensor h0;                        ///< [batch x D_h], empty for latent models
  std::size_t paths_per_sample = 1; ///< weight rows per solve; objective is divided by it
  double data_scale = 1.0;          ///< N / batch_size
  double kl_scale = 1.0;            ///< beta
  SolverConfig solver;
  LoglikFn loglik;
  /// The loglik only reads the final state (required for the adjoint method).
  bool terminal_only = true;
  std::vector<Tensor> extras;
  GradientMethod method = GradientMethod::backprop;
  int workers = 1;

  void validate() const;
};

struct ElboBreakdown {
  Estimator estimator = Estimator::standard;
  double loglik = 0.0;  ///< data_scale * summed log-likelihood
  double kl = 0.0;
  double mart = 0.0;
  double value = 0.0;
  std::size_t samples = 0;
  std::vector<double> sample_values;  ///< per-sample objective, for standard errors
};

/// Monte Carlo ELBO over `n_samples` trajectories. Sample s consumes Brownian
/// paths (seed, first_path_id + s * paths_per_sample + p). Every term is
/// divided by paths_per_sample so values are per weight path.
ElboBreakdown elbo_estimate(const ElboProblem& problem, Estimator estimator, std::size_t n_samples,
                            std::uint64_t seed, std::uint64_t first_path_id = 0);

struct ElboGradient {
  ElboBreakdown elbo;
  /// Gradients of the negative objective (the training loss).
  Tensor d_phi;
  Tensor d_w0;
  std::vector<Tensor> d_extras;
};

/// Value and reverse-mode gradient of the estimator with the same noise
/// indexing as elbo_estimate. Gradients are averaged over samples.
ElboGradient elbo_gradient(const ElboProblem& problem, Estimator estimator, std::size_t n_samples,
                           std::uint64_t seed, std::uint64_t first_path_id = 0);

struct VarianceSummary {
  Estimator estimator = Estimator::standard;
  std::size_t n = 0;
  Tensor mean;                 ///< mean phi-gradient
  Tensor variance;             ///< per-parameter sample variance
  double var_grad = 0.0;       ///< variance averaged across parameters
  double mean_grad_norm = 0.0; ///< mean of the per-draw gradient norm
  double var_grad_norm = 0.0;  ///< sample variance of the gradient norm
};

/// n_grad_samples single-sample phi-gradients at fixed parameters. Draw i
/// uses path ids first_path_id + i * paths_per_sample + p for every
/// estimator, so calls that differ only in the estimator share noise.
VarianceSummary grad_variance_probe(const ElboProblem& problem, Estimator estimator, std::size_t n_grad_samples,
                                    std::uint64_t seed, std::uint64_t first_path_id = 0);

struct VarianceRow {
  Estimator estimator;
  std::size_t step;
  double mean_grad_norm;
  double var_grad;
  double var_grad_norm;
};

/// estimator,step,mean_grad_norm,var_grad,var_grad_norm
void write_variance_csv(std::ostream& os, const std::vector<VarianceRow>& rows);

}  // namespace sdebnn::vi
