#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdebnn/data.hpp"
#include "sdebnn/variational.hpp"

namespace sdebnn::toys {

/// Conjugate toy for the latent OU weight process. The likelihood is a
/// product of Gaussian transition potentials
///   l(w) = sum_k [m_k (w_{k+1} - w_k + w_k dt_k) - m_k^2 dt_k / 2] / sigma^2,
///   m_k = alpha w_k + beta,
/// under which the exact posterior of the Euler chain is the chain with
/// drift -w + alpha w + beta and the same diffusion, and the evidence is 1.
/// A linear drift net with phi = (alpha, 0, beta) represents it exactly.
vi::LoglikFn conjugate_potential_loglik(double alpha, double beta, double sigma);

/// E[w_t] and Var[w_t] of dw = -w dt + sigma dB started at w0.
double ou_mean(double w0, double t);
double ou_variance(double sigma, double t);

/// One latent weight observed with noise at t = 0.1, 0.2, ..., 1.0:
/// y_i = exp(B_{t_i}) for a single Brownian path (seed, 0).
struct ExpBrownianData {
  std::vector<double> times;
  std::vector<double> values;
};
ExpBrownianData exp_brownian_observations(std::uint64_t seed);
inline constexpr double kExpBrownianScale = 0.1;

/// Latent 1D model with a time-conditioned drift net for the toy problems.
SdeBnnModel latent_toy_model(double sigma, double w0, std::span<const std::size_t> hidden, std::uint64_t seed);

/// ELBO problem for observations of weight component 0; `steps` must put
/// every observation time on the grid.
vi::ElboProblem observation_problem(const lik::Likelihood& lik, const std::vector<double>& times,
                                    const std::vector<double>& values, std::size_t paths_per_sample, int steps);

/// The two-Cauchy-observation toy as an ELBO problem (data from
/// data::gen_cauchy_two_obs, Cauchy scale data::kCauchyToyScale).
vi::ElboProblem cauchy_problem(const data::Dataset& ds, std::size_t paths_per_sample, int steps);

/// Component 0 of w at grid time t (must be a grid point) for `n` posterior
/// paths (seed, first_path_id + i).
std::vector<double> marginal_samples(const SdeBnnModel& model, double t, std::size_t n, std::uint64_t seed,
                                     const SolverConfig& solver, std::uint64_t first_path_id = 0);

/// Silverman rule: 0.9 min(sd, IQR / 1.34) n^(-1/5).
double silverman_bandwidth(std::span<const double> xs);

/// Local maxima of a Gaussian KDE evaluated on `grid_points` equally spaced
/// points spanning the data +- 3 bandwidths. Maxima below `min_relative`
/// times the highest peak are ignored.
std::size_t kde_mode_count(std::span<const double> xs, std::size_t grid_points = 512,
                           double min_relative = 0.05);

}  // namespace sdebnn::toys
