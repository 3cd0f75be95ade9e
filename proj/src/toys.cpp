#include "sdebnn/toys.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sdebnn::toys {

vi::LoglikFn conjugate_potential_loglik(double alpha, double beta, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("conjugate toy needs sigma > 0");
  return [alpha, beta, sigma](ad::Tape& tape, const TapedTrajectory& traj, std::span<const Var>) {
    Var total = tape.constant(Tensor::scalar(0.0));
    for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
      const double dt = traj.times[k + 1] - traj.times[k];
      const Var& w = traj.states[k].w;
      const Var m = w * alpha + Tensor(w.shape(), beta);
      const Var step = traj.states[k + 1].w - w + w * dt;
      total = total + (dot(m, step) - sum(square(m)) * (0.5 * dt)) * (1.0 / (sigma * sigma));
    }
    return total;
  };
}

double ou_mean(double w0, double t) { return w0 * std::exp(-t); }

double ou_variance(double sigma, double t) { return 0.5 * sigma * sigma * (1.0 - std::exp(-2.0 * t)); }

ExpBrownianData exp_brownian_observations(std::uint64_t seed) {
  ExpBrownianData d;
  for (int i = 1; i <= 10; ++i) d.times.push_back(0.1 * i);
  const BrownianPath path(SeedKey{seed, 0}, 1);
  for (const auto& b : path.values(d.times)) d.values.push_back(std::exp(b[0]));
  return d;
}

SdeBnnModel latent_toy_model(double sigma, double w0, std::span<const std::size_t> hidden, std::uint64_t seed) {
  SdeBnnModel m;
  m.prior.sigma = sigma;
  m.drift = nets::PosteriorDriftNet(1, hidden, nets::Activation::tanh);
  rng::SequentialRng rng(seed, 1);
  m.drift.initialize(rng);
  m.w0 = Tensor::vector({w0});
  return m;
}

vi::ElboProblem observation_problem(const lik::Likelihood& lik, const std::vector<double>& times,
                                    const std::vector<double>& values, std::size_t paths_per_sample, int steps) {
  vi::ElboProblem p;
  p.paths_per_sample = paths_per_sample;
  p.solver.steps = steps;
  p.loglik = vi::observation_loglik(lik, times, values);
  p.terminal_only = std::all_of(times.begin(), times.end(), [](double t) { return t == 1.0; });
  return p;
}

vi::ElboProblem cauchy_problem(const data::Dataset& ds, std::size_t paths_per_sample, int steps) {
  std::vector<double> times, values;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    times.push_back(ds.inputs.at(i, 0));
    values.push_back(ds.targets.at(i, 0));
  }
  return observation_problem(lik::Likelihood::cauchy(data::kCauchyToyScale), times, values, paths_per_sample,
                             steps);
}

std::vector<double> marginal_samples(const SdeBnnModel& model, double t, std::size_t n, std::uint64_t seed,
                                     const SolverConfig& solver, std::uint64_t first_path_id) {
  std::vector<BrownianPath> paths;
  paths.reserve(n);
  for (std::size_t i = 0; i < n; ++i) paths.emplace_back(SeedKey{seed, first_path_id + i}, model.weight_dim());
  const auto traj = solve(model, Tensor(ad::Shape{0}), paths, solver, true);
  std::size_t k = 0;
  while (k < traj.times.size() && std::abs(traj.times[k] - t) > 1e-12) ++k;
  if (k == traj.times.size()) throw ContractError("time " + std::to_string(t) + " is not on the solver grid");
  const auto& w = traj.states[k].w;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = w.at(i, 0);
  return out;
}

double silverman_bandwidth(std::span<const double> xs) {
  if (xs.size() < 2) throw ContractError("bandwidth needs at least two samples");
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (double x : s) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : s) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  auto quantile = [&](double q) {
    const double pos = q * (n - 1.0);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

std::size_t kde_mode_count(std::span<const double> xs, std::size_t grid_points, double min_relative) {
  if (grid_points < 3) throw ContractError("KDE grid needs at least 3 points");
  const double h = silverman_bandwidth(xs);
  if (!(h > 0.0)) return 1;
  const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
  const double lo = *lo_it - 3.0 * h, hi = *hi_it + 3.0 * h;
  std::vector<double> dens(grid_points, 0.0);
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);
    for (double v : xs) {
      const double z = (x - v) / h;
      dens[g] += std::exp(-0.5 * z * z);
    }
  }
  const double top = *std::max_element(dens.begin(), dens.end());
  std::size_t modes = 0;
  for (std::size_t g = 1; g + 1 < grid_points; ++g) {
    if (dens[g] > dens[g - 1] && dens[g] >= dens[g + 1] && dens[g] >= min_relative * top) ++modes;
  }
  return modes;
}

}  // namespace sdebnn::toys
