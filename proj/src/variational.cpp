#include "sdebnn/variational.hpp"

#include <cmath>
#include <ostream>

#include "sdebnn/parallel.hpp"

namespace sdebnn::vi {

Estimator parse_estimator(std::string_view name) {
  if (name == "standard") return Estimator::standard;
  if (name == "fullmc") return Estimator::fullmc;
  if (name == "stl") return Estimator::stl;
  throw ConfigError("unknown estimator '" + std::string(name) + "' (expected standard, fullmc or stl)");
}

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::standard:
      return "standard";
    case Estimator::fullmc:
      return "fullmc";
    case Estimator::stl:
      break;
  }
  return "stl";
}

double kl_closed_form_check(double a, double b, double sigma, double T) {
  if (!(sigma > 0.0)) throw DomainError("closed-form KL needs sigma > 0");
  return T * (b - a) * (b - a) / (2.0 * sigma * sigma);
}

LoglikFn observation_loglik(lik::Likelihood lik, std::vector<double> times, std::vector<double> values,
                           std::size_t component) {
  if (times.size() != values.size()) throw ContractError("observation times and values differ in length");
  lik.validate();
  return [lik, times = std::move(times), values = std::move(values), component](
             ad::Tape& tape, const TapedTrajectory& traj, std::span<const Var>) {
    Var total = tape.constant(Tensor::scalar(0.0));
    for (std::size_t i = 0; i < times.size(); ++i) {
      std::size_t k = 0;
      while (k < traj.times.size() && std::abs(traj.times[k] - times[i]) > 1e-12) ++k;
      if (k == traj.times.size()) {
        throw ContractError("observation time " + std::to_string(times[i]) + " is not on the solver grid");
      }
      const Var& w = traj.states[k].w;
      const std::size_t rows = w.shape()[0], dim = w.shape()[1];
      if (component >= dim) throw ContractError("observed component out of range");
      Tensor pick(ad::Shape{dim, 1});
      pick[component] = 1.0;
      const Var col = reshape(matmul(w, tape.constant(pick)), ad::Shape{rows});
      total = total + lik::log_prob(lik, col, Tensor(ad::Shape{rows}, values[i]));
    }
    return total;
  };
}

void ElboProblem::validate() const {
  if (model == nullptr) throw ContractError("ELBO problem has no model");
  if (!loglik) throw ContractError("ELBO problem has no likelihood");
  if (paths_per_sample == 0) throw ContractError("paths_per_sample must be positive");
  if (model->hidden && paths_per_sample != 1) {
    throw ContractError("models with hidden dynamics use one weight path per sample");
  }
  if (!(data_scale > 0.0) || !(kl_scale >= 0.0)) throw ConfigError("data_scale must be > 0 and kl_scale >= 0");
  if (method == GradientMethod::adjoint && !terminal_only) {
    throw ContractError("the adjoint method needs a terminal-only likelihood");
  }
}

namespace {

std::vector<BrownianPath> sample_paths(const ElboProblem& p, std::uint64_t seed, std::uint64_t first_id) {
  std::vector<BrownianPath> paths;
  paths.reserve(p.paths_per_sample);
  for (std::size_t i = 0; i < p.paths_per_sample; ++i) paths.emplace_back(SeedKey{seed, first_id + i}, p.model->weight_dim());
  return paths;
}

struct SampleResult {
  double loglik = 0.0;
  double kl = 0.0;
  double mart = 0.0;
  double value = 0.0;
  Tensor d_phi, d_w0;
  std::vector<Tensor> d_extras;
};

/// The estimator objective on a taped trajectory; also reports the parts.
Var objective(const ElboProblem& p, Estimator e, ad::Tape& tape, const TapedTrajectory& traj,
              std::span<const Var> extras, SampleResult& parts) {
  const auto& fin = traj.states.back();
  const double inv = 1.0 / static_cast<double>(p.paths_per_sample);
  const Var ll = p.loglik(tape, traj, extras) * (p.data_scale * inv);
  const Var kl = fin.kl * inv;
  const Var mart = fin.mart * inv;
  parts.loglik = ll.value().item();
  parts.kl = kl.value().item();
  parts.mart = mart.value().item();
  Var penalty = kl;
  if (e != Estimator::standard) penalty = penalty + mart;
  const Var value = ll - penalty * p.kl_scale;
  parts.value = value.value().item();
  return value;
}

SampleResult run_sample(const ElboProblem& p, Estimator e, std::uint64_t seed, std::uint64_t first_id,
                        bool want_gradient) {
  const auto paths = sample_paths(p, seed, first_id);
  const auto mode = e == Estimator::stl ? MartingaleMode::blocked_phi : MartingaleMode::full;
  SampleResult parts;
  GradientResult g;
  if (p.method == GradientMethod::adjoint && want_gradient) {
    const TerminalLoss loss = [&](ad::Tape& tape, const AugmentedState<Var>& fin, std::span<const Var> ex) {
      TapedTrajectory traj{{1.0}, {fin}};
      return -objective(p, e, tape, traj, ex, parts);
    };
    g = grad_adjoint(loss, *p.model, p.h0, paths, p.solver, p.extras, mode);
  } else {
    const TrajectoryLoss loss = [&](ad::Tape& tape, const TapedTrajectory& traj, std::span<const Var> ex) {
      return -objective(p, e, tape, traj, ex, parts);
    };
    g = grad_backprop_path(loss, *p.model, p.h0, paths, p.solver, p.extras, mode);
  }
  if (want_gradient) {
    parts.d_phi = std::move(g.d_phi);
    parts.d_w0 = std::move(g.d_w0);
    parts.d_extras = std::move(g.d_extras);
  }
  return parts;
}

std::vector<SampleResult> run_samples(const ElboProblem& p, Estimator e, std::size_t n, std::uint64_t seed,
                                      std::uint64_t first_id, bool want_gradient) {
  p.validate();
  if (n == 0) throw ContractError("ELBO needs at least one sample");
  return parallel_map<SampleResult>(n, p.workers, [&](std::size_t s) {
    return run_sample(p, e, seed, first_id + s * p.paths_per_sample, want_gradient);
  });
}

ElboBreakdown summarize(Estimator e, const std::vector<SampleResult>& samples) {
  ElboBreakdown b;
  b.estimator = e;
  b.samples = samples.size();
  for (const auto& s : samples) {
    b.loglik += s.loglik;
    b.kl += s.kl;
    b.mart += s.mart;
    b.value += s.value;
    b.sample_values.push_back(s.value);
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  b.loglik *= inv;
  b.kl *= inv;
  b.mart *= inv;
  b.value *= inv;
  return b;
}

}  // namespace

ElboBreakdown elbo_estimate(const ElboProblem& problem, Estimator estimator, std::size_t n_samples,
                            std::uint64_t seed, std::uint64_t first_path_id) {
  // Values only: the gradient is not requested, but the same taped forward
  // pass is used so estimate and gradient see identical arithmetic.
  return summarize(estimator, run_samples(problem, estimator, n_samples, seed, first_path_id, false));
}

ElboGradient elbo_gradient(const ElboProblem& problem, Estimator estimator, std::size_t n_samples,
                           std::uint64_t seed, std::uint64_t first_path_id) {
  const auto samples = run_samples(problem, estimator, n_samples, seed, first_path_id, true);
  ElboGradient out;
  out.elbo = summarize(estimator, samples);
  const double inv = 1.0 / static_cast<double>(samples.size());
  out.d_phi = Tensor(samples.front().d_phi.shape());
  out.d_w0 = Tensor(samples.front().d_w0.shape());
  for (const auto& e : samples.front().d_extras) out.d_extras.emplace_back(e.shape());
  for (const auto& s : samples) {
    out.d_phi += s.d_phi;
    out.d_w0 += s.d_w0;
    for (std::size_t k = 0; k < s.d_extras.size(); ++k) out.d_extras[k] += s.d_extras[k];
  }
  out.d_phi = out.d_phi * inv;
  out.d_w0 = out.d_w0 * inv;
  for (auto& e : out.d_extras) e = e * inv;
  return out;
}

VarianceSummary grad_variance_probe(const ElboProblem& problem, Estimator estimator, std::size_t n_grad_samples,
                                    std::uint64_t seed, std::uint64_t first_path_id) {
  if (n_grad_samples < 2) throw ContractError("variance probe needs at least 2 gradient draws");
  const auto samples = run_samples(problem, estimator, n_grad_samples, seed, first_path_id, true);
  const double n = static_cast<double>(n_grad_samples);
  VarianceSummary v;
  v.estimator = estimator;
  v.n = n_grad_samples;
  v.mean = Tensor(samples.front().d_phi.shape());
  std::vector<double> norms;
  for (const auto& s : samples) {
    v.mean += s.d_phi;
    norms.push_back(s.d_phi.norm());
  }
  v.mean = v.mean * (1.0 / n);
  v.variance = Tensor(v.mean.shape());
  for (const auto& s : samples) {
    const Tensor d = s.d_phi - v.mean;
    v.variance += d * d;
  }
  v.variance = v.variance * (1.0 / (n - 1.0));
  for (double x : v.variance.values()) v.var_grad += x;
  v.var_grad /= static_cast<double>(v.variance.size());
  for (double x : norms) v.mean_grad_norm += x;
  v.mean_grad_norm /= n;
  for (double x : norms) v.var_grad_norm += (x - v.mean_grad_norm) * (x - v.mean_grad_norm);
  v.var_grad_norm /= n - 1.0;
  return v;
}

void write_variance_csv(std::ostream& os, const std::vector<VarianceRow>& rows) {
  const auto old = os.precision(17);
  os << "estimator,step,mean_grad_norm,var_grad,var_grad_norm\n";
  for (const auto& r : rows) {
    os << to_string(r.estimator) << ',' << r.step << ',' << r.mean_grad_norm << ',' << r.var_grad << ','
       << r.var_grad_norm << '\n';
  }
  os.precision(old);
}

}  // namespace sdebnn::vi
