#include "sdebnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "sdebnn/parallel.hpp"

namespace sdebnn::train {

using nlohmann::json;

bool adam_step(Tensor& params, const Tensor& grad, AdamState& state, double lr, const AdamHyper& hyper) {
  if (grad.size() != params.size()) {
    throw ContractError("gradient of length " + std::to_string(grad.size()) + " for " +
                        std::to_string(params.size()) + " parameters");
  }
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!grad.all_finite()) return false;
  if (state.m.size() != params.size()) state.m = Tensor(Shape{params.size()});
  if (state.v.size() != params.size()) state.v = Tensor(Shape{params.size()});
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
  return true;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (train_samples == 0 || eval_samples == 0) throw ConfigError("sample counts must be positive");
  if (!(kl_scale >= 0.0)) throw ConfigError("kl_scale must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (max_lr_halvings < 0) throw ConfigError("max_lr_halvings must be >= 0");
  solver.validate();
  if (solver.mode != SolverConfig::Mode::fixed) throw ConfigError("training uses a fixed-step solver");
}

lik::Likelihood SupervisedModel::likelihood() const {
  switch (arch.likelihood) {
    case lik::Likelihood::Kind::categorical:
      return lik::Likelihood::categorical(output_dim);
    case lik::Likelihood::Kind::cauchy:
      return lik::Likelihood::cauchy(arch.likelihood_scale);
    case lik::Likelihood::Kind::gaussian:
      break;
  }
  return lik::Likelihood::gaussian(arch.likelihood_scale);
}

Tensor SupervisedModel::embed(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != input_dim) {
    throw ContractError("inputs of shape " + ad::shape_str(x.shape()) + ", expected [N x " +
                        std::to_string(input_dim) + "]");
  }
  const std::size_t n = x.shape()[0], d = state_dim();
  Tensor h(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < input_dim; ++j) h.at(i, j) = x.at(i, j);
  return h;
}

Tensor SupervisedModel::flat_params() const {
  const Tensor parts[] = {sde.drift.phi(), sde.w0, readout_params};
  return ad::concat(parts);
}

void SupervisedModel::set_flat_params(const Tensor& flat) {
  const std::size_t np = sde.drift.param_count(), nw = sde.weight_dim(), nr = readout.param_count();
  if (flat.size() != np + nw + nr) throw ContractError("flat parameter vector has the wrong length");
  sde.drift.set_phi(ad::slice(flat, 0, Shape{np}));
  sde.w0 = ad::slice(flat, np, Shape{nw});
  readout_params = ad::slice(flat, np + nw, Shape{nr});
}

SupervisedModel build_model(const ArchConfig& arch, std::size_t input_dim, std::size_t output_dim,
                            std::uint64_t seed) {
  if (input_dim == 0 || output_dim == 0) throw ContractError("model needs positive input and output dims");
  if (arch.hidden_width == 0) throw ConfigError("hidden_width must be positive");
  SupervisedModel m;
  m.arch = arch;
  m.input_dim = input_dim;
  m.output_dim = output_dim;
  m.sde.prior.sigma = arch.sigma;
  m.sde.prior.validate();

  const std::size_t widths[] = {arch.hidden_width};
  m.sde.hidden = nets::HiddenDynamics(m.state_dim(), widths, arch.activation);
  const std::size_t d = m.sde.hidden->weight_dim();
  m.sde.drift = nets::PosteriorDriftNet(d, arch.drift_hidden, arch.drift_activation);

  rng::SequentialRng drift_rng(seed, 1), w0_rng(seed, 2), readout_rng(seed, 3);
  m.sde.drift.initialize(drift_rng);
  m.sde.w0 = m.sde.hidden->mlp().init_params(w0_rng, false);
  m.readout = nets::Mlp::make(m.state_dim(), {}, output_dim, nets::Activation::none, nets::Activation::none, false);
  m.readout_params = m.readout.init_params(readout_rng, false);
  m.likelihood().validate();
  return m;
}

std::vector<Tensor> sample_outputs(const SupervisedModel& model, const Tensor& x, std::size_t n_samples,
                                   std::uint64_t seed, const SolverConfig& solver, int workers,
                                   std::uint64_t first_path_id) {
  if (n_samples == 0) throw ContractError("need at least one posterior sample");
  const Tensor h0 = model.embed(x);
  const auto readout = model.readout.unpack(model.readout_params);
  return parallel_map<Tensor>(n_samples, workers, [&](std::size_t s) {
    const BrownianPath path(SeedKey{seed, first_path_id + s}, model.sde.weight_dim());
    const auto traj = solve(model.sde, h0, std::span<const BrownianPath>(&path, 1), solver);
    return model.readout.forward(readout, traj.final.h, 1.0);
  });
}

namespace {

double log_mean_exp(const std::vector<double>& xs) {
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc / static_cast<double>(xs.size()));
}

double location_log_density(const lik::Likelihood& lik, double y, double mu) {
  const double z = (y - mu) / lik.scale;
  if (lik.kind == lik::Likelihood::Kind::cauchy) return -std::log1p(z * z) - std::log(std::numbers::pi * lik.scale);
  return -0.5 * z * z - std::log(lik.scale) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double location_cdf(const lik::Likelihood& lik, double y, double mu) {
  const double z = (y - mu) / lik.scale;
  if (lik.kind == lik::Likelihood::Kind::cauchy) return 0.5 + std::atan(z) / std::numbers::pi;
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

json regression_metrics(const lik::Likelihood& lik, const std::vector<Tensor>& preds, const Tensor& y) {
  const std::size_t n = y.shape()[0], d = y.shape()[1];
  const double s_inv = 1.0 / static_cast<double>(preds.size());
  double sq = 0.0, nll = 0.0, covered = 0.0;
  std::vector<double> logs(preds.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < preds.size(); ++s) logs[s] = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double target = y.at(i, j);
      double mean = 0.0, cdf = 0.0;
      for (std::size_t s = 0; s < preds.size(); ++s) {
        const double mu = preds[s].at(i, j);
        mean += mu;
        cdf += location_cdf(lik, target, mu);
        logs[s] += location_log_density(lik, target, mu);
      }
      mean *= s_inv;
      cdf *= s_inv;
      sq += (mean - target) * (mean - target);
      if (cdf >= 0.025 && cdf <= 0.975) covered += 1.0;
    }
    nll -= log_mean_exp(logs);
  }
  const double cells = static_cast<double>(n * d);
  return {{"n", n}, {"mse", sq / cells}, {"nll", nll / static_cast<double>(n)}, {"coverage_95", covered / cells}};
}

}  // namespace

json evaluate(const SupervisedModel& model, const data::Dataset& ds, std::size_t n_samples, std::uint64_t seed,
              const SolverConfig& solver, int workers) {
  ds.validate();
  if (ds.size() == 0) throw ContractError("cannot evaluate on an empty dataset");
  const auto preds = sample_outputs(model, ds.inputs, n_samples, seed, solver, workers);
  const auto lik = model.likelihood();
  if (lik.kind == lik::Likelihood::Kind::categorical) {
    std::vector<Tensor> probs;
    probs.reserve(preds.size());
    for (const auto& p : preds) probs.push_back(lik::softmax_rows(p));
    json out = lik::to_json(lik::calibration(lik::average_probabilities(probs), ds.labels));
    out["n"] = ds.size();
    return out;
  }
  return regression_metrics(lik, preds, ds.targets);
}

vi::ElboProblem batch_problem(const SupervisedModel& model, const data::Dataset& batch, std::size_t n_train,
                              const TrainConfig& cfg) {
  if (batch.size() == 0) throw ContractError("empty minibatch");
  vi::ElboProblem p;
  p.model = &model.sde;
  p.h0 = model.embed(batch.inputs);
  p.paths_per_sample = 1;
  p.data_scale = static_cast<double>(n_train) / static_cast<double>(batch.size());
  p.kl_scale = cfg.kl_scale;
  p.solver = cfg.solver;
  p.terminal_only = true;
  p.extras = {model.readout_params};
  p.method = cfg.gradient;
  p.workers = cfg.workers;

  const auto lik = model.likelihood();
  const nets::Mlp readout = model.readout;
  if (lik.kind == lik::Likelihood::Kind::categorical) {
    p.loglik = [lik, readout, labels = batch.labels](ad::Tape&, const TapedTrajectory& traj,
                                                    std::span<const Var> ex) {
      const Var logits = readout.forward(readout.unpack(ex[0]), traj.states.back().h, 1.0);
      return lik::log_prob(lik, logits, std::span<const std::size_t>(labels));
    };
  } else {
    p.loglik = [lik, readout, y = batch.targets](ad::Tape&, const TapedTrajectory& traj, std::span<const Var> ex) {
      const Var pred = readout.forward(readout.unpack(ex[0]), traj.states.back().h, 1.0);
      return lik::log_prob(lik, pred, y);
    };
  }
  return p;
}

TrainState init_state(SupervisedModel model, const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.model = std::move(model);
  const std::size_t n = s.model.flat_params().size();
  s.adam.m = Tensor(Shape{n});
  s.adam.v = Tensor(Shape{n});
  s.lr = cfg.lr;
  return s;
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x7368756666ULL;
constexpr std::uint64_t kEvalSalt = 0x6576616c;

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng::SequentialRng rng(seed, rng::mix64(kShuffleStream + epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

/// Signals a non-finite gradient so the epoch is rolled back like a divergence.
struct SkippedStep {};

json run_epoch(TrainState& state, const data::Dataset& train, const TrainConfig& cfg) {
  const std::size_t n = train.size();
  const std::size_t b = std::min(cfg.batch_size, n);
  const auto order = epoch_order(n, cfg.seed, state.epoch);
  double elbo = 0.0, loglik = 0.0, kl = 0.0, mart = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += b) {
    const std::size_t stop = std::min(n, start + b);
    const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                       order.begin() + static_cast<std::ptrdiff_t>(stop));
    const auto problem = batch_problem(state.model, train.rows(idx), n, cfg);
    const auto g = vi::elbo_gradient(problem, cfg.estimator, cfg.train_samples, cfg.seed,
                                     state.step * cfg.train_samples);
    const Tensor parts[] = {g.d_phi, g.d_w0, g.d_extras.at(0)};
    Tensor params = state.model.flat_params();
    if (!adam_step(params, ad::concat(parts), state.adam, state.lr)) throw SkippedStep{};
    state.model.set_flat_params(params);
    ++state.step;
    elbo += g.elbo.value;
    loglik += g.elbo.loglik;
    kl += g.elbo.kl;
    mart += g.elbo.mart;
    ++batches;
  }
  const double inv = 1.0 / static_cast<double>(batches);
  ++state.epoch;
  return {{"epoch", state.epoch}, {"step", state.step},       {"elbo", elbo * inv},
          {"loglik", loglik * inv}, {"kl", kl * inv},         {"mart", mart * inv},
          {"lr", state.lr},         {"skipped_steps", state.skipped_steps}};
}

}  // namespace

void fit(TrainState& state, const data::Dataset& ds, const TrainConfig& cfg, const MetricSink& sink) {
  cfg.validate();
  ds.validate();
  const auto train = ds.subset(data::Split::train);
  if (train.size() == 0) throw ContractError("training split is empty");
  const auto val = ds.subset(data::Split::val);
  const auto& eval_set = val.size() > 0 ? val : train;
  const char* eval_name = val.size() > 0 ? "val" : "train";

  while (state.epoch < cfg.epochs) {
    const TrainState snapshot = state;
    json record;
    std::string failure;
    try {
      record = run_epoch(state, train, cfg);
    } catch (const DivergenceError& e) {
      failure = e.what();
    } catch (const SkippedStep&) {
      failure = "non-finite gradient";
    }
    if (!failure.empty()) {
      const std::uint64_t skipped = state.skipped_steps + 1;
      state = snapshot;
      state.skipped_steps = skipped;
      if (state.lr_halvings >= cfg.max_lr_halvings) {
        throw TrainingDiverged("training diverged in epoch " + std::to_string(state.epoch + 1) + " after " +
                               std::to_string(state.lr_halvings) + " learning-rate halvings (lr " +
                               std::to_string(state.lr) + "): " + failure);
      }
      state.lr *= 0.5;
      ++state.lr_halvings;
      if (sink) {
        sink({{"event", "divergence"}, {"epoch", state.epoch + 1}, {"message", failure}, {"lr", state.lr}});
      }
      continue;
    }
    const bool last = state.epoch == cfg.epochs;
    if (last || (cfg.eval_every > 0 && state.epoch % cfg.eval_every == 0)) {
      json ev = evaluate(state.model, eval_set, cfg.eval_samples, rng::mix64(cfg.seed ^ kEvalSalt), cfg.solver,
                         cfg.workers);
      ev["split"] = eval_name;
      record["eval"] = std::move(ev);
    }
    if (sink) sink(record);
  }
}

namespace {

json values(const Tensor& t) { return t.storage(); }

Tensor tensor_from(const json& j, std::size_t expected, const char* what) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != expected) {
    throw ConfigError(std::string("checkpoint field ") + what + " has " + std::to_string(v.size()) +
                      " values, expected " + std::to_string(expected));
  }
  return Tensor::vector(std::move(v));
}

}  // namespace

json to_json(const ArchConfig& a) {
  return {{"augment", a.augment},
          {"hidden_width", a.hidden_width},
          {"activation", nets::to_string(a.activation)},
          {"drift_hidden", a.drift_hidden},
          {"drift_activation", nets::to_string(a.drift_activation)},
          {"sigma", a.sigma},
          {"likelihood", lik::to_string(a.likelihood)},
          {"likelihood_scale", a.likelihood_scale}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  a.augment = j.at("augment").get<std::size_t>();
  a.hidden_width = j.at("hidden_width").get<std::size_t>();
  a.activation = nets::parse_activation(j.at("activation").get<std::string>());
  a.drift_hidden = j.at("drift_hidden").get<std::vector<std::size_t>>();
  a.drift_activation = nets::parse_activation(j.at("drift_activation").get<std::string>());
  a.sigma = j.at("sigma").get<double>();
  a.likelihood = lik::parse_likelihood_kind(j.at("likelihood").get<std::string>());
  a.likelihood_scale = j.at("likelihood_scale").get<double>();
  return a;
}

json checkpoint_json(const TrainState& state, const json& config_echo) {
  const auto& m = state.model;
  return {{"format", "sdebnn-checkpoint"},
          {"version", kCheckpointVersion},
          {"kind", "supervised"},
          {"sdebnn_version", SDEBNN_VERSION},
          {"encoding", "utf-8 JSON text; doubles in shortest round-trip decimal, so byte order does not apply"},
          {"endianness", "none"},
          {"arch", to_json(m.arch)},
          {"input_dim", m.input_dim},
          {"output_dim", m.output_dim},
          {"params", {{"drift.phi", values(m.sde.drift.phi())}, {"w0", values(m.sde.w0)},
                      {"readout", values(m.readout_params)}}},
          {"adam", {{"m", values(state.adam.m)}, {"v", values(state.adam.v)}, {"t", state.adam.t}}},
          {"counters", {{"epoch", state.epoch}, {"step", state.step}, {"lr", state.lr},
                        {"lr_halvings", state.lr_halvings}, {"skipped_steps", state.skipped_steps}}},
          {"config", config_echo}};
}

TrainState state_from_checkpoint(const json& ckpt) {
  try {
    if (ckpt.at("format") != "sdebnn-checkpoint" || ckpt.value("kind", "supervised") != "supervised") {
      throw ConfigError("not a supervised sdebnn checkpoint");
    }
    const int version = ckpt.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ConfigError("checkpoint version " + std::to_string(version) + ", this build reads version " +
                        std::to_string(kCheckpointVersion));
    }
    TrainState s;
    s.model = build_model(arch_from_json(ckpt.at("arch")), ckpt.at("input_dim").get<std::size_t>(),
                          ckpt.at("output_dim").get<std::size_t>(), 0);
    auto& m = s.model;
    const auto& p = ckpt.at("params");
    m.sde.drift.set_phi(tensor_from(p.at("drift.phi"), m.sde.drift.param_count(), "drift.phi"));
    m.sde.w0 = tensor_from(p.at("w0"), m.sde.weight_dim(), "w0");
    m.readout_params = tensor_from(p.at("readout"), m.readout.param_count(), "readout");
    const std::size_t n = m.flat_params().size();
    const auto& a = ckpt.at("adam");
    s.adam.m = tensor_from(a.at("m"), n, "adam.m");
    s.adam.v = tensor_from(a.at("v"), n, "adam.v");
    s.adam.t = a.at("t").get<std::uint64_t>();
    const auto& c = ckpt.at("counters");
    s.epoch = c.at("epoch").get<std::size_t>();
    s.step = c.at("step").get<std::uint64_t>();
    s.lr = c.at("lr").get<double>();
    s.lr_halvings = c.at("lr_halvings").get<int>();
    s.skipped_steps = c.at("skipped_steps").get<std::uint64_t>();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const json& config_echo) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os << checkpoint_json(state, config_echo).dump(1) << '\n';
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

json load_checkpoint_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open checkpoint " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
}

std::vector<double> fit_latent(SdeBnnModel& model, vi::ElboProblem problem, const LatentFitConfig& cfg,
                               const MetricSink& sink, const LatentObserver& observe) {
  if (!(cfg.lr > 0.0)) throw ConfigError("lr must be positive");
  if (cfg.samples == 0) throw ConfigError("samples must be positive");
  problem.model = &model;
  problem.validate();
  const std::size_t np = model.drift.param_count(), nw = model.weight_dim();
  AdamState adam;
  std::vector<double> trace;
  trace.reserve(cfg.iterations);
  const std::uint64_t stride = cfg.samples * problem.paths_per_sample;
  if (observe) observe(0, model);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto g = vi::elbo_gradient(problem, cfg.estimator, cfg.samples, cfg.seed, it * stride);
    Tensor params = model.drift.phi();
    Tensor grad = g.d_phi;
    if (cfg.train_w0) {
      const Tensor p[] = {params, model.w0};
      const Tensor d[] = {grad, g.d_w0};
      params = ad::concat(p);
      grad = ad::concat(d);
    }
    const bool ok = adam_step(params, grad, adam, cfg.lr);
    model.drift.set_phi(ad::slice(params, 0, Shape{np}));
    if (cfg.train_w0) model.w0 = ad::slice(params, np, Shape{nw});
    trace.push_back(g.elbo.value);
    if (sink) {
      sink({{"iteration", it + 1}, {"elbo", g.elbo.value}, {"loglik", g.elbo.loglik}, {"kl", g.elbo.kl},
            {"mart", g.elbo.mart}, {"skipped", !ok}});
    }
    if (observe) observe(it + 1, model);
  }
  return trace;
}

json latent_checkpoint_json(const SdeBnnModel& model, const json& config_echo) {
  if (model.hidden) throw ContractError("latent checkpoints hold models without hidden dynamics");
  std::vector<json> layers;
  for (const auto& l : model.drift.mlp().layers()) {
    layers.push_back({{"input_dim", l.input_dim}, {"output_dim", l.output_dim},
                      {"activation", nets::to_string(l.activation)}, {"time_conditioned", l.time_conditioned}});
  }
  return {{"format", "sdebnn-checkpoint"},
          {"version", kCheckpointVersion},
          {"kind", "latent"},
          {"sdebnn_version", SDEBNN_VERSION},
          {"endianness", "none"},
          {"sigma", model.prior.sigma},
          {"drift_layers", layers},
          {"params", {{"drift.phi", values(model.drift.phi())}, {"w0", values(model.w0)}}},
          {"config", config_echo}};
}

SdeBnnModel latent_from_checkpoint(const json& ckpt) {
  try {
    if (ckpt.at("format") != "sdebnn-checkpoint" || ckpt.value("kind", "") != "latent") {
      throw ConfigError("not a latent sdebnn checkpoint");
    }
    const int version = ckpt.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ConfigError("checkpoint version " + std::to_string(version) + ", this build reads version " +
                        std::to_string(kCheckpointVersion));
    }
    std::vector<nets::LayerSpec> layers;
    for (const auto& l : ckpt.at("drift_layers")) {
      layers.push_back({l.at("input_dim").get<std::size_t>(), l.at("output_dim").get<std::size_t>(),
                        nets::parse_activation(l.at("activation").get<std::string>()),
                        l.at("time_conditioned").get<bool>()});
    }
    if (layers.empty()) throw ConfigError("checkpoint has no drift layers");
    SdeBnnModel m;
    m.prior.sigma = ckpt.at("sigma").get<double>();
    const std::size_t d = layers.back().output_dim;
    const nets::Mlp mlp(std::move(layers));
    std::vector<std::size_t> hidden;
    for (std::size_t i = 0; i + 1 < mlp.layers().size(); ++i) hidden.push_back(mlp.layers()[i].output_dim);
    const auto act = mlp.layers().size() > 1 ? mlp.layers().front().activation : nets::Activation::tanh;
    m.drift = nets::PosteriorDriftNet(d, hidden, act);
    if (m.drift.mlp().param_count() != mlp.param_count()) throw ConfigError("unsupported drift layout");
    m.drift.set_phi(tensor_from(ckpt.at("params").at("drift.phi"), m.drift.param_count(), "drift.phi"));
    m.w0 = tensor_from(ckpt.at("params").at("w0"), d, "w0");
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace sdebnn::train
