#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "sdebnn/toys.hpp"
#include "sdebnn/train.hpp"
#include "test_models.hpp"

namespace sdebnn::train {
namespace {

using nlohmann::json;

TEST(Adam, FirstStepMatchesHandFormula) {
  Tensor p = Tensor::vector({1.0, -2.0});
  const Tensor g = Tensor::vector({0.5, -3.0});
  AdamState s;
  ASSERT_TRUE(adam_step(p, g, s, 1e-3));
  // m_hat = g, v_hat = g^2 after bias correction, so the step is -lr g / (|g| + eps).
  const double d0 = -1e-3 * 0.5 / (0.5 + 1e-8);
  const double d1 = -1e-3 * -3.0 / (3.0 + 1e-8);
  EXPECT_NEAR(p[0] - 1.0, d0, 1e-15);
  EXPECT_NEAR(p[1] + 2.0, d1, 1e-15);
  EXPECT_NEAR(p[0] - 1.0, -9.99998e-4, 1e-8);
  EXPECT_EQ(s.t, 1u);
  EXPECT_DOUBLE_EQ(s.m[0], 0.05);
  EXPECT_DOUBLE_EQ(s.v[0], 0.001 * 0.25);
}

TEST(Adam, ZeroGradientFromRestLeavesParameters) {
  Tensor p = Tensor::vector({0.3, 0.7});
  const Tensor before = p;
  AdamState s;
  ASSERT_TRUE(adam_step(p, Tensor::vector({0.0, 0.0}), s, 1e-3));
  EXPECT_EQ(p, before);
}

TEST(Adam, ZeroGradientDecaysMoments) {
  Tensor p = Tensor::vector({0.3});
  AdamState s{Tensor::vector({0.2}), Tensor::vector({0.04}), 3};
  ASSERT_TRUE(adam_step(p, Tensor::vector({0.0}), s, 1e-3));
  EXPECT_DOUBLE_EQ(s.m[0], 0.9 * 0.2);
  EXPECT_DOUBLE_EQ(s.v[0], 0.999 * 0.04);
  EXPECT_EQ(s.t, 4u);
}

TEST(Adam, NonFiniteGradientIsSkipped) {
  Tensor p = Tensor::vector({0.3, 0.1});
  const Tensor before = p;
  AdamState s;
  EXPECT_FALSE(adam_step(p, Tensor::vector({std::nan(""), 1.0}), s, 1e-3));
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.t, 0u);
  EXPECT_THROW((void)adam_step(p, Tensor::vector({1.0}), s, 1e-3), ContractError);
}

TEST(Adam, TwoStepsDescendQuadratic) {
  const Tensor c = Tensor::vector({1.0, -0.5, 2.0});
  auto loss = [&](const Tensor& x) { return 0.5 * std::pow((x - c).norm(), 2); };
  Tensor x = Tensor::vector({0.0, 0.0, 0.0});
  AdamState s;
  double prev = loss(x);
  for (int i = 0; i < 2; ++i) {
    ASSERT_TRUE(adam_step(x, x - c, s, 1e-2));
    const double now = loss(x);
    EXPECT_LT(now, prev);
    prev = now;
  }
}

data::Dataset small_toy(std::size_t n = 24) {
  auto ds = data::gen_toy1d(n, 0.1, 5);
  data::split_validation(ds, 0.25, 5);
  return ds;
}

ArchConfig small_arch() {
  ArchConfig a;
  a.hidden_width = 8;
  a.drift_hidden = {4};
  return a;
}

TrainConfig small_cfg() {
  TrainConfig c;
  c.batch_size = 8;
  c.epochs = 3;
  c.solver.steps = 4;
  c.eval_samples = 3;
  c.seed = 7;
  c.lr = 1e-2;
  return c;
}

TEST(Model, ShapesAndEmbedding) {
  const auto m = build_model(small_arch(), 1, 1, 3);
  EXPECT_EQ(m.state_dim(), 3u);
  EXPECT_EQ(m.sde.weight_dim(), (3 + 1) * 8 + 8 + (8 + 1) * 3 + 3);
  const auto h = m.embed(Tensor::matrix(2, 1, {0.5, -1.0}));
  EXPECT_EQ(h, Tensor::matrix(2, 3, {0.5, 0.0, 0.0, -1.0, 0.0, 0.0}));
  EXPECT_THROW((void)m.embed(Tensor::matrix(1, 2, {0.0, 0.0})), ContractError);
  EXPECT_EQ(m.sde.drift.phi().max_abs() > 0.0, true);
  auto flat = m.flat_params();
  auto copy = m;
  copy.set_flat_params(flat);
  EXPECT_EQ(copy.flat_params(), flat);
}

TEST(Fit, ZeroEpochsKeepsInitializationAndZeroKl) {
  const auto ds = small_toy();
  auto cfg = small_cfg();
  cfg.epochs = 0;
  const auto model = build_model(small_arch(), 1, 1, 3);
  auto state = init_state(model, cfg);
  std::size_t records = 0;
  fit(state, ds, cfg, [&](const json&) { ++records; });
  EXPECT_EQ(records, 0u);
  EXPECT_EQ(state.model.flat_params(), model.flat_params());
  const auto train = ds.subset(data::Split::train);
  const auto p = batch_problem(state.model, train, train.size(), cfg);
  for (auto e : vi::kAllEstimators) {
    const auto b = vi::elbo_estimate(p, e, 2, 1);
    EXPECT_EQ(b.kl, 0.0);
    EXPECT_EQ(b.mart, 0.0);
  }
}

std::vector<std::string> run_log(const TrainConfig& cfg, TrainState& state, const data::Dataset& ds) {
  std::vector<std::string> lines;
  fit(state, ds, cfg, [&](const json& j) { lines.push_back(j.dump()); });
  return lines;
}

TEST(Fit, MetricLogIsBitwiseReproducible) {
  const auto ds = small_toy();
  const auto cfg = small_cfg();
  auto a = init_state(build_model(small_arch(), 1, 1, 3), cfg);
  auto b = init_state(build_model(small_arch(), 1, 1, 3), cfg);
  const auto la = run_log(cfg, a, ds);
  const auto lb = run_log(cfg, b, ds);
  ASSERT_EQ(la.size(), 3u);
  EXPECT_EQ(la, lb);
  EXPECT_EQ(a.model.flat_params(), b.model.flat_params());

  const auto last = json::parse(la.back());
  for (const char* k : {"epoch", "elbo", "loglik", "kl", "mart", "eval"}) EXPECT_TRUE(last.contains(k)) << k;
  EXPECT_EQ(last["eval"]["split"], "val");
  EXPECT_EQ(last["step"], 3u * 3u);  // 18 train rows, batch 8 -> 3 steps; 3 epochs
}

TEST(Fit, WorkerCountDoesNotChangeResults) {
  const auto ds = small_toy();
  auto cfg = small_cfg();
  cfg.train_samples = 3;
  auto a = init_state(build_model(small_arch(), 1, 1, 3), cfg);
  const auto la = run_log(cfg, a, ds);
  cfg.workers = 3;
  auto b = init_state(build_model(small_arch(), 1, 1, 3), cfg);
  const auto lb = run_log(cfg, b, ds);
  EXPECT_EQ(la, lb);
}

TEST(Fit, ResumeFromCheckpointIsBitwiseIdentical) {
  const auto ds = small_toy();
  auto cfg = small_cfg();
  cfg.epochs = 4;
  cfg.eval_every = 1;
  auto straight = init_state(build_model(small_arch(), 1, 1, 3), cfg);
  const auto full = run_log(cfg, straight, ds);

  auto first = cfg;
  first.epochs = 2;
  auto part = init_state(build_model(small_arch(), 1, 1, 3), first);
  (void)run_log(first, part, ds);
  const auto path = std::filesystem::temp_directory_path() / "sdebnn_resume_test.json";
  save_checkpoint(path, part, {{"note", "test"}});
  auto resumed = state_from_checkpoint(load_checkpoint_json(path));
  std::filesystem::remove(path);
  EXPECT_EQ(resumed.model.flat_params(), part.model.flat_params());
  EXPECT_EQ(resumed.adam.m, part.adam.m);
  EXPECT_EQ(resumed.adam.v, part.adam.v);
  const auto rest = run_log(cfg, resumed, ds);
  ASSERT_EQ(rest.size(), 2u);
  EXPECT_EQ(rest[0], full[2]);
  EXPECT_EQ(rest[1], full[3]);
  EXPECT_EQ(resumed.model.flat_params(), straight.model.flat_params());
}

TEST(Checkpoint, RejectsOtherVersions) {
  const auto cfg = small_cfg();
  const auto state = init_state(build_model(small_arch(), 1, 1, 3), cfg);
  auto j = checkpoint_json(state, json::object());
  EXPECT_EQ(j["version"], kCheckpointVersion);
  EXPECT_TRUE(j["params"].contains("drift.phi"));
  j["version"] = kCheckpointVersion + 1;
  EXPECT_THROW((void)state_from_checkpoint(j), ConfigError);
  j.erase("params");
  j["version"] = kCheckpointVersion;
  EXPECT_THROW((void)state_from_checkpoint(j), ConfigError);
}

TEST(Fit, DivergenceHalvesLearningRateThenAborts) {
  const auto ds = small_toy();
  auto cfg = small_cfg();
  auto model = build_model(small_arch(), 1, 1, 3);
  model.sde.w0 = Tensor(model.sde.w0.shape(), 1e300);
  auto state = init_state(model, cfg);
  std::vector<double> lrs;
  try {
    fit(state, ds, cfg, [&](const json& j) {
      ASSERT_EQ(j["event"], "divergence");
      lrs.push_back(j["lr"].get<double>());
    });
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("3 learning-rate halvings"), std::string::npos) << e.what();
  }
  EXPECT_EQ(lrs, (std::vector<double>{5e-3, 2.5e-3, 1.25e-3}));
  EXPECT_EQ(state.epoch, 0u);
}

TEST(Fit, ShortRunImprovesElbo) {
  auto ds = data::gen_toy1d(40, 0.1, 2);
  auto cfg = small_cfg();
  cfg.epochs = 60;
  cfg.batch_size = 40;
  cfg.lr = 1e-2;
  auto state = init_state(build_model(small_arch(), 1, 1, 3), cfg);
  std::vector<double> elbo;
  fit(state, ds, cfg, [&](const json& j) { elbo.push_back(j["elbo"].get<double>()); });
  ASSERT_EQ(elbo.size(), 60u);
  EXPECT_GT(elbo.back(), elbo.front());
}

TEST(Evaluate, RegressionMetricsAgainstExactPredictions) {
  // sigma = 0 and zero readout bias: every posterior sample predicts the same value.
  auto arch = small_arch();
  arch.sigma = 0.0;
  arch.likelihood_scale = 0.2;
  const auto m = build_model(arch, 1, 1, 4);
  data::Dataset ds;
  ds.inputs = Tensor::matrix(3, 1, {-1.0, 0.0, 2.0});
  const auto preds = sample_outputs(m, ds.inputs, 2, 1, SolverConfig{});
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_EQ(preds[0], preds[1]);
  ds.targets = preds[0];
  ds.split.assign(3, data::Split::test);
  const auto r = evaluate(m, ds, 4, 1, SolverConfig{});
  EXPECT_EQ(r["n"], 3u);
  EXPECT_EQ(r["mse"].get<double>(), 0.0);
  EXPECT_EQ(r["coverage_95"].get<double>(), 1.0);
  EXPECT_NEAR(r["nll"].get<double>(), std::log(0.2) + 0.5 * std::log(2.0 * std::numbers::pi), 1e-12);

  // Shift one target by 3 scales: outside the central 95% band.
  ds.targets[1] += 0.6;
  const auto shifted = evaluate(m, ds, 4, 1, SolverConfig{});
  EXPECT_NEAR(shifted["coverage_95"].get<double>(), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(shifted["mse"].get<double>(), 0.36 / 3.0, 1e-12);
}

TEST(Evaluate, ClassificationReportsCalibration) {
  auto ds = data::gen_two_moons(40, 0.1, 1);
  auto arch = small_arch();
  arch.likelihood = lik::Likelihood::Kind::categorical;
  const auto m = build_model(arch, 2, 2, 4);
  const auto r = evaluate(m, ds, 3, 1, SolverConfig{});
  for (const char* k : {"accuracy", "nll", "ece", "brier", "bins", "n"}) EXPECT_TRUE(r.contains(k)) << k;
  EXPECT_EQ(r["bins"].size(), lik::kCalibrationBins);
}

TEST(Evaluate, SamplesIndependentOfWorkers) {
  const auto m = build_model(small_arch(), 1, 1, 4);
  const Tensor x = Tensor::matrix(4, 1, {-2.0, -0.5, 0.5, 2.0});
  SolverConfig s;
  s.steps = 5;
  EXPECT_EQ(sample_outputs(m, x, 5, 9, s, 1), sample_outputs(m, x, 5, 9, s, 4));
  const auto a = sample_outputs(m, x, 2, 9, s);
  EXPECT_FALSE(a[0] == a[1]);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.solver.mode = SolverConfig::Mode::adaptive;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Arch, JsonRoundTrip) {
  ArchConfig a;
  a.augment = 0;
  a.drift_hidden = {3, 5};
  a.likelihood = lik::Likelihood::Kind::cauchy;
  const auto b = arch_from_json(to_json(a));
  EXPECT_EQ(to_json(b), to_json(a));
}

TEST(FitLatent, ConjugateToyElboRises) {
  const double sigma = 0.5;
  auto m = testing::latent_model(1, sigma, 0.2);
  vi::ElboProblem p;
  p.paths_per_sample = 16;
  p.solver.steps = 8;
  p.terminal_only = false;
  p.loglik = toys::conjugate_potential_loglik(-0.8, 0.3, sigma);
  LatentFitConfig cfg;
  cfg.iterations = 150;
  cfg.lr = 5e-2;
  const auto trace = fit_latent(m, p, cfg);
  ASSERT_EQ(trace.size(), 150u);
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    head += trace[i];
    tail += trace[trace.size() - 1 - i];
  }
  EXPECT_GT(tail, head);
  EXPECT_NEAR(m.drift.phi()[0], -0.8, 0.3);
  EXPECT_NEAR(m.drift.phi()[2], 0.3, 0.3);
}

}  // namespace
}  // namespace sdebnn::train
