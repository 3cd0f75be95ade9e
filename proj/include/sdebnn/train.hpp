#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdebnn/data.hpp"
#include "sdebnn/likelihood.hpp"
#include "sdebnn/variational.hpp"

namespace sdebnn::train {

using ad::Shape;
using ad::Tensor;

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m;
  Tensor v;
  std::uint64_t t = 0;
};

/// Bias-corrected Adam update in place. A non-finite gradient leaves params
/// and moments untouched and returns false (a skipped step).
bool adam_step(Tensor& params, const Tensor& grad, AdamState& state, double lr, const AdamHyper& hyper = {});

/// Architecture of a supervised SDE-BNN: h0 = [x, 0 (augment dims)],
/// dh = f_h(t, h, w) dt, output = linear readout of h1.
struct ArchConfig {
  std::size_t augment = 2;
  std::size_t hidden_width = 32;
  nets::Activation activation = nets::Activation::swish;
  std::vector<std::size_t> drift_hidden{32};
  nets::Activation drift_activation = nets::Activation::tanh;
  double sigma = 0.2;
  lik::Likelihood::Kind likelihood = lik::Likelihood::Kind::gaussian;
  double likelihood_scale = 0.1;  ///< gaussian / cauchy observation scale
};

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 40;
  std::size_t epochs = 800;
  vi::Estimator estimator = vi::Estimator::standard;
  SolverConfig solver;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;  ///< 0: evaluate after the last epoch only
  double kl_scale = 1.0;
  std::size_t train_samples = 1;  ///< MC weight paths per gradient step
  std::size_t eval_samples = 20;  ///< posterior samples for evaluation
  vi::GradientMethod gradient = vi::GradientMethod::backprop;
  int workers = 1;
  int max_lr_halvings = 3;

  void validate() const;
};

struct SupervisedModel {
  ArchConfig arch;
  SdeBnnModel sde;
  nets::Mlp readout;
  Tensor readout_params;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;  ///< classes for categorical, target columns otherwise

  lik::Likelihood likelihood() const;
  std::size_t state_dim() const { return input_dim + arch.augment; }
  /// [N x input_dim] -> [N x state_dim], augmented columns zero.
  Tensor embed(const Tensor& x) const;

  /// phi, w0 and readout concatenated (the optimiser's view).
  Tensor flat_params() const;
  void set_flat_params(const Tensor& flat);
};

SupervisedModel build_model(const ArchConfig& arch, std::size_t input_dim, std::size_t output_dim,
                            std::uint64_t seed);

/// Readout of h1 for every input row, one tensor [N x output_dim] per
/// posterior sample. Sample s uses Brownian path (seed, first_path_id + s).
std::vector<Tensor> sample_outputs(const SupervisedModel& model, const Tensor& x, std::size_t n_samples,
                                   std::uint64_t seed, const SolverConfig& solver, int workers = 1,
                                   std::uint64_t first_path_id = 0);

/// Regression: {n, mse, nll, coverage_95}; classification: the calibration
/// report plus n. Predictive = average over posterior samples (probabilities
/// for classification, Gaussian/Cauchy mixture for regression).
nlohmann::json evaluate(const SupervisedModel& model, const data::Dataset& ds, std::size_t n_samples,
                        std::uint64_t seed, const SolverConfig& solver, int workers = 1);

/// The ELBO problem of one minibatch.
vi::ElboProblem batch_problem(const SupervisedModel& model, const data::Dataset& batch, std::size_t n_train,
                              const TrainConfig& cfg);

struct TrainState {
  SupervisedModel model;
  AdamState adam;
  std::size_t epoch = 0;  ///< epochs completed
  std::uint64_t step = 0; ///< gradient steps completed
  double lr = 0.0;
  int lr_halvings = 0;
  std::uint64_t skipped_steps = 0;
};

TrainState init_state(SupervisedModel model, const TrainConfig& cfg);

using MetricSink = std::function<void(const nlohmann::json&)>;

/// Thrown after max_lr_halvings rollbacks when training keeps diverging.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trains on the train split, evaluating on the val split, until
/// state.epoch == cfg.epochs. One JSON record per epoch goes to `sink`:
/// {epoch, step, elbo, loglik, kl, mart, lr, skipped_steps[, eval]}.
/// Shuffling and noise are pure functions of (seed, epoch, step), so a run
/// resumed from a checkpoint continues bitwise identically.
void fit(TrainState& state, const data::Dataset& ds, const TrainConfig& cfg, const MetricSink& sink = {});

inline constexpr int kCheckpointVersion = 1;

/// Self-describing JSON container: version tag, parameters keyed by module
/// path, Adam moments, counters, and the caller's config echo.
nlohmann::json checkpoint_json(const TrainState& state, const nlohmann::json& config_echo);
TrainState state_from_checkpoint(const nlohmann::json& ckpt);
void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const nlohmann::json& config_echo);
nlohmann::json load_checkpoint_json(const std::filesystem::path& path);

nlohmann::json to_json(const ArchConfig& a);
ArchConfig arch_from_json(const nlohmann::json& j);

// ---- latent toys -----------------------------------------------------------

struct LatentFitConfig {
  std::size_t iterations = 500;
  double lr = 1e-2;
  vi::Estimator estimator = vi::Estimator::stl;
  std::size_t samples = 1;  ///< MC samples per step (each with paths_per_sample rows)
  std::uint64_t seed = 0;
  bool train_w0 = false;
};

/// Called with the number of completed iterations and the current model,
/// before the first step and after every step.
using LatentObserver = std::function<void(std::size_t, const SdeBnnModel&)>;

/// Adam on phi (and optionally w0) of `model` for the latent-SDE problem.
/// problem.model is rebound to `model`. Returns the per-iteration ELBO.
std::vector<double> fit_latent(SdeBnnModel& model, vi::ElboProblem problem, const LatentFitConfig& cfg,
                               const MetricSink& sink = {}, const LatentObserver& observe = {});

/// Versioned JSON container for a latent model (drift net, w0, prior).
nlohmann::json latent_checkpoint_json(const SdeBnnModel& model, const nlohmann::json& config_echo);
SdeBnnModel latent_from_checkpoint(const nlohmann::json& ckpt);

}  // namespace sdebnn::train
