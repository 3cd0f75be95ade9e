#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sdebnn/autodiff.hpp"
#include "sdebnn/brownian.hpp"
#include "sdebnn/model.hpp"

namespace sdebnn {

using ad::Var;

/// (w, h, KL accumulator, martingale accumulator) integrated by one solver call.
/// w is [samples x weight_dim] (one row per independent weight path),
/// h is [batch x state_dim] or empty for models without hidden dynamics,
/// kl and mart are scalars.
template <class X>
struct AugmentedState {
  X w;
  X h;
  X kl;
  X mart;
};

struct SolverConfig {
  enum class Mode { fixed, adaptive };

  Mode mode = Mode::fixed;
  int steps = 20;          ///< fixed mode: number of equal steps over [0, 1]
  double rtol = 1e-3;      ///< adaptive mode
  double atol = 1e-4;      ///< adaptive mode
  int initial_depth = 2;   ///< adaptive mode: first step is 2^-initial_depth
  int max_steps = 100000;  ///< adaptive mode: attempted-step budget

  static constexpr int kMaxAdaptiveDepth = 12;

  void validate() const;
};

/// How the martingale increment <u, dB> is differentiated.
enum class MartingaleMode {
  full,         ///< gradients flow through phi and w
  blocked_phi,  ///< phi enters u as a constant; w still carries gradients
};

/// Drift-net parameters lifted into the value domain X once per solve.
template <class X>
struct BoundModel {
  const SdeBnnModel* model = nullptr;
  std::vector<nets::LayerParams<X>> drift;
  std::vector<nets::LayerParams<X>> drift_blocked;  ///< empty unless MartingaleMode::blocked_phi
};

BoundModel<Tensor> bind_values(const SdeBnnModel& model);

/// One Ito Euler-Maruyama step of the augmented system. `noise` is the
/// Brownian increment over [t, t + dt], shaped like w. The KL and martingale
/// integrands are evaluated at the left endpoint.
template <class X>
AugmentedState<X> em_step(const AugmentedState<X>& s, double t, double dt, const Tensor& noise,
                          const BoundModel<X>& bound, MartingaleMode mode = MartingaleMode::full) {
  const SdeBnnModel& model = *bound.model;
  const double sigma = model.prior.sigma;
  if (!(dt > 0.0)) throw DomainError("em_step needs dt > 0");
  if (ad::value_of(s.w).shape() != noise.shape()) {
    throw ContractError("noise shape " + ad::shape_str(noise.shape()) + " does not match weights " +
                        ad::shape_str(ad::value_of(s.w).shape()));
  }

  const X nn = model.drift.eval(bound.drift, t, s.w);
  const X f_q = nn + nets::prior_drift(s.w);

  AugmentedState<X> out;
  out.w = s.w + f_q * dt + ad::lift(s.w, noise * sigma);
  if (model.hidden) {
    const X w_flat = reshape(s.w, ad::Shape{model.weight_dim()});
    out.h = s.h + model.hidden->eval(t, s.h, w_flat) * dt;
  } else {
    out.h = s.h;
  }
  if (sigma > 0.0) {
    const X u = nn * (1.0 / sigma);
    out.kl = s.kl + sum(square(u)) * (0.5 * dt);
    if (mode == MartingaleMode::blocked_phi && !bound.drift_blocked.empty()) {
      const X u_blocked = model.drift.eval(bound.drift_blocked, t, s.w) * (1.0 / sigma);
      out.mart = s.mart + dot(u_blocked, noise);
    } else {
      out.mart = s.mart + dot(u, noise);
    }
  } else {
    out.kl = s.kl;
    out.mart = s.mart;
  }

  const Tensor& w = ad::value_of(out.w);
  const Tensor& h = ad::value_of(out.h);
  if (!w.all_finite() || !h.all_finite() || !ad::value_of(out.kl).all_finite() ||
      !ad::value_of(out.mart).all_finite()) {
    const double n = w.norm() * w.norm() + h.norm() * h.norm();
    throw DivergenceError(t, std::sqrt(n));
  }
  return out;
}

struct Trajectory {
  std::vector<double> times;                     ///< accepted grid, times[0] = 0, back() = 1
  std::vector<AugmentedState<Tensor>> states;    ///< aligned with times when retained
  AugmentedState<Tensor> final;
  std::size_t attempted_steps = 0;
  std::size_t drift_evaluations = 0;
};

/// Initial augmented state: every path row starts at w0, accumulators at 0.
AugmentedState<Tensor> initial_state(const SdeBnnModel& model, const Tensor& h0, std::size_t paths);

/// Uniform grid 0, 1/n, ..., 1.
std::vector<double> fixed_grid(int steps);

/// Brownian increments over [t0, t1], one row per path.
Tensor stacked_increment(std::span<const BrownianPath> paths, double t0, double t1);

/// Integrates the augmented SDE over [0, 1]. One weight path per BrownianPath;
/// models with hidden dynamics take exactly one path.
Trajectory solve(const SdeBnnModel& model, const Tensor& h0, std::span<const BrownianPath> paths,
                 const SolverConfig& cfg, bool retain_states = false);

struct TapedTrajectory {
  std::vector<double> times;
  std::vector<AugmentedState<Var>> states;
};

using TrajectoryLoss =
    std::function<Var(ad::Tape&, const TapedTrajectory&, std::span<const Var> extras)>;
using TerminalLoss =
    std::function<Var(ad::Tape&, const AugmentedState<Var>& final, std::span<const Var> extras)>;

struct GradientResult {
  double loss = 0.0;
  Tensor d_phi;
  Tensor d_w0;
  std::vector<Tensor> d_extras;  ///< aligned with the `extras` argument
  AugmentedState<Tensor> final;
  /// Peak number of full augmented states held at once.
  std::size_t peak_retained_states = 0;
  /// Backward steps where the inverse Euler map did not converge and the
  /// state was recomputed forward from t = 0 instead.
  std::size_t replayed_steps = 0;
};

/// Discretize-then-differentiate: tapes the whole unrolled fixed-step solve.
GradientResult grad_backprop_path(const TrajectoryLoss& loss, const SdeBnnModel& model, const Tensor& h0,
                                  std::span<const BrownianPath> paths, const SolverConfig& cfg,
                                  std::span<const Tensor> extras = {},
                                  MartingaleMode mode = MartingaleMode::full);

GradientResult grad_backprop(const TerminalLoss& loss, const SdeBnnModel& model, const Tensor& h0,
                             std::span<const BrownianPath> paths, const SolverConfig& cfg,
                             std::span<const Tensor> extras = {}, MartingaleMode mode = MartingaleMode::full);

/// Adjoint sweep: after a forward solve that keeps only the current state,
/// walks the grid backwards, reconstructing each earlier state by inverting
/// the Euler step against the replayed Brownian increment, and pulls the
/// adjoint through a one-step local tape. Same discretization as
/// grad_backprop, so the two agree to rounding.
GradientResult grad_adjoint(const TerminalLoss& loss, const SdeBnnModel& model, const Tensor& h0,
                            std::span<const BrownianPath> paths, const SolverConfig& cfg,
                            std::span<const Tensor> extras = {}, MartingaleMode mode = MartingaleMode::full);

}  // namespace sdebnn
