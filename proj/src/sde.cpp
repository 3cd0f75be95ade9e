#include "sdebnn/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdebnn {

using ad::Shape;
using ad::Tape;

void SolverConfig::validate() const {
  if (mode == Mode::fixed && steps <= 0) throw ConfigError("solver steps must be positive");
  if (mode == Mode::adaptive) {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("solver tolerances must be positive");
    if (initial_depth < 0 || initial_depth > kMaxAdaptiveDepth) {
      throw ConfigError("adaptive initial depth must lie in [0, 12]");
    }
  }
  if (max_steps <= 0) throw ConfigError("max_steps must be positive");
}

BoundModel<Tensor> bind_values(const SdeBnnModel& model) {
  return {&model, model.drift.bind(model.drift.phi()), {}};
}

AugmentedState<Tensor> initial_state(const SdeBnnModel& model, const Tensor& h0, std::size_t paths) {
  model.validate();
  if (paths == 0) throw ContractError("solve needs at least one Brownian path");
  if (model.hidden) {
    if (paths != 1) throw ContractError("models with hidden dynamics integrate one weight path per solve");
    if (h0.rank() != 2 || h0.shape()[1] != model.hidden->state_dim()) {
      throw ContractError("h0 of shape " + ad::shape_str(h0.shape()) + ", expected [batch x " +
                          std::to_string(model.hidden->state_dim()) + "]");
    }
    if (!h0.all_finite()) throw ContractError("h0 contains non-finite values");
  }
  return {ad::repeat_rows(model.w0, paths), model.hidden ? h0 : Tensor(Shape{0}), Tensor::scalar(0.0),
          Tensor::scalar(0.0)};
}

std::vector<double> fixed_grid(int steps) {
  std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / steps;
  return grid;
}

Tensor stacked_increment(std::span<const BrownianPath> paths, double t0, double t1) {
  const std::size_t d = paths.front().dimension();
  Tensor out(Shape{paths.size(), d});
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto inc = paths[p].increment(t0, t1);
    std::copy(inc.begin(), inc.end(), out.data() + p * d);
  }
  return out;
}

namespace {

void check_paths(const SdeBnnModel& model, std::span<const BrownianPath> paths) {
  for (const auto& p : paths) {
    if (p.dimension() != model.weight_dim()) {
      throw ContractError("Brownian dimension " + std::to_string(p.dimension()) + " does not match weight dim " +
                          std::to_string(model.weight_dim()));
    }
  }
}

/// Increments for every grid step, stacked per path: result[i] is [paths x d].
std::vector<Tensor> grid_noise(std::span<const BrownianPath> paths, std::span<const double> grid) {
  const std::size_t d = paths.front().dimension();
  const std::size_t n = grid.size() - 1;
  std::vector<Tensor> noise(n, Tensor(Shape{paths.size(), d}));
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto inc = paths[p].increments(grid);
    for (std::size_t i = 0; i < n; ++i) std::copy(inc[i].begin(), inc[i].end(), noise[i].data() + p * d);
  }
  return noise;
}

double scaled_error(const Tensor& a, const Tensor& b, double rtol, double atol) {
  double err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double tol = atol + rtol * std::max(std::abs(a[i]), std::abs(b[i]));
    err = std::max(err, std::abs(a[i] - b[i]) / tol);
  }
  return err;
}

Trajectory solve_fixed(const SdeBnnModel& model, const Tensor& h0, std::span<const BrownianPath> paths,
                       const SolverConfig& cfg, bool retain) {
  const auto bound = bind_values(model);
  Trajectory traj;
  traj.times = fixed_grid(cfg.steps);
  const auto noise = grid_noise(paths, traj.times);
  auto state = initial_state(model, h0, paths.size());
  if (retain) traj.states.push_back(state);
  for (int i = 0; i < cfg.steps; ++i) {
    const double t = traj.times[static_cast<std::size_t>(i)];
    const double dt = traj.times[static_cast<std::size_t>(i) + 1] - t;
    state = em_step(state, t, dt, noise[static_cast<std::size_t>(i)], bound);
    if (retain) traj.states.push_back(state);
  }
  traj.attempted_steps = static_cast<std::size_t>(cfg.steps);
  traj.drift_evaluations = traj.attempted_steps;
  traj.final = std::move(state);
  return traj;
}

// Step-doubling control on the dyadic grid: a full step is compared with two
// half steps that consume the bridge-subdivided increments. Step sizes are
// always powers of two so every query time is a node of the Brownian tree.
Trajectory solve_adaptive(const SdeBnnModel& model, const Tensor& h0, std::span<const BrownianPath> paths,
                          const SolverConfig& cfg, bool retain) {
  const auto bound = bind_values(model);
  Trajectory traj;
  auto state = initial_state(model, h0, paths.size());
  traj.times.push_back(0.0);
  if (retain) traj.states.push_back(state);

  int depth = cfg.initial_depth;
  double t = 0.0;
  while (t < 1.0) {
    const double dt = std::ldexp(1.0, -depth);
    const double half = 0.5 * dt;
    if (traj.attempted_steps >= static_cast<std::size_t>(cfg.max_steps)) {
      throw BudgetExceeded("adaptive solver exceeded " + std::to_string(cfg.max_steps) + " steps at t=" +
                           std::to_string(t));
    }
    ++traj.attempted_steps;
    traj.drift_evaluations += 3;

    const Tensor noise_a = stacked_increment(paths, t, t + half);
    const Tensor noise_b = stacked_increment(paths, t + half, t + dt);
    const auto full = em_step(state, t, dt, noise_a + noise_b, bound);
    const auto mid = em_step(state, t, half, noise_a, bound);
    auto fine = em_step(mid, t + half, half, noise_b, bound);

    double err = scaled_error(ad::value_of(full.w), fine.w, cfg.rtol, cfg.atol);
    err = std::max(err, scaled_error(full.h, fine.h, cfg.rtol, cfg.atol));

    if (err <= 1.0 || depth >= SolverConfig::kMaxAdaptiveDepth) {
      state = std::move(fine);
      t += dt;
      traj.times.push_back(t);
      if (retain) traj.states.push_back(state);
      const double factor = err > 0.0 ? std::clamp(0.9 / err, 0.2, 5.0) : 5.0;
      const bool aligned = std::fmod(t, 2.0 * dt) == 0.0;
      if (factor >= 2.0 && depth > 0 && aligned) {
        --depth;
      } else if (factor < 1.0 && depth < SolverConfig::kMaxAdaptiveDepth) {
        ++depth;
      }
    } else {
      ++depth;
    }
  }
  traj.final = std::move(state);
  return traj;
}

}  // namespace

Trajectory solve(const SdeBnnModel& model, const Tensor& h0, std::span<const BrownianPath> paths,
                 const SolverConfig& cfg, bool retain_states) {
  cfg.validate();
  model.validate();
  if (paths.empty()) throw ContractError("solve needs at least one Brownian path");
  check_paths(model, paths);
  return cfg.mode == SolverConfig::Mode::fixed ? solve_fixed(model, h0, paths, cfg, retain_states)
                                               : solve_adaptive(model, h0, paths, cfg, retain_states);
}

namespace {

void require_fixed(const SolverConfig& cfg) {
  cfg.validate();
  if (cfg.mode != SolverConfig::Mode::fixed) throw ContractError("gradient paths require a fixed-step solver");
}

std::vector<Var> leaves(Tape& tape, std::span<const Tensor> extras) {
  std::vector<Var> out;
  out.reserve(extras.size());
  for (const auto& e : extras) out.push_back(tape.variable(e));
  return out;
}

AugmentedState<Tensor> values_of(const AugmentedState<Var>& s) {
  return {s.w.value(), s.h.value(), s.kl.value(), s.mart.value()};
}

}  // namespace

GradientResult grad_backprop_path(const TrajectoryLoss& loss, const SdeBnnModel& model, const Tensor& h0,
                                  std::span<const BrownianPath> paths, const SolverConfig& cfg,
                                  std::span<const Tensor> extras, MartingaleMode mode) {
  require_fixed(cfg);
  model.validate();
  if (paths.empty()) throw ContractError("gradient needs at least one Brownian path");
  check_paths(model, paths);
  const auto init = initial_state(model, h0, paths.size());

  Tape tape;
  const Var phi = tape.variable(model.drift.phi());
  const Var w0 = tape.variable(model.w0);
  const auto extra_vars = leaves(tape, extras);

  BoundModel<Var> bound{&model, model.drift.bind(phi), {}};
  if (mode == MartingaleMode::blocked_phi) bound.drift_blocked = model.drift.bind(ad::stop_gradient(phi));

  TapedTrajectory traj;
  traj.times = fixed_grid(cfg.steps);
  const auto noise = grid_noise(paths, traj.times);
  AugmentedState<Var> state{repeat_rows(w0, paths.size()), tape.constant(init.h), tape.constant(init.kl),
                            tape.constant(init.mart)};
  traj.states.push_back(state);
  for (int i = 0; i < cfg.steps; ++i) {
    const auto k = static_cast<std::size_t>(i);
    state = em_step(state, traj.times[k], traj.times[k + 1] - traj.times[k], noise[k], bound, mode);
    traj.states.push_back(state);
  }

  const Var root = loss(tape, traj, extra_vars);
  std::vector<Var> wrt{phi, w0};
  wrt.insert(wrt.end(), extra_vars.begin(), extra_vars.end());
  const auto grads = tape.backward(root, wrt);

  GradientResult out;
  out.loss = root.value().item();
  out.d_phi = grads[phi];
  out.d_w0 = grads[w0];
  for (const auto& v : extra_vars) out.d_extras.push_back(grads[v]);
  out.final = values_of(state);
  out.peak_retained_states = traj.states.size();
  return out;
}

GradientResult grad_backprop(const TerminalLoss& loss, const SdeBnnModel& model, const Tensor& h0,
                             std::span<const BrownianPath> paths, const SolverConfig& cfg,
                             std::span<const Tensor> extras, MartingaleMode mode) {
  const TrajectoryLoss wrapped = [&loss](Tape& tape, const TapedTrajectory& traj, std::span<const Var> ex) {
    return loss(tape, traj.states.back(), ex);
  };
  return grad_backprop_path(wrapped, model, h0, paths, cfg, extras, mode);
}

namespace {

constexpr int kInverseIterations = 200;

/// Solves w = target - (NN(w, t) - w) * dt for w by fixed-point iteration,
/// where target = w_next - sigma * noise. Returns false if the iteration does
/// not settle to rounding level.
bool invert_weight_step(const SdeBnnModel& model, const BoundModel<Tensor>& bound, double t, double dt,
                        const Tensor& w_next, const Tensor& noise, Tensor& w) {
  const Tensor target = w_next - noise * model.prior.sigma;
  w = target;
  for (int it = 0; it < kInverseIterations; ++it) {
    const Tensor f_q = model.drift.eval(bound.drift, t, w) + nets::prior_drift(w);
    Tensor next = target - f_q * dt;
    if (!next.all_finite()) return false;
    const double change = (next - w).max_abs();
    w = std::move(next);
    if (change <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + w.max_abs())) return true;
  }
  return false;
}

bool invert_hidden_step(const SdeBnnModel& model, double t, double dt, const Tensor& w_prev,
                        const Tensor& h_next, Tensor& h) {
  const Tensor w_flat = ad::reshape(w_prev, Shape{model.weight_dim()});
  h = h_next;
  for (int it = 0; it < kInverseIterations; ++it) {
    Tensor next = h_next - model.hidden->eval(t, h, w_flat) * dt;
    if (!next.all_finite()) return false;
    const double change = (next - h).max_abs();
    h = std::move(next);
    if (change <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + h.max_abs())) return true;
  }
  return false;
}

}  // namespace

GradientResult grad_adjoint(const TerminalLoss& loss, const SdeBnnModel& model, const Tensor& h0,
                            std::span<const BrownianPath> paths, const SolverConfig& cfg,
                            std::span<const Tensor> extras, MartingaleMode mode) {
  require_fixed(cfg);
  model.validate();
  if (paths.empty()) throw ContractError("gradient needs at least one Brownian path");
  check_paths(model, paths);

  const auto bound = bind_values(model);
  const auto grid = fixed_grid(cfg.steps);
  const auto n = static_cast<std::size_t>(cfg.steps);
  std::size_t live_states = 0;
  std::size_t peak_states = 0;
  auto hold = [&](int delta) {
    live_states = static_cast<std::size_t>(static_cast<long>(live_states) + delta);
    peak_states = std::max(peak_states, live_states);
  };

  // Forward: only the running state is kept; increments are re-queried.
  auto state = initial_state(model, h0, paths.size());
  hold(+1);
  for (std::size_t i = 0; i < n; ++i) {
    state = em_step(state, grid[i], grid[i + 1] - grid[i], stacked_increment(paths, grid[i], grid[i + 1]), bound);
  }

  GradientResult out;
  out.final = state;

  // Terminal adjoints.
  Tensor a_w, a_h;
  double a_kl = 0.0, a_mart = 0.0;
  {
    Tape tape;
    AugmentedState<Var> fin{tape.variable(state.w), tape.variable(state.h), tape.variable(state.kl),
                            tape.variable(state.mart)};
    const auto extra_vars = leaves(tape, extras);
    const Var root = loss(tape, fin, extra_vars);
    std::vector<Var> wrt{fin.w, fin.h, fin.kl, fin.mart};
    wrt.insert(wrt.end(), extra_vars.begin(), extra_vars.end());
    const auto g = tape.backward(root, wrt);
    out.loss = root.value().item();
    a_w = g[fin.w];
    a_h = g[fin.h];
    a_kl = g[fin.kl].item();
    a_mart = g[fin.mart].item();
    for (const auto& v : extra_vars) out.d_extras.push_back(g[v]);
  }

  Tensor d_phi(Shape{model.drift.param_count()});
  Tensor w_next = state.w;
  Tensor h_next = state.h;
  for (std::size_t k = n; k-- > 0;) {
    const double t = grid[k];
    const double dt = grid[k + 1] - t;
    const Tensor noise = stacked_increment(paths, t, grid[k + 1]);

    Tensor w_prev, h_prev;
    bool ok = invert_weight_step(model, bound, t, dt, w_next, noise, w_prev);
    if (ok && model.hidden) ok = invert_hidden_step(model, t, dt, w_prev, h_next, h_prev);
    if (!model.hidden) h_prev = h_next;
    if (!ok) {
      // Recompute state k forward from t = 0; still one extra state in memory.
      hold(+1);
      auto replay = initial_state(model, h0, paths.size());
      for (std::size_t i = 0; i < k; ++i) {
        replay = em_step(replay, grid[i], grid[i + 1] - grid[i], stacked_increment(paths, grid[i], grid[i + 1]),
                         bound);
      }
      w_prev = std::move(replay.w);
      h_prev = std::move(replay.h);
      hold(-1);
      ++out.replayed_steps;
    }

    Tape tape;
    const Var phi = tape.variable(model.drift.phi());
    BoundModel<Var> local{&model, model.drift.bind(phi), {}};
    if (mode == MartingaleMode::blocked_phi) local.drift_blocked = model.drift.bind(ad::stop_gradient(phi));
    AugmentedState<Var> s{tape.variable(w_prev), tape.variable(h_prev), tape.constant(Tensor::scalar(0.0)),
                          tape.constant(Tensor::scalar(0.0))};
    const auto next = em_step(s, t, dt, noise, local, mode);
    Var root = dot(next.w, a_w) + next.kl * a_kl + next.mart * a_mart;
    if (model.hidden) root = root + dot(next.h, a_h);
    const Var wrt[] = {s.w, s.h, phi};
    const auto g = tape.backward(root, wrt);
    a_w = g[s.w];
    if (model.hidden) a_h = g[s.h];
    d_phi += g[phi];

    w_next = std::move(w_prev);
    h_next = std::move(h_prev);
  }

  // w0 is shared by every path row.
  const std::size_t d = model.weight_dim();
  Tensor d_w0(Shape{d});
  for (std::size_t p = 0; p < paths.size(); ++p)
    for (std::size_t j = 0; j < d; ++j) d_w0[j] += a_w[p * d + j];
  out.d_phi = std::move(d_phi);
  out.d_w0 = std::move(d_w0);
  out.peak_retained_states = peak_states;
  return out;
}

}  // namespace sdebnn
