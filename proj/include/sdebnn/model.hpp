#pragma once

#include <cmath>
#include <optional>

#include "sdebnn/nets.hpp"

namespace sdebnn {

using ad::Tensor;

/// Ornstein-Uhlenbeck weight prior: f_p(w, t) = -w, g(w, t) = sigma * I.
/// sigma == 0 is the ODE ablation: deterministic weights, no KL.
struct PriorSpec {
  double sigma = 0.1;

  bool ode_ablation() const noexcept { return sigma == 0.0; }
  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("prior sigma must be >= 0");
  }
};

/// Everything needed to integrate the augmented weight/hidden-state SDE.
/// Without hidden dynamics the model is a plain latent SDE over w.
struct SdeBnnModel {
  PriorSpec prior;
  nets::PosteriorDriftNet drift;
  std::optional<nets::HiddenDynamics> hidden;
  Tensor w0;  ///< initial weights [weight_dim]

  std::size_t weight_dim() const { return drift.weight_dim(); }

  void validate() const {
    prior.validate();
    if (w0.size() != weight_dim()) {
      throw ContractError("w0 has " + std::to_string(w0.size()) + " entries, drift net expects " +
                          std::to_string(weight_dim()));
    }
    if (hidden && hidden->weight_dim() != weight_dim()) {
      throw ContractError("hidden dynamics needs " + std::to_string(hidden->weight_dim()) +
                          " weights but the weight process has " + std::to_string(weight_dim()));
    }
  }
};

}  // namespace sdebnn
