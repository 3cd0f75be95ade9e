#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sdebnn/autodiff.hpp"
#include "sdebnn/errors.hpp"

namespace sdebnn::lik {

using ad::Shape;
using ad::Tensor;

/// Observation model p(y | prediction).
struct Likelihood {
  enum class Kind { gaussian, cauchy, categorical };

  Kind kind = Kind::gaussian;
  double scale = 1.0;          ///< gaussian / cauchy
  std::size_t n_classes = 0;   ///< categorical

  static Likelihood gaussian(double scale) { return {Kind::gaussian, scale, 0}; }
  static Likelihood cauchy(double scale) { return {Kind::cauchy, scale, 0}; }
  static Likelihood categorical(std::size_t n_classes) { return {Kind::categorical, 1.0, n_classes}; }

  void validate() const;
};

std::string_view to_string(Likelihood::Kind kind);
Likelihood::Kind parse_likelihood_kind(std::string_view name);

/// Summed log density of real targets y under location `pred` (same shape).
template <class X>
X log_prob(const Likelihood& lik, const X& pred, const Tensor& y) {
  lik.validate();
  if (ad::value_of(pred).shape() != y.shape()) {
    throw ContractError("prediction shape " + ad::shape_str(ad::value_of(pred).shape()) + " vs target shape " +
                        ad::shape_str(y.shape()));
  }
  const double n = static_cast<double>(y.size());
  const X z = (pred - y) * (1.0 / lik.scale);
  switch (lik.kind) {
    case Likelihood::Kind::gaussian:
      return sum(square(z)) * -0.5 + Tensor::scalar(-n * (std::log(lik.scale) + 0.5 * std::log(2.0 * std::numbers::pi)));
    case Likelihood::Kind::cauchy:
      return -sum(log1p(square(z))) + Tensor::scalar(-n * std::log(std::numbers::pi * lik.scale));
    case Likelihood::Kind::categorical:
      break;
  }
  throw ContractError("categorical likelihood needs class labels, not real targets");
}

/// Summed log mass of class labels under row-wise softmax(logits).
template <class X>
X log_prob(const Likelihood& lik, const X& logits, std::span<const std::size_t> labels) {
  lik.validate();
  if (lik.kind != Likelihood::Kind::categorical) throw ContractError("class labels need a categorical likelihood");
  const auto& shape = ad::value_of(logits).shape();
  if (shape.size() != 2 || shape[1] != lik.n_classes) {
    throw ContractError("logits of shape " + ad::shape_str(shape) + " for " + std::to_string(lik.n_classes) +
                        " classes");
  }
  for (std::size_t y : labels) {
    if (y >= lik.n_classes) throw ContractError("class label " + std::to_string(y) + " out of range");
  }
  return sum(pick(log_softmax_rows(logits), labels));
}

/// Row-wise softmax.
Tensor softmax_rows(const Tensor& logits);

/// Posterior predictive: mean of per-sample probability matrices.
Tensor average_probabilities(std::span<const Tensor> per_sample);

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double confidence = 0.0;  ///< mean top-1 probability in the bin (0 if empty)
  double accuracy = 0.0;    ///< fraction correct in the bin (0 if empty)
  std::size_t count = 0;
};

struct CalibrationReport {
  double ece = 0.0;
  double brier = 0.0;  ///< squared error summed over classes, averaged over examples
  double nll = 0.0;    ///< mean negative log probability of the true class
  double accuracy = 0.0;
  std::vector<CalibrationBin> bins;
};

inline constexpr std::size_t kCalibrationBins = 15;

/// Bins are (k/B, (k+1)/B] by top-1 confidence, the first one closed at 0.
/// Rows must sum to 1 within 1e-6.
CalibrationReport calibration(const Tensor& probs, std::span<const std::size_t> labels,
                              std::size_t n_bins = kCalibrationBins);

/// {accuracy, nll, ece, brier, brier_convention, bins: [{lower, upper, confidence, accuracy, count}]}
nlohmann::json to_json(const CalibrationReport& report);

}  // namespace sdebnn::lik
