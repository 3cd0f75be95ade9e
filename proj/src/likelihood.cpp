#include "sdebnn/likelihood.hpp"

#include <algorithm>
#include <limits>

#include <nlohmann/json.hpp>

namespace sdebnn::lik {

void Likelihood::validate() const {
  if (kind == Kind::categorical) {
    if (n_classes < 2) throw ContractError("categorical likelihood needs at least 2 classes");
  } else if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw DomainError("likelihood scale must be positive");
  }
}

std::string_view to_string(Likelihood::Kind kind) {
  switch (kind) {
    case Likelihood::Kind::gaussian:
      return "gaussian";
    case Likelihood::Kind::cauchy:
      return "cauchy";
    case Likelihood::Kind::categorical:
      break;
  }
  return "categorical";
}

Likelihood::Kind parse_likelihood_kind(std::string_view name) {
  if (name == "gaussian") return Likelihood::Kind::gaussian;
  if (name == "cauchy") return Likelihood::Kind::cauchy;
  if (name == "categorical") return Likelihood::Kind::categorical;
  throw ConfigError("unknown likelihood '" + std::string(name) + "'");
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p = ad::exp(ad::log_softmax_rows(logits));
  // Renormalise so rows sum to one to rounding.
  const std::size_t rows = p.shape()[0], cols = p.shape()[1];
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += p.at(i, j);
    for (std::size_t j = 0; j < cols; ++j) p.at(i, j) /= s;
  }
  return p;
}

Tensor average_probabilities(std::span<const Tensor> per_sample) {
  if (per_sample.empty()) throw ContractError("posterior predictive needs at least one sample");
  Tensor mean(per_sample.front().shape());
  for (const auto& p : per_sample) mean += p;
  return mean * (1.0 / static_cast<double>(per_sample.size()));
}

CalibrationReport calibration(const Tensor& probs, std::span<const std::size_t> labels, std::size_t n_bins) {
  if (probs.rank() != 2) throw ContractError("calibration expects an [N x C] probability matrix");
  const std::size_t n = probs.shape()[0], c = probs.shape()[1];
  if (labels.size() != n) {
    throw ContractError(std::to_string(labels.size()) + " labels for " + std::to_string(n) + " predictions");
  }
  if (n == 0 || n_bins == 0) throw ContractError("calibration needs examples and bins");

  CalibrationReport r;
  r.bins.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    r.bins[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
    r.bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) throw ContractError("label " + std::to_string(labels[i]) + " out of range");
    double row_sum = 0.0;
    std::size_t top = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = probs.at(i, j);
      if (!(p >= 0.0)) throw ContractError("negative or NaN probability in row " + std::to_string(i));
      row_sum += p;
      if (p > probs.at(i, top)) top = j;
      const double target = j == labels[i] ? 1.0 : 0.0;
      r.brier += (p - target) * (p - target);
    }
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw ContractError("probability row " + std::to_string(i) + " sums to " + std::to_string(row_sum));
    }
    const double conf = probs.at(i, top);
    const bool hit = top == labels[i];
    correct += hit ? 1 : 0;
    r.nll -= std::log(std::max(probs.at(i, labels[i]), std::numeric_limits<double>::min()));

    auto b = static_cast<std::size_t>(std::ceil(conf * static_cast<double>(n_bins)));
    b = std::clamp<std::size_t>(b, 1, n_bins) - 1;
    r.bins[b].confidence += conf;
    r.bins[b].accuracy += hit ? 1.0 : 0.0;
    ++r.bins[b].count;
  }
  const double nd = static_cast<double>(n);
  for (auto& bin : r.bins) {
    if (bin.count == 0) continue;
    bin.confidence /= static_cast<double>(bin.count);
    bin.accuracy /= static_cast<double>(bin.count);
    r.ece += static_cast<double>(bin.count) / nd * std::abs(bin.accuracy - bin.confidence);
  }
  r.brier /= nd;
  r.nll /= nd;
  r.accuracy = static_cast<double>(correct) / nd;
  return r;
}

nlohmann::json to_json(const CalibrationReport& report) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : report.bins) {
    bins.push_back({{"lower", b.lower},
                    {"upper", b.upper},
                    {"confidence", b.confidence},
                    {"accuracy", b.accuracy},
                    {"count", b.count}});
  }
  return {{"accuracy", report.accuracy},
          {"nll", report.nll},
          {"ece", report.ece},
          {"brier", report.brier},
          {"brier_convention", "sum over classes, mean over examples"},
          {"bins", std::move(bins)}};
}

}  // namespace sdebnn::lik
