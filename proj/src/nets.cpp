#include "sdebnn/nets.hpp"

#include <cmath>

namespace sdebnn::nets {

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "swish") return Activation::swish;
  if (name == "softplus") return Activation::softplus;
  if (name == "none") return Activation::none;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh:
      return "tanh";
    case Activation::swish:
      return "swish";
    case Activation::softplus:
      return "softplus";
    case Activation::none:
      break;
  }
  return "none";
}

Mlp::Mlp(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ContractError("network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.input_dim == 0 || l.output_dim == 0) throw ContractError("layer dimensions must be positive");
    if (i > 0 && layers_[i - 1].output_dim != l.input_dim) {
      throw ContractError("layer " + std::to_string(i) + " input " + std::to_string(l.input_dim) +
                          " does not match previous output " + std::to_string(layers_[i - 1].output_dim));
    }
    param_count_ += l.param_count();
  }
}

Mlp Mlp::make(std::size_t in, std::span<const std::size_t> hidden, std::size_t out, Activation hidden_act,
              Activation out_act, bool time_conditioned_input, bool time_conditioned_all) {
  std::vector<LayerSpec> layers;
  std::size_t prev = in;
  for (std::size_t width : hidden) {
    layers.push_back({prev, width, hidden_act, time_conditioned_all || (layers.empty() && time_conditioned_input)});
    prev = width;
  }
  layers.push_back({prev, out, out_act, time_conditioned_all || (layers.empty() && time_conditioned_input)});
  return Mlp(std::move(layers));
}

Tensor Mlp::pack(std::span<const LayerParams<Tensor>> layers) const {
  if (layers.size() != layers_.size()) throw ContractError("pack: wrong number of layers");
  std::vector<Tensor> parts;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers_[i];
    if (layers[i].weight.size() != l.weight_rows() * l.output_dim || layers[i].bias.size() != l.output_dim) {
      throw ContractError("pack: layer " + std::to_string(i) + " has wrong parameter shapes " +
                          ad::shape_str(layers[i].weight.shape()) + ", " + ad::shape_str(layers[i].bias.shape()));
    }
    parts.push_back(layers[i].weight);
    parts.push_back(layers[i].bias);
  }
  return ad::concat(parts);
}

Tensor Mlp::init_params(rng::SequentialRng& rng, bool zero_last) const {
  std::vector<double> flat;
  flat.reserve(param_count_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const bool zero = zero_last && i + 1 == layers_.size();
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weight_rows()));
    for (std::size_t k = 0; k < l.weight_rows() * l.output_dim; ++k) {
      flat.push_back(zero ? 0.0 : rng.uniform(-bound, bound));
    }
    flat.insert(flat.end(), l.output_dim, 0.0);
  }
  return Tensor::vector(std::move(flat));
}

HiddenDynamics::HiddenDynamics(std::size_t state_dim, std::span<const std::size_t> widths, Activation act)
    : mlp_(Mlp::make(state_dim, widths, state_dim, act, Activation::none, true, true)) {}

HiddenDynamics::HiddenDynamics(Mlp mlp) : mlp_(std::move(mlp)) {
  if (mlp_.input_dim() != mlp_.output_dim()) {
    throw ContractError("hidden dynamics must map the state space to itself");
  }
}

PosteriorDriftNet::PosteriorDriftNet(std::size_t weight_dim, std::span<const std::size_t> hidden, Activation act)
    : mlp_(Mlp::make(weight_dim, hidden, weight_dim, act, Activation::none, true)),
      phi_(Shape{mlp_.param_count()}) {}

void PosteriorDriftNet::set_phi(Tensor phi) {
  if (phi.size() != mlp_.param_count()) {
    throw ContractError("drift net expects " + std::to_string(mlp_.param_count()) + " parameters, got " +
                        std::to_string(phi.size()));
  }
  phi_ = ad::reshape(phi, Shape{phi.size()});
}

void PosteriorDriftNet::initialize(rng::SequentialRng& rng) { phi_ = mlp_.init_params(rng, true); }

}  // namespace sdebnn::nets
