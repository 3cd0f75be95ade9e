#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdebnn/autodiff.hpp"
#include "sdebnn/errors.hpp"
#include "sdebnn/random.hpp"

namespace sdebnn::nets {

using ad::Shape;
using ad::Tensor;

enum class Activation { tanh, swish, softplus, none };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

struct LayerSpec {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  Activation activation = Activation::none;
  bool time_conditioned = false;  ///< input is extended with the scalar t

  std::size_t weight_rows() const noexcept { return input_dim + (time_conditioned ? 1 : 0); }
  std::size_t param_count() const noexcept { return weight_rows() * output_dim + output_dim; }
};

template <class X>
struct LayerParams {
  X weight;  ///< [weight_rows x output_dim]
  X bias;    ///< [output_dim]
};

template <class X>
X activate(Activation a, const X& x) {
  switch (a) {
    case Activation::tanh:
      return tanh(x);
    case Activation::swish:
      return swish(x);
    case Activation::softplus:
      return softplus(x);
    case Activation::none:
      break;
  }
  return x;
}

/// Dense multilayer perceptron whose parameters live in one flat vector:
/// per layer, the row-major weight matrix followed by the bias.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<LayerSpec> layers);

  /// in -> hidden... -> out. Hidden layers use `hidden_act`, the last layer
  /// `out_act`. Only the first layer sees t when `time_conditioned_input`,
  /// every layer when `time_conditioned_all`.
  static Mlp make(std::size_t in, std::span<const std::size_t> hidden, std::size_t out,
                  Activation hidden_act, Activation out_act, bool time_conditioned_input,
                  bool time_conditioned_all = false);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t param_count() const noexcept { return param_count_; }
  std::size_t input_dim() const { return layers_.front().input_dim; }
  std::size_t output_dim() const { return layers_.back().output_dim; }

  template <class X>
  std::vector<LayerParams<X>> unpack(const X& flat) const {
    if (ad::value_of(flat).size() != param_count_) {
      throw ContractError("parameter vector of length " + std::to_string(ad::value_of(flat).size()) +
                          " for a network with " + std::to_string(param_count_) + " parameters");
    }
    std::vector<LayerParams<X>> out;
    out.reserve(layers_.size());
    std::size_t off = 0;
    for (const auto& l : layers_) {
      X w = slice(flat, off, Shape{l.weight_rows(), l.output_dim});
      off += l.weight_rows() * l.output_dim;
      X b = slice(flat, off, Shape{l.output_dim});
      off += l.output_dim;
      out.push_back({std::move(w), std::move(b)});
    }
    return out;
  }

  Tensor pack(std::span<const LayerParams<Tensor>> layers) const;

  /// input: [batch x input_dim] -> [batch x output_dim].
  template <class X>
  X forward(const std::vector<LayerParams<X>>& params, const X& input, double t) const {
    const auto& shape = ad::value_of(input).shape();
    if (shape.size() != 2 || shape[1] != input_dim()) {
      throw ContractError("network input of shape " + ad::shape_str(shape) + ", expected [batch x " +
                          std::to_string(input_dim()) + "]");
    }
    const std::size_t batch = shape[0];
    X x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.time_conditioned) x = hstack(x, Tensor(Shape{batch, 1}, t));
      x = activate(l.activation, add_bias(matmul(x, params[i].weight), params[i].bias));
    }
    return x;
  }

  /// Kaiming-uniform (fan-in) weights, zero biases; the final layer is
  /// all zeros when `zero_last` is set.
  Tensor init_params(rng::SequentialRng& rng, bool zero_last) const;

 private:
  std::vector<LayerSpec> layers_;
  std::size_t param_count_ = 0;
};

/// f_h(t, h, w): hidden-unit dynamics whose weights are the flat vector w.
class HiddenDynamics {
 public:
  HiddenDynamics() = default;
  /// state_dim -> width... -> state_dim, every layer conditioned on t.
  HiddenDynamics(std::size_t state_dim, std::span<const std::size_t> widths, Activation act);
  explicit HiddenDynamics(Mlp mlp);

  std::size_t state_dim() const { return mlp_.input_dim(); }
  std::size_t weight_dim() const { return mlp_.param_count(); }
  const Mlp& mlp() const noexcept { return mlp_; }

  /// h: [batch x state_dim], w: [weight_dim] -> dh/dt [batch x state_dim].
  template <class X>
  X eval(double t, const X& h, const X& w) const {
    if (ad::value_of(w).size() != weight_dim()) {
      throw ContractError("hidden dynamics expects " + std::to_string(weight_dim()) + " weights, got " +
                          std::to_string(ad::value_of(w).size()));
    }
    return mlp_.forward(mlp_.unpack(w), h, t);
  }

 private:
  Mlp mlp_;
};

/// NN_phi(w, t): the learned part of the approximate-posterior weight drift.
/// Rows of w are independent weight samples sharing phi.
class PosteriorDriftNet {
 public:
  PosteriorDriftNet() = default;
  /// (weight_dim + t) -> hidden... -> weight_dim, final layer linear.
  PosteriorDriftNet(std::size_t weight_dim, std::span<const std::size_t> hidden, Activation act);

  std::size_t weight_dim() const { return mlp_.output_dim(); }
  std::size_t param_count() const { return mlp_.param_count(); }
  const Mlp& mlp() const noexcept { return mlp_; }

  const Tensor& phi() const noexcept { return phi_; }
  void set_phi(Tensor phi);
  /// Hidden layers Kaiming-uniform, final layer exactly zero.
  void initialize(rng::SequentialRng& rng);

  template <class X>
  std::vector<LayerParams<X>> bind(const X& phi) const {
    return mlp_.unpack(phi);
  }

  /// w: [rows x weight_dim] -> NN_phi(w, t) of the same shape.
  template <class X>
  X eval(const std::vector<LayerParams<X>>& bound, double t, const X& w) const {
    return mlp_.forward(bound, w, t);
  }

 private:
  Mlp mlp_;
  Tensor phi_;
};

/// Ornstein-Uhlenbeck prior drift f_p(w, t) = -w.
template <class X>
X prior_drift(const X& w) {
  return -w;
}

/// f_q = NN_phi + f_p, so a zero network output reproduces the prior exactly.
template <class X>
X posterior_drift(const PosteriorDriftNet& net, const std::vector<LayerParams<X>>& bound, double t,
                  const X& w) {
  return net.eval(bound, t, w) + prior_drift(w);
}

}  // namespace sdebnn::nets
