#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "sdebnn/tensor.hpp"

namespace sdebnn::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives and
/// has not been cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  Tape& tape() const { return *tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

enum class Op : std::uint8_t {
  Variable,
  Constant,
  Add,
  Sub,
  Mul,
  Scale,
  Matmul,
  AddBias,
  Tanh,
  Softplus,
  Sigmoid,
  Swish,
  Exp,
  Log,
  Log1p,
  Square,
  Sum,
  Dot,
  Concat,
  Hstack,
  Slice,
  Reshape,
  RepeatRows,
  LogSoftmaxRows,
  Pick,
  StopGradient,
};

/// Gradient of a scalar root with respect to a requested set of variables.
/// Every requested variable has an entry; a variable the root does not
/// depend on maps to a zero tensor of its own shape.
class Gradients {
 public:
  const Tensor& operator[](const Var& v) const;
  bool contains(const Var& v) const { return grads_.count(v.id()) != 0; }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  friend class Tape;
  std::map<int, Tensor> grads_;
};

/// Append-only record of a computation for reverse-mode differentiation.
/// Single-threaded while being built; read-only afterwards.
class Tape {
 public:
  struct Node {
    Op op = Op::Constant;
    int a = -1;
    int b = -1;
    double scalar = 0.0;
    std::size_t offset = 0;
    std::vector<int> inputs{};
    std::vector<std::size_t> labels{};
    Tensor value{};
    bool needs_grad = false;
    bool grad_blocked = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf.
  Var variable(Tensor value);
  /// Non-differentiable leaf.
  Var constant(Tensor value);

  /// Reverse sweep from a single-element root.
  Gradients backward(const Var& root, std::span<const Var> wrt) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  void clear() { nodes_.clear(); }

  // Internal: used by the op functions.
  Var push(Node node);

 private:
  std::vector<Node> nodes_;
};

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add(const Var& a, const Tensor& b);
Var sub(const Var& a, const Tensor& b);
Var sub(const Tensor& a, const Var& b);
Var mul(const Var& a, const Tensor& b);
Var scale(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
Var add_bias(const Var& x, const Var& b);
Var tanh(const Var& x);
Var softplus(const Var& x);
Var sigmoid(const Var& x);
Var swish(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var log1p(const Var& x);
Var square(const Var& x);
Var sum(const Var& x);
Var dot(const Var& a, const Var& b);
Var dot(const Var& a, const Tensor& b);
Var concat(std::span<const Var> parts);
Var hstack(const Var& a, const Var& b);
Var hstack(const Var& a, const Tensor& b);
Var slice(const Var& x, std::size_t offset, Shape shape);
Var reshape(const Var& x, Shape shape);
Var repeat_rows(const Var& x, std::size_t rows);
Var log_softmax_rows(const Var& x);
Var pick(const Var& x, std::span<const std::size_t> labels);
/// Identity on values; no adjoint flows to `x`.
Var stop_gradient(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator+(const Var& a, const Tensor& b) { return add(a, b); }
inline Var operator-(const Var& a, const Tensor& b) { return sub(a, b); }
inline Var operator-(const Tensor& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Tensor& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

/// Value of a Tensor or Var, for code templated over both.
inline const Tensor& value_of(const Tensor& t) { return t; }
inline const Tensor& value_of(const Var& v) { return v.value(); }

/// Lift a constant into the value domain of `like`.
inline Tensor lift(const Tensor&, Tensor c) { return c; }
inline Var lift(const Var& like, Tensor c) { return like.tape().constant(std::move(c)); }

}  // namespace sdebnn::ad
