#include "sdebnn/autodiff.hpp"

#include <cmath>

#include "sdebnn/errors.hpp"

namespace sdebnn::ad {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->node(id_).value;
}

const Tensor& Gradients::operator[](const Var& v) const {
  auto it = grads_.find(v.id());
  if (it == grads_.end()) throw ContractError("gradient requested for a variable not passed to backward");
  return it->second;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable(Tensor value) {
  Node n{.op = Op::Variable};
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n{.op = Op::Constant};
  n.value = std::move(value);
  return push(std::move(n));
}

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

Tape::Node unary_node(Op op, const Var& x, Tensor value) {
  Tape::Node n{.op = op, .a = x.id()};
  n.value = std::move(value);
  n.needs_grad = x.tape().node(x.id()).needs_grad;
  return n;
}

Var unary(Op op, const Var& x, Tensor value) { return x.tape().push(unary_node(op, x, std::move(value))); }

Var binary(Op op, const Var& a, const Var& b, Tensor value) {
  Tape& t = same_tape(a, b);
  Tape::Node n{.op = op, .a = a.id(), .b = b.id()};
  n.value = std::move(value);
  n.needs_grad = t.node(a.id()).needs_grad || t.node(b.id()).needs_grad;
  return t.push(std::move(n));
}

void accumulate(std::vector<Tensor>& grads, const std::vector<Tape::Node>& nodes, int id, Tensor g) {
  auto& slot = grads[static_cast<std::size_t>(id)];
  const Tensor& target = nodes[static_cast<std::size_t>(id)].value;
  if (slot.size() == 0 && target.size() != 0) {
    slot = g.shape() == target.shape() ? std::move(g) : Tensor(target.shape(), g.storage());
  } else {
    slot += g;
  }
}

Tensor transpose(const Tensor& x) {
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return out;
}

template <class F>
Tensor elementwise(const Tensor& g, const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = g[i] * f(x[i]);
  return out;
}

}  // namespace

Gradients Tape::backward(const Var& root, std::span<const Var> wrt) const {
  if (&root.tape() != this) throw ContractError("backward: root recorded on a different tape");
  if (root.size() != 1) {
    throw ContractError("backward: root must be scalar, got shape " + shape_str(root.shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[static_cast<std::size_t>(root.id())] = Tensor(root.shape(), 1.0);

  auto needs = [this](int id) { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; };
  auto val = [this](int id) -> const Tensor& { return nodes_[static_cast<std::size_t>(id)].value; };

  for (int i = root.id(); i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const Tensor& g = grads[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad_blocked || g.size() == 0) continue;
    switch (n.op) {
      case Op::Variable:
      case Op::Constant:
      case Op::StopGradient:
        break;
      case Op::Add:
        if (needs(n.a)) accumulate(grads, nodes_, n.a, g);
        if (needs(n.b)) accumulate(grads, nodes_, n.b, g);
        break;
      case Op::Sub:
        if (needs(n.a)) accumulate(grads, nodes_, n.a, g);
        if (needs(n.b)) accumulate(grads, nodes_, n.b, scale(g, -1.0));
        break;
      case Op::Mul:
        if (needs(n.a)) accumulate(grads, nodes_, n.a, mul(g, val(n.b)));
        if (needs(n.b)) accumulate(grads, nodes_, n.b, mul(g, val(n.a)));
        break;
      case Op::Scale:
        accumulate(grads, nodes_, n.a, scale(g, n.scalar));
        break;
      case Op::Matmul:
        if (needs(n.a)) accumulate(grads, nodes_, n.a, matmul(g, transpose(val(n.b))));
        if (needs(n.b)) accumulate(grads, nodes_, n.b, matmul(transpose(val(n.a)), g));
        break;
      case Op::AddBias: {
        if (needs(n.a)) accumulate(grads, nodes_, n.a, g);
        if (needs(n.b)) {
          const std::size_t m = g.shape()[0], c = g.shape()[1];
          Tensor gb(Shape{c});
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
          accumulate(grads, nodes_, n.b, std::move(gb));
        }
        break;
      }
      case Op::Tanh:
        accumulate(grads, nodes_, n.a, elementwise(g, n.value, [](double y) { return 1.0 - y * y; }));
        break;
      case Op::Softplus:
        accumulate(grads, nodes_, n.a, mul(g, sigmoid(val(n.a))));
        break;
      case Op::Sigmoid:
        accumulate(grads, nodes_, n.a, elementwise(g, n.value, [](double y) { return y * (1.0 - y); }));
        break;
      case Op::Swish: {
        const Tensor s = sigmoid(val(n.a));
        const Tensor& x = val(n.a);
        Tensor d(x.shape());
        for (std::size_t k = 0; k < x.size(); ++k) d[k] = g[k] * (s[k] + x[k] * s[k] * (1.0 - s[k]));
        accumulate(grads, nodes_, n.a, std::move(d));
        break;
      }
      case Op::Exp:
        accumulate(grads, nodes_, n.a, mul(g, n.value));
        break;
      case Op::Log:
        accumulate(grads, nodes_, n.a, elementwise(g, val(n.a), [](double x) { return 1.0 / x; }));
        break;
      case Op::Log1p:
        accumulate(grads, nodes_, n.a, elementwise(g, val(n.a), [](double x) { return 1.0 / (1.0 + x); }));
        break;
      case Op::Square:
        accumulate(grads, nodes_, n.a, elementwise(g, val(n.a), [](double x) { return 2.0 * x; }));
        break;
      case Op::Sum:
        accumulate(grads, nodes_, n.a, Tensor(val(n.a).shape(), g[0]));
        break;
      case Op::Dot:
        if (needs(n.a)) accumulate(grads, nodes_, n.a, scale(val(n.b), g[0]));
        if (needs(n.b)) accumulate(grads, nodes_, n.b, scale(val(n.a), g[0]));
        break;
      case Op::Concat: {
        std::size_t off = 0;
        for (int in : n.inputs) {
          const Tensor& x = val(in);
          if (needs(in)) accumulate(grads, nodes_, in, slice(g, off, x.shape()));
          off += x.size();
        }
        break;
      }
      case Op::Hstack: {
        const Tensor& a = val(n.a);
        const Tensor& b = val(n.b);
        const std::size_t m = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
        if (needs(n.a)) {
          Tensor ga(a.shape());
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < p; ++j) ga[r * p + j] = g[r * (p + q) + j];
          accumulate(grads, nodes_, n.a, std::move(ga));
        }
        if (needs(n.b)) {
          Tensor gb(b.shape());
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < q; ++j) gb[r * q + j] = g[r * (p + q) + p + j];
          accumulate(grads, nodes_, n.b, std::move(gb));
        }
        break;
      }
      case Op::Slice: {
        Tensor ga(val(n.a).shape());
        for (std::size_t k = 0; k < g.size(); ++k) ga[n.offset + k] = g[k];
        accumulate(grads, nodes_, n.a, std::move(ga));
        break;
      }
      case Op::Reshape:
        accumulate(grads, nodes_, n.a, reshape(g, val(n.a).shape()));
        break;
      case Op::RepeatRows: {
        const std::size_t m = g.shape()[0], c = g.shape()[1];
        Tensor ga(Shape{c});
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < c; ++j) ga[j] += g[r * c + j];
        accumulate(grads, nodes_, n.a, std::move(ga));
        break;
      }
      case Op::LogSoftmaxRows: {
        const std::size_t m = g.shape()[0], c = g.shape()[1];
        Tensor ga(g.shape());
        for (std::size_t r = 0; r < m; ++r) {
          double gs = 0.0;
          for (std::size_t j = 0; j < c; ++j) gs += g[r * c + j];
          for (std::size_t j = 0; j < c; ++j) ga[r * c + j] = g[r * c + j] - std::exp(n.value[r * c + j]) * gs;
        }
        accumulate(grads, nodes_, n.a, std::move(ga));
        break;
      }
      case Op::Pick: {
        const Tensor& x = val(n.a);
        const std::size_t c = x.shape()[1];
        Tensor ga(x.shape());
        for (std::size_t r = 0; r < n.labels.size(); ++r) ga[r * c + n.labels[r]] = g[r];
        accumulate(grads, nodes_, n.a, std::move(ga));
        break;
      }
    }
  }

  Gradients out;
  for (const Var& v : wrt) {
    if (&v.tape() != this) throw ContractError("backward: wrt variable recorded on a different tape");
    const Tensor& g = grads[static_cast<std::size_t>(v.id())];
    out.grads_[v.id()] = g.size() == 0 && v.size() != 0 ? Tensor(v.shape()) : g;
  }
  return out;
}

Var add(const Var& a, const Var& b) { return binary(Op::Add, a, b, add(a.value(), b.value())); }
Var sub(const Var& a, const Var& b) { return binary(Op::Sub, a, b, sub(a.value(), b.value())); }
Var mul(const Var& a, const Var& b) { return binary(Op::Mul, a, b, mul(a.value(), b.value())); }
Var add(const Var& a, const Tensor& b) { return add(a, a.tape().constant(b)); }
Var sub(const Var& a, const Tensor& b) { return sub(a, a.tape().constant(b)); }
Var sub(const Tensor& a, const Var& b) { return sub(b.tape().constant(a), b); }
Var mul(const Var& a, const Tensor& b) { return mul(a, a.tape().constant(b)); }

Var scale(const Var& a, double s) {
  auto n = unary_node(Op::Scale, a, scale(a.value(), s));
  n.scalar = s;
  return a.tape().push(std::move(n));
}

Var matmul(const Var& a, const Var& b) { return binary(Op::Matmul, a, b, matmul(a.value(), b.value())); }
Var add_bias(const Var& x, const Var& b) { return binary(Op::AddBias, x, b, add_bias(x.value(), b.value())); }
Var tanh(const Var& x) { return unary(Op::Tanh, x, tanh(x.value())); }
Var softplus(const Var& x) { return unary(Op::Softplus, x, softplus(x.value())); }
Var sigmoid(const Var& x) { return unary(Op::Sigmoid, x, sigmoid(x.value())); }
Var swish(const Var& x) { return unary(Op::Swish, x, swish(x.value())); }
Var exp(const Var& x) { return unary(Op::Exp, x, exp(x.value())); }
Var log(const Var& x) { return unary(Op::Log, x, log(x.value())); }
Var log1p(const Var& x) { return unary(Op::Log1p, x, log1p(x.value())); }
Var square(const Var& x) { return unary(Op::Square, x, square(x.value())); }
Var sum(const Var& x) { return unary(Op::Sum, x, sum(x.value())); }
Var dot(const Var& a, const Var& b) { return binary(Op::Dot, a, b, dot(a.value(), b.value())); }
Var dot(const Var& a, const Tensor& b) { return dot(a, a.tape().constant(b)); }

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  Tape& t = parts.front().tape();
  std::vector<Tensor> values;
  Tape::Node n{.op = Op::Concat};
  for (const Var& p : parts) {
    if (&p.tape() != &t) throw ContractError("operands recorded on different tapes");
    values.push_back(p.value());
    n.inputs.push_back(p.id());
    n.needs_grad = n.needs_grad || t.node(p.id()).needs_grad;
  }
  n.value = concat(values);
  return t.push(std::move(n));
}

Var hstack(const Var& a, const Var& b) { return binary(Op::Hstack, a, b, hstack(a.value(), b.value())); }
Var hstack(const Var& a, const Tensor& b) { return hstack(a, a.tape().constant(b)); }

Var slice(const Var& x, std::size_t offset, Shape shape) {
  auto n = unary_node(Op::Slice, x, slice(x.value(), offset, std::move(shape)));
  n.offset = offset;
  return x.tape().push(std::move(n));
}

Var reshape(const Var& x, Shape shape) { return unary(Op::Reshape, x, reshape(x.value(), std::move(shape))); }
Var repeat_rows(const Var& x, std::size_t rows) { return unary(Op::RepeatRows, x, repeat_rows(x.value(), rows)); }
Var log_softmax_rows(const Var& x) { return unary(Op::LogSoftmaxRows, x, log_softmax_rows(x.value())); }

Var pick(const Var& x, std::span<const std::size_t> labels) {
  auto n = unary_node(Op::Pick, x, pick(x.value(), labels));
  n.labels.assign(labels.begin(), labels.end());
  return x.tape().push(std::move(n));
}

Var stop_gradient(const Var& x) {
  Tape& t = x.tape();
  Tape::Node n{.op = Op::StopGradient, .a = x.id()};
  n.value = x.value();
  n.grad_blocked = true;
  return t.push(std::move(n));
}

}  // namespace sdebnn::ad
