#include "sdebnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sdebnn/errors.hpp"

namespace sdebnn::ad {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ContractError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str(shape_));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Tensor::norm() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.size() != size()) {
    throw ContractError("accumulate: shape " + shape_str(shape_) + " vs " + shape_str(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.storage() == b.storage();
}

namespace {

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    throw ContractError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                        shape_str(a.shape()));
  }
}

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

template <class F>
Tensor zip(const char* op, const Tensor& a, const Tensor& b, F f) {
  require_same(op, a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

inline double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return zip("add", a, b, std::plus<>()); }
Tensor sub(const Tensor& a, const Tensor& b) { return zip("sub", a, b, std::minus<>()); }
Tensor mul(const Tensor& a, const Tensor& b) { return zip("mul", a, b, std::multiplies<>()); }
Tensor scale(const Tensor& a, double s) {
  return map(a, [s](double v) { return s * v; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ContractError("matmul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      const double* brow = pb + p * n;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  require_rank("add_bias", x, 2);
  require_rank("add_bias", b, 1);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (b.size() != n) {
    throw ContractError("add_bias: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = x;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  return out;
}

Tensor tanh(const Tensor& x) {
  return map(x, [](double v) { return std::tanh(v); });
}
Tensor softplus(const Tensor& x) {
  return map(x, [](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); });
}
Tensor sigmoid(const Tensor& x) { return map(x, sigmoid_scalar); }
Tensor swish(const Tensor& x) {
  return map(x, [](double v) { return v * sigmoid_scalar(v); });
}
Tensor exp(const Tensor& x) {
  return map(x, [](double v) { return std::exp(v); });
}
Tensor log(const Tensor& x) {
  return map(x, [](double v) { return std::log(v); });
}
Tensor log1p(const Tensor& x) {
  return map(x, [](double v) { return std::log1p(v); });
}
Tensor square(const Tensor& x) {
  return map(x, [](double v) { return v * v; });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::scalar(s);
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_same("dot", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return Tensor::scalar(s);
}

Tensor concat(std::span<const Tensor> parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor::vector(std::move(out));
}

Tensor hstack(const Tensor& a, const Tensor& b) {
  require_rank("hstack", a, 2);
  require_rank("hstack", b, 2);
  if (a.shape()[0] != b.shape()[0]) {
    throw ContractError("hstack: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
  Tensor out(Shape{m, p + q});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.data() + i * p, p, out.data() + i * (p + q));
    std::copy_n(b.data() + i * q, q, out.data() + i * (p + q) + p);
  }
  return out;
}

Tensor slice(const Tensor& x, std::size_t offset, Shape shape) {
  const std::size_t n = shape_size(shape);
  if (offset + n > x.size()) {
    throw ContractError("slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + n) +
                        ") exceeds tensor of shape " + shape_str(x.shape()));
  }
  return Tensor(std::move(shape), std::vector<double>(x.data() + offset, x.data() + offset + n));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ContractError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  return Tensor(std::move(shape), x.storage());
}

Tensor repeat_rows(const Tensor& x, std::size_t rows) {
  require_rank("repeat_rows", x, 1);
  const std::size_t n = x.size();
  Tensor out(Shape{rows, n});
  for (std::size_t i = 0; i < rows; ++i) std::copy_n(x.data(), n, out.data() + i * n);
  return out;
}

Tensor log_softmax_rows(const Tensor& x) {
  require_rank("log_softmax_rows", x, 2);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  Tensor out(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = row[j] - lse;
  }
  return out;
}

Tensor pick(const Tensor& x, std::span<const std::size_t> labels) {
  require_rank("pick", x, 2);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (labels.size() != m) {
    throw ContractError("pick: " + std::to_string(labels.size()) + " labels for shape " + shape_str(x.shape()));
  }
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] >= n) {
      throw ContractError("pick: label " + std::to_string(labels[i]) + " out of range for " + std::to_string(n) +
                          " classes");
    }
    out[i] = x[i * n + labels[i]];
  }
  return out;
}

std::ostream& operator<<(std::ostream& os, const Tensor& t) {
  const auto old = os.precision(17);
  os << shape_str(t.shape()) << " {";
  for (std::size_t i = 0; i < t.size(); ++i) os << (i ? ", " : "") << t[i];
  os << '}';
  os.precision(old);
  return os;
}

}  // namespace sdebnn::ad
