#pragma once

// Central finite differences, used as the independent oracle for every
// reverse-mode gradient in the test suites.

#include <algorithm>
#include <cmath>
#include <functional>

#include "sdebnn/tensor.hpp"

namespace sdebnn::testing {

inline ad::Tensor central_difference(const std::function<double(const ad::Tensor&)>& f, const ad::Tensor& x,
                                     double step = 1e-5) {
  ad::Tensor grad(x.shape());
  ad::Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = f(probe);
    probe[i] = orig - step;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// max_i |a_i - b_i| / max(max_i |b_i|, floor)
inline double max_relative_error(const ad::Tensor& a, const ad::Tensor& b, double floor = 1e-8) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
  return diff / std::max(b.max_abs(), floor);
}

}  // namespace sdebnn::testing
