#pragma once

#include <cmath>
#include <random>

#include "dmsp/image.hpp"
#include "dmsp/operators.hpp"

namespace dmsp::testing {

inline Image random_image(Shape s, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image x(s);
  for (double& v : x.data()) v = u(rng);
  return x;
}

inline Kernel random_kernel(std::size_t h, std::size_t w, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Kernel k(h, w);
  for (double& v : k.taps()) v = u(rng);
  return k;
}

inline Kernel random_probability_kernel(std::size_t h, std::size_t w, Rng& rng) {
  Kernel k = random_kernel(h, w, rng, 0.05, 1.0);
  k *= 1.0 / k.sum();
  return k;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double relative_error(const Image& a, const Image& b) {
  return norm(a - b) / std::max(norm(b), 1e-300);
}

}  // namespace dmsp::testing
