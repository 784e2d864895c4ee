#include "dmsp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "dmsp/error.hpp"

namespace dmsp {

double psnr(const Image& a, const Image& b, double peak, std::size_t border) {
  require_same_shape(a, b, "psnr");
  const std::size_t smaller = std::min(a.height(), a.width());
  if (2 * border >= smaller) {
    throw ValueError(fmt::format("psnr: border {} too large for {}", border,
                                 to_string(a.shape())));
  }
  double sse = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    for (std::size_t y = border; y < a.height() - border; ++y) {
      for (std::size_t x = border; x < a.width() - border; ++x) {
        const double d = a.at(c, y, x) - b.at(c, y, x);
        sse += d * d;
        ++count;
      }
    }
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(count);
  return 10.0 * std::log10(peak * peak / mse);
}

std::size_t default_psnr_border(const Kernel& k) {
  const std::size_t m = std::max(k.height(), k.width());
  return (m + 1) / 2;
}

double sum_squared_difference(const Image& a, const Image& b) {
  require_same_shape(a, b, "sum_squared_difference");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double ssd_error_ratio(const Image& restored, const Image& reference, const Image& truth) {
  const double denom = sum_squared_difference(reference, truth);
  if (denom == 0.0) {
    throw ValueError("ssd_error_ratio: reference restoration equals the truth exactly");
  }
  return sum_squared_difference(restored, truth) / denom;
}

}  // namespace dmsp
