#pragma once

#include <cstddef>

#include "dmsp/image.hpp"

namespace dmsp {

/// PSNR in dB over the region with `border` pixels cropped from every side.
/// Returns +infinity when the cropped MSE is exactly zero.
double psnr(const Image& a, const Image& b, double peak = 1.0, std::size_t border = 0);

/// ceil(max(kh, kw) / 2): crop that keeps wrap-around seams out of metrics.
std::size_t default_psnr_border(const Kernel& k);

double sum_squared_difference(const Image& a, const Image& b);

/// SSD(restored, truth) / SSD(reference, truth), where `reference` is the
/// non-blind restoration computed with the true kernel.
double ssd_error_ratio(const Image& restored, const Image& reference, const Image& truth);

}  // namespace dmsp
