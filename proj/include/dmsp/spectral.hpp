#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "dmsp/image.hpp"

namespace dmsp::spectral {

using Complex = std::complex<double>;

/// Unnormalized 2D DFT of a real h x w plane (row-major), full complex output.
std::vector<Complex> forward(std::span<const double> plane, std::size_t h, std::size_t w);

/// Inverse 2D DFT scaled by 1/(h w); returns the real part.
std::vector<double> inverse_real(std::span<const Complex> spectrum, std::size_t h,
                                 std::size_t w);

/// Transfer function of periodic convolution with k on an h x w grid.
std::vector<Complex> transfer_function(const Kernel& k, std::size_t h, std::size_t w);

/// Applies a real per-frequency gain to every channel of x:
/// out_c = F^-1 diag(gain_c) F x_c. `gain` has x's shape in DFT index order.
Image filter(const Image& x, const Image& gain);

/// Signed frequency index of DFT bin i on an n-point grid, in (-n/2, n/2].
double signed_frequency(std::size_t i, std::size_t n);

}  // namespace dmsp::spectral
