#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include "dmsp/image.hpp"

namespace dmsp {

using Rng = std::mt19937_64;

/// Periodic convolution K x. Output shape equals input shape.
Image convolve(const Image& x, const Kernel& k);

/// Periodic adjoint K^T y, i.e. convolution with the 180-degree rotated kernel.
Image adjoint_convolve(const Image& y, const Kernel& k);

/// Adjoint of the map k -> k * x restricted to a kh x kw support, applied to
/// an image-space vector z and summed over channels:
///   out(a, b) = sum_{c,i,j} x(c, i - (a - ca), j - (b - cb)) z(c, i, j).
Kernel correlate_to_kernel(const Image& x, const Image& z, std::size_t kh, std::size_t kw);

/// Point sampling at multiples of `factor` starting at (0,0).
Image downsample(const Image& x, std::size_t factor);

/// Exact adjoint of downsample: scatters samples back, zero elsewhere.
Image upsample_adjoint(const Image& y, std::size_t factor);

/// Elementwise product with a {0,1} mask of identical shape.
Image apply_mask(const Image& x, const Image& mask);

enum class BayerPattern : std::uint8_t { RGGB, BGGR, GRBG, GBRG };

BayerPattern parse_bayer_pattern(std::string_view name);
std::string_view to_string(BayerPattern p);

/// Three-channel {0,1} mask with exactly one live channel per pixel.
Image bayer_mask(BayerPattern pattern, std::size_t height, std::size_t width);

/// Forward model A = mask . downsample . K and its adjoint.
class DegradationOp {
 public:
  DegradationOp(Shape latent, Kernel kernel, std::size_t scale = 1,
                std::optional<Image> mask = std::nullopt);

  const Shape& latent_shape() const { return latent_; }
  const Shape& observed_shape() const { return observed_; }
  const Kernel& kernel() const { return kernel_; }
  std::size_t scale() const { return scale_; }
  const std::optional<Image>& mask() const { return mask_; }

  /// N: live observation samples (mask ones, or every sample without a mask).
  std::size_t observed_count() const { return observed_count_; }
  /// M: latent-image sample count.
  std::size_t latent_count() const { return latent_.size(); }

  Image apply(const Image& x) const;
  Image adjoint(const Image& y) const;

  /// Adjoint of k -> A_k x for fixed x, applied to an observation-space
  /// vector r. Result has this operator's kernel shape.
  Kernel kernel_adjoint(const Image& x, const Image& r) const;

  DegradationOp with_kernel(Kernel k) const;

 private:
  Shape latent_;
  Shape observed_;
  Kernel kernel_;
  std::size_t scale_;
  std::optional<Image> mask_;
  std::size_t observed_count_ = 0;
};

/// y = A x + n, n ~ N(0, sigma_n^2) i.i.d. on observed samples. No random
/// draws when sigma_n == 0.
Image degrade(const Image& x, const DegradationOp& op, double sigma_n, Rng& rng);

/// Adds i.i.d. N(0, stddev^2) to every sample.
void add_gaussian_noise(Image& x, double stddev, Rng& rng);

}  // namespace dmsp
