#pragma once

#include <cstdint>

#include "dmsp/denoiser.hpp"
#include "dmsp/image.hpp"
#include "dmsp/operators.hpp"

namespace dmsp {

enum class PriorMode : std::uint8_t { Deterministic, Stochastic };

/// Smoothing of the image likelihood. The total smoothing `sigma` is split
/// as sigma1^2 + sigma2^2 = sigma^2: the denoiser runs at sigma1, and sigma2
/// is the std of the noise injected before each denoiser call.
struct PriorConfig {
  double sigma = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  PriorMode mode = PriorMode::Stochastic;
  double weight = 1.0;

  /// sigma1 = sigma, sigma2 = 0.
  static PriorConfig deterministic(double sigma);
  /// sigma1 = sigma2 = sigma / sqrt(2).
  static PriorConfig stochastic(double sigma);
  /// Smoothing whose stochastic split puts the denoiser at `denoiser_sigma`.
  static PriorConfig stochastic_for_denoiser(double denoiser_sigma);

  void validate() const;
  /// Noise level the denoiser must be built for.
  double denoiser_sigma() const { return sigma1; }
};

/// Allowed |denoiser sigma - required sigma| in [0,1] units.
inline constexpr double kSigmaTolerance = 1e-6;

/// Throws SigmaMismatchError unless d.sigma() matches cfg.denoiser_sigma().
void require_sigma_match(const Denoiser& d, const PriorConfig& cfg);

/// weight * (r_sigma(x) - x) / sigma^2; consumes no randomness.
Image prior_grad_deterministic(const Image& x, const Denoiser& d, const PriorConfig& cfg);

/// Single-sample estimate of the lower-bound gradient:
///   weight * (r_sigma1(x + eta) - x) / sigma1^2,  eta ~ N(0, sigma2^2 I),
/// which is the 2/sigma^2 form for the default equal split.
Image prior_grad_stochastic(const Image& x, const Denoiser& d, const PriorConfig& cfg, Rng& rng);

/// Dispatches on cfg.mode.
Image prior_grad(const Image& x, const Denoiser& d, const PriorConfig& cfg, Rng& rng);

}  // namespace dmsp
