#pragma once

#include <vector>

#include "dmsp/image.hpp"
#include "dmsp/operators.hpp"

namespace dmsp {

/// r_sigma(x): maps an image to its denoised estimate at a fixed noise level.
/// Implementations are immutable and deterministic.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Image denoise(const Image& x) const = 0;
  /// Noise std the denoiser is built for, in [0,1] intensity units.
  virtual double sigma() const = 0;
};

/// Stationary Gaussian image prior N(mean, Sigma), Sigma circulant per
/// channel. `spectrum` holds the eigenvalues of Sigma in DFT index order.
struct GaussianPrior {
  Image mean;
  Image spectrum;

  /// Throws unless shapes agree and the spectrum is positive and
  /// conjugate-symmetric (so Sigma is real).
  void validate() const;
};

/// Spectrum of a stationary field with per-sample variance `variance` and
/// Lorentzian-shaped spectral decay with the given correlation length, plus
/// a white floor of `floor_fraction * variance`.
Image stationary_spectrum(Shape shape, double variance, double correlation_length,
                          double floor_fraction = 0.05);

/// Draw from N(mean, Sigma).
Image sample(const GaussianPrior& prior, Rng& rng);

/// Per-sample i.i.d. scalar Gaussian mixture.
struct GmmPrior {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  void validate() const;
};

Image sample(const GmmPrior& prior, Shape shape, Rng& rng);

/// Exact posterior mean E[x | x + n] for a Gaussian prior and n ~ N(0, sigma^2 I):
///   r(x) = x - sigma^2 (Sigma + sigma^2 I)^-1 (x - mean).
class GaussianOracleDenoiser final : public Denoiser {
 public:
  GaussianOracleDenoiser(GaussianPrior prior, double sigma);
  Image denoise(const Image& x) const override;
  double sigma() const override { return sigma_; }
  const GaussianPrior& prior() const { return prior_; }

 private:
  GaussianPrior prior_;
  double sigma_;
  Image residual_gain_;  // sigma^2 / (s + sigma^2)
};

/// Exact per-sample posterior mean under a Gaussian mixture prior:
///   r(x) = x + sigma^2 d/dx log sum_i w_i N(x; m_i, v_i + sigma^2).
class GmmOracleDenoiser final : public Denoiser {
 public:
  GmmOracleDenoiser(GmmPrior prior, double sigma);
  Image denoise(const Image& x) const override;
  double sigma() const override { return sigma_; }
  const GmmPrior& prior() const { return prior_; }

  double denoise_sample(double x) const;

 private:
  GmmPrior prior_;
  double sigma_;
};

}  // namespace dmsp
