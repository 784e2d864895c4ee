#pragma once

#include <functional>
#include <variant>

#include "dmsp/denoiser.hpp"
#include "dmsp/image.hpp"
#include "dmsp/operators.hpp"

namespace dmsp {

/// p' = p * g_sigma for an analytic base distribution. For the Gaussian base
/// p' = N(mean, Sigma + sigma^2 I); for the mixture every component variance
/// grows by sigma^2.
struct SmoothedDensity {
  std::variant<GaussianPrior, GmmPrior> base;
  double sigma = 0.0;
};

/// log p'(x), normalization included.
double log_p_smoothed(const SmoothedDensity& d, const Image& x);
Image grad_log_p_smoothed(const SmoothedDensity& d, const Image& x);

/// Closed-form lower bound of the Gaussian image likelihood obtained by
/// pulling the outer sigma2-smoothing out of the log:
///   E_{eta ~ N(0, sigma2^2)} log N(x + eta; mean, Sigma + sigma1^2 I).
double log_prior_lower_bound(const GaussianPrior& prior, double sigma1, double sigma2,
                             const Image& x);
Image grad_log_prior_lower_bound(const GaussianPrior& prior, double sigma1, const Image& x);

using ScalarField = std::function<double(const Image&)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every sample.
/// Throws ValueError if f is non-finite at a probe.
Image finite_diff_grad(const ScalarField& f, const Image& x, double step);

/// Maximizer of -|y - A x|^2 / (2 sigma_n^2) + log N(x; mean, Sigma + sigma^2 I)
/// with sigma = d.sigma(). Solves the normal equations per frequency when A is
/// a plain convolution, by conjugate gradients otherwise.
Image gaussian_map_oracle(const Image& y, const DegradationOp& op, double sigma_n,
                          const GaussianOracleDenoiser& d);

/// Normal-equation residual (A^T A / sigma_n^2 + C^-1) x - (A^T y / sigma_n^2 + C^-1 mean).
Image map_normal_residual(const Image& x, const Image& y, const DegradationOp& op,
                          double sigma_n, const GaussianOracleDenoiser& d);

/// Scalar posterior mean x - E[eta p(x-eta)] / E[p(x-eta)] under the mixture,
/// by adaptive Gauss-Kronrod quadrature over eta.
double gmm_posterior_mean_quadrature(const GmmPrior& prior, double sigma, double x);

/// Scalar smoothed density int g_sigma(eta) p(x + eta) d eta by quadrature.
double gmm_smoothed_density_quadrature(const GmmPrior& prior, double sigma, double x);

}  // namespace dmsp
