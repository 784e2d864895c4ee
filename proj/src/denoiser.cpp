#include "dmsp/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "dmsp/error.hpp"
#include "dmsp/spectral.hpp"

namespace dmsp {

void GaussianPrior::validate() const {
  require_same_shape(mean, spectrum, "GaussianPrior");
  const std::size_t h = spectrum.height();
  const std::size_t w = spectrum.width();
  for (std::size_t c = 0; c < spectrum.channels(); ++c) {
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        const double s = spectrum.at(c, u, v);
        if (!(s > 0.0) || !std::isfinite(s)) {
          throw ValueError(fmt::format("GaussianPrior: spectrum entry ({},{},{}) = {} not > 0",
                                       c, u, v, s));
        }
        const double mirror = spectrum.at(c, (h - u) % h, (w - v) % w);
        if (std::abs(s - mirror) > 1e-12 * std::max(1.0, std::abs(s))) {
          throw ValueError("GaussianPrior: spectrum is not conjugate-symmetric");
        }
      }
    }
  }
}

Image stationary_spectrum(Shape shape, double variance, double correlation_length,
                          double floor_fraction) {
  if (!(variance > 0.0) || !(correlation_length > 0.0) || floor_fraction < 0.0) {
    throw ValueError("stationary_spectrum: parameters must be positive");
  }
  Image spec(shape);
  const double n = static_cast<double>(shape.plane());
  for (std::size_t c = 0; c < shape.channels; ++c) {
    double total = 0.0;
    for (std::size_t u = 0; u < shape.height; ++u) {
      for (std::size_t v = 0; v < shape.width; ++v) {
        const double fu = spectral::signed_frequency(u, shape.height) / shape.height;
        const double fv = spectral::signed_frequency(v, shape.width) / shape.width;
        const double rho2 = (fu * fu + fv * fv) * correlation_length * correlation_length;
        const double s = 1.0 / (1.0 + 4.0 * M_PI * M_PI * rho2);
        spec.at(c, u, v) = s;
        total += s;
      }
    }
    // Per-sample variance of a circulant covariance is mean(spectrum).
    const double shaped = variance * (1.0 - floor_fraction) * n / total;
    for (double& s : spec.plane(c)) s = s * shaped + variance * floor_fraction;
  }
  return spec;
}

Image sample(const GaussianPrior& prior, Rng& rng) {
  prior.validate();
  Image white(prior.mean.shape());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : white.data()) v = normal(rng);
  Image root = prior.spectrum;
  for (double& s : root.data()) s = std::sqrt(s);
  return prior.mean + spectral::filter(white, root);
}

void GmmPrior::validate() const {
  if (weights.empty() || weights.size() != means.size() || weights.size() != variances.size()) {
    throw ValueError("GmmPrior: weights, means and variances must be non-empty and equal length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw ValueError("GmmPrior: weights must be >= 0");
    if (!(variances[i] > 0.0)) throw ValueError("GmmPrior: variances must be > 0");
    if (!std::isfinite(means[i])) throw ValueError("GmmPrior: means must be finite");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValueError(fmt::format("GmmPrior: weights sum to {}, expected 1", total));
  }
}

Image sample(const GmmPrior& prior, Shape shape, Rng& rng) {
  prior.validate();
  std::discrete_distribution<std::size_t> pick(prior.weights.begin(), prior.weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  Image out(shape);
  for (double& v : out.data()) {
    const std::size_t i = pick(rng);
    v = prior.means[i] + std::sqrt(prior.variances[i]) * normal(rng);
  }
  return out;
}

GaussianOracleDenoiser::GaussianOracleDenoiser(GaussianPrior prior, double sigma)
    : prior_(std::move(prior)), sigma_(sigma) {
  if (!(sigma_ > 0.0)) throw ValueError("GaussianOracleDenoiser: sigma must be > 0");
  prior_.validate();
  residual_gain_ = prior_.spectrum;
  const double s2 = sigma_ * sigma_;
  for (double& g : residual_gain_.data()) g = s2 / (g + s2);
}

Image GaussianOracleDenoiser::denoise(const Image& x) const {
  require_same_shape(x, prior_.mean, "GaussianOracleDenoiser::denoise");
  return x - spectral::filter(x - prior_.mean, residual_gain_);
}

GmmOracleDenoiser::GmmOracleDenoiser(GmmPrior prior, double sigma)
    : prior_(std::move(prior)), sigma_(sigma) {
  if (!(sigma_ > 0.0)) throw ValueError("GmmOracleDenoiser: sigma must be > 0");
  prior_.validate();
}

double GmmOracleDenoiser::denoise_sample(double x) const {
  const double s2 = sigma_ * sigma_;
  const std::size_t n = prior_.weights.size();
  std::vector<double> log_terms(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double var = prior_.variances[i] + s2;
    const double d = x - prior_.means[i];
    log_terms[i] = prior_.weights[i] > 0.0
                       ? std::log(prior_.weights[i]) - 0.5 * std::log(var) - 0.5 * d * d / var
                       : -std::numeric_limits<double>::infinity();
    peak = std::max(peak, log_terms[i]);
  }
  double norm = 0.0;
  double score = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::exp(log_terms[i] - peak);
    norm += r;
    score += -r * (x - prior_.means[i]) / (prior_.variances[i] + s2);
  }
  return x + s2 * score / norm;
}

Image GmmOracleDenoiser::denoise(const Image& x) const {
  Image out = x;
  for (double& v : out.data()) v = denoise_sample(v);
  return out;
}

}  // namespace dmsp
