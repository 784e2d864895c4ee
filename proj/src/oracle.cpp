#include "dmsp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "dmsp/error.hpp"
#include "dmsp/spectral.hpp"

namespace dmsp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Image smoothed_spectrum(const GaussianPrior& p, double sigma) {
  Image c = p.spectrum;
  for (double& v : c.data()) v += sigma * sigma;
  return c;
}

Image reciprocal(Image c) {
  for (double& v : c.data()) v = 1.0 / v;
  return c;
}

double gaussian_log_density(const GaussianPrior& p, const Image& cov_spectrum, const Image& x) {
  require_same_shape(x, p.mean, "log_p_smoothed");
  const Image d = x - p.mean;
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  const double n = static_cast<double>(h * w);
  double quad = 0.0;
  double logdet = 0.0;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const auto spec = spectral::forward(d.plane(c), h, w);
    const auto cov = cov_spectrum.plane(c);
    for (std::size_t i = 0; i < spec.size(); ++i) {
      quad += std::norm(spec[i]) / cov[i];
      logdet += std::log(cov[i]);
    }
  }
  // Parseval for the unnormalized DFT: |v|^2 = |F v|^2 / n.
  quad /= n;
  return -0.5 * (quad + logdet + static_cast<double>(x.size()) * kLog2Pi);
}

double gmm_log_density_sample(const GmmPrior& p, double sigma, double x) {
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(p.weights.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double var = p.variances[i] + sigma * sigma;
    const double d = x - p.means[i];
    terms[i] = p.weights[i] > 0.0 ? std::log(p.weights[i]) - 0.5 * (std::log(var) + kLog2Pi) -
                                        0.5 * d * d / var
                                  : -std::numeric_limits<double>::infinity();
    peak = std::max(peak, terms[i]);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - peak);
  return peak + std::log(s);
}

double gmm_score_sample(const GmmPrior& p, double sigma, double x) {
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(p.weights.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double var = p.variances[i] + sigma * sigma;
    const double d = x - p.means[i];
    terms[i] = p.weights[i] > 0.0
                   ? std::log(p.weights[i]) - 0.5 * std::log(var) - 0.5 * d * d / var
                   : -std::numeric_limits<double>::infinity();
    peak = std::max(peak, terms[i]);
  }
  double norm = 0.0;
  double score = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double r = std::exp(terms[i] - peak);
    norm += r;
    score -= r * (x - p.means[i]) / (p.variances[i] + sigma * sigma);
  }
  return score / norm;
}

double base_density(const GmmPrior& p, double x) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const double d = x - p.means[i];
    s += p.weights[i] * std::exp(-0.5 * d * d / p.variances[i]) /
         std::sqrt(2.0 * std::numbers::pi * p.variances[i]);
  }
  return s;
}

double gauss(double eta, double sigma) {
  return std::exp(-0.5 * eta * eta / (sigma * sigma)) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

template <typename F>
double integrate(F f, double lo, double hi) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(f, lo, hi, 20, 1e-13);
}

// Split the eta range at the points where any mixture component peaks so
// the adaptive rule never straddles a narrow bump blindly.
template <typename F>
double integrate_eta(F f, const GmmPrior& p, double sigma, double x) {
  const double reach = 12.0 * sigma;
  std::vector<double> cuts{-reach, reach};
  for (double m : p.means) {
    const double peak = x - m;  // p(x - eta) peaks at eta = x - m
    if (peak > -reach && peak < reach) cuts.push_back(peak);
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) total += integrate(f, cuts[i], cuts[i + 1]);
  }
  return total;
}

Image normal_operator(const Image& v, const DegradationOp& op, double inv_noise_var,
                      const Image& inv_cov) {
  Image out = op.adjoint(op.apply(v));
  out *= inv_noise_var;
  out += spectral::filter(v, inv_cov);
  return out;
}

}  // namespace

double log_p_smoothed(const SmoothedDensity& d, const Image& x) {
  if (const auto* g = std::get_if<GaussianPrior>(&d.base)) {
    g->validate();
    return gaussian_log_density(*g, smoothed_spectrum(*g, d.sigma), x);
  }
  const auto& m = std::get<GmmPrior>(d.base);
  m.validate();
  double s = 0.0;
  for (double v : x.data()) s += gmm_log_density_sample(m, d.sigma, v);
  return s;
}

Image grad_log_p_smoothed(const SmoothedDensity& d, const Image& x) {
  if (const auto* g = std::get_if<GaussianPrior>(&d.base)) {
    g->validate();
    require_same_shape(x, g->mean, "grad_log_p_smoothed");
    Image out = spectral::filter(x - g->mean, reciprocal(smoothed_spectrum(*g, d.sigma)));
    out *= -1.0;
    return out;
  }
  const auto& m = std::get<GmmPrior>(d.base);
  m.validate();
  Image out = x;
  for (double& v : out.data()) v = gmm_score_sample(m, d.sigma, v);
  return out;
}

double log_prior_lower_bound(const GaussianPrior& prior, double sigma1, double sigma2,
                             const Image& x) {
  prior.validate();
  const Image c1 = smoothed_spectrum(prior, sigma1);
  double trace_inv = 0.0;
  for (double v : c1.data()) trace_inv += 1.0 / v;
  // E[(d + eta)^T C^-1 (d + eta)] = d^T C^-1 d + sigma2^2 tr(C^-1).
  return gaussian_log_density(prior, c1, x) - 0.5 * sigma2 * sigma2 * trace_inv;
}

Image grad_log_prior_lower_bound(const GaussianPrior& prior, double sigma1, const Image& x) {
  return grad_log_p_smoothed(SmoothedDensity{prior, sigma1}, x);
}

Image finite_diff_grad(const ScalarField& f, const Image& x, double step) {
  if (!(step > 0.0)) throw ValueError("finite_diff_grad: step must be > 0");
  Image probe = x;
  Image g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double fp = f(probe);
    probe[i] = orig - step;
    const double fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw ValueError(fmt::format("finite_diff_grad: non-finite value at coordinate {}", i));
    }
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

Image gaussian_map_oracle(const Image& y, const DegradationOp& op, double sigma_n,
                          const GaussianOracleDenoiser& d) {
  if (!(sigma_n > 0.0)) throw ValueError("gaussian_map_oracle: sigma_n must be > 0");
  const GaussianPrior& prior = d.prior();
  if (prior.mean.shape() != op.latent_shape()) {
    throw ShapeError("gaussian_map_oracle: prior shape does not match the operator");
  }
  if (y.shape() != op.observed_shape()) {
    throw ShapeError("gaussian_map_oracle: observation shape does not match the operator");
  }
  const double inv_var = 1.0 / (sigma_n * sigma_n);
  const Image inv_cov = reciprocal(smoothed_spectrum(prior, d.sigma()));

  if (op.scale() == 1 && !op.mask()) {
    const std::size_t h = y.height();
    const std::size_t w = y.width();
    const auto kf = spectral::transfer_function(op.kernel(), h, w);
    Image out(y.shape());
    for (std::size_t c = 0; c < y.channels(); ++c) {
      const auto yf = spectral::forward(y.plane(c), h, w);
      const auto mf = spectral::forward(prior.mean.plane(c), h, w);
      const auto ic = inv_cov.plane(c);
      std::vector<spectral::Complex> xf(yf.size());
      for (std::size_t i = 0; i < xf.size(); ++i) {
        const double denom = std::norm(kf[i]) * inv_var + ic[i];
        if (!(denom > 0.0)) throw Error("gaussian_map_oracle: singular frequency");
        xf[i] = (std::conj(kf[i]) * yf[i] * inv_var + mf[i] * ic[i]) / denom;
      }
      const auto back = spectral::inverse_real(xf, h, w);
      std::copy(back.begin(), back.end(), out.plane(c).begin());
    }
    return out;
  }

  // Conjugate gradients on the symmetric positive definite normal equations.
  Image b = op.adjoint(y);
  b *= inv_var;
  b += spectral::filter(prior.mean, inv_cov);
  Image x = prior.mean;
  Image r = b - normal_operator(x, op, inv_var, inv_cov);
  Image p = r;
  double rr = squared_norm(r);
  const double target = 1e-10 * norm(b);
  for (std::size_t it = 0; it < 10 * x.size() && std::sqrt(rr) > target; ++it) {
    const Image hp = normal_operator(p, op, inv_var, inv_cov);
    const double php = dot(p, hp);
    if (!(php > 0.0)) throw Error("gaussian_map_oracle: normal equations are singular");
    const double step = rr / php;
    axpy(step, p, x);
    axpy(-step, hp, r);
    const double rr_next = squared_norm(r);
    p *= rr_next / rr;
    p += r;
    rr = rr_next;
  }
  if (std::sqrt(rr) > target) throw Error("gaussian_map_oracle: conjugate gradients stalled");
  return x;
}

Image map_normal_residual(const Image& x, const Image& y, const DegradationOp& op,
                          double sigma_n, const GaussianOracleDenoiser& d) {
  const double inv_var = 1.0 / (sigma_n * sigma_n);
  const Image inv_cov = reciprocal(smoothed_spectrum(d.prior(), d.sigma()));
  Image b = op.adjoint(y);
  b *= inv_var;
  b += spectral::filter(d.prior().mean, inv_cov);
  return normal_operator(x, op, inv_var, inv_cov) - b;
}

double gmm_posterior_mean_quadrature(const GmmPrior& prior, double sigma, double x) {
  prior.validate();
  if (!(sigma > 0.0)) throw ValueError("gmm_posterior_mean_quadrature: sigma must be > 0");
  const auto weight = [&](double eta) { return gauss(eta, sigma) * base_density(prior, x - eta); };
  const double num = integrate_eta([&](double eta) { return weight(eta) * eta; }, prior, sigma, x);
  const double den = integrate_eta(weight, prior, sigma, x);
  if (!(den > 0.0)) throw Error("gmm_posterior_mean_quadrature: vanishing evidence");
  return x - num / den;
}

double gmm_smoothed_density_quadrature(const GmmPrior& prior, double sigma, double x) {
  prior.validate();
  if (!(sigma > 0.0)) throw ValueError("gmm_smoothed_density_quadrature: sigma must be > 0");
  // int g(eta) p(x + eta): substitute eta -> -eta to reuse the split points.
  return integrate_eta([&](double eta) { return gauss(eta, sigma) * base_density(prior, x - eta); },
                       prior, sigma, x);
}

}  // namespace dmsp
