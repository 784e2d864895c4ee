#include "dmsp/prior.hpp"

#include <cmath>

#include <fmt/format.h>

#include "dmsp/error.hpp"

namespace dmsp {

PriorConfig PriorConfig::deterministic(double sigma) {
  PriorConfig cfg;
  cfg.sigma = sigma;
  cfg.sigma1 = sigma;
  cfg.sigma2 = 0.0;
  cfg.mode = PriorMode::Deterministic;
  return cfg;
}

PriorConfig PriorConfig::stochastic(double sigma) {
  PriorConfig cfg;
  cfg.sigma = sigma;
  cfg.sigma1 = sigma / std::sqrt(2.0);
  cfg.sigma2 = cfg.sigma1;
  cfg.mode = PriorMode::Stochastic;
  return cfg;
}

PriorConfig PriorConfig::stochastic_for_denoiser(double denoiser_sigma) {
  PriorConfig cfg;
  cfg.sigma1 = denoiser_sigma;
  cfg.sigma2 = denoiser_sigma;
  cfg.sigma = denoiser_sigma * std::sqrt(2.0);
  cfg.mode = PriorMode::Stochastic;
  return cfg;
}

void PriorConfig::validate() const {
  if (!(sigma > 0.0) || !(sigma1 > 0.0) || sigma2 < 0.0) {
    throw ValueError(fmt::format("PriorConfig: need sigma > 0, sigma1 > 0, sigma2 >= 0 "
                                 "(got {}, {}, {})",
                                 sigma, sigma1, sigma2));
  }
  if (std::abs(sigma1 * sigma1 + sigma2 * sigma2 - sigma * sigma) > 1e-12) {
    throw ValueError(fmt::format("PriorConfig: sigma1^2 + sigma2^2 = {} but sigma^2 = {}",
                                 sigma1 * sigma1 + sigma2 * sigma2, sigma * sigma));
  }
  if (mode == PriorMode::Deterministic && sigma2 != 0.0) {
    throw ValueError("PriorConfig: deterministic mode requires sigma2 = 0");
  }
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw ValueError("PriorConfig: weight must be finite and >= 0");
  }
}

void require_sigma_match(const Denoiser& d, const PriorConfig& cfg) {
  const double expected = cfg.denoiser_sigma();
  if (std::abs(d.sigma() - expected) > kSigmaTolerance) {
    throw SigmaMismatchError(fmt::format("denoiser sigma {} does not match required {}",
                                         d.sigma(), expected),
                             expected, d.sigma());
  }
}

Image prior_grad_deterministic(const Image& x, const Denoiser& d, const PriorConfig& cfg) {
  cfg.validate();
  require_sigma_match(d, cfg);
  Image g = d.denoise(x) - x;
  g *= cfg.weight / (cfg.sigma1 * cfg.sigma1);
  return g;
}

Image prior_grad_stochastic(const Image& x, const Denoiser& d, const PriorConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.mode != PriorMode::Stochastic) {
    throw ValueError("prior_grad_stochastic: config is in deterministic mode");
  }
  require_sigma_match(d, cfg);
  Image perturbed = x;
  add_gaussian_noise(perturbed, cfg.sigma2, rng);
  Image g = d.denoise(perturbed) - x;
  g *= cfg.weight / (cfg.sigma1 * cfg.sigma1);
  return g;
}

Image prior_grad(const Image& x, const Denoiser& d, const PriorConfig& cfg, Rng& rng) {
  return cfg.mode == PriorMode::Deterministic ? prior_grad_deterministic(x, d, cfg)
                                              : prior_grad_stochastic(x, d, cfg, rng);
}

}  // namespace dmsp
