#include "dmsp/data_terms.hpp"

#include <cmath>

#include <fmt/format.h>

#include "dmsp/error.hpp"

namespace dmsp {
namespace {

bool same_kernel(const Kernel& a, const Kernel& b) { return a == b; }

DegradationOp op_for(const DataTermConfig& cfg, const Kernel& k) {
  return same_kernel(cfg.op.kernel(), k) ? cfg.op : cfg.op.with_kernel(k);
}

void require_kind(const DataTermConfig& cfg, DataTermKind kind, const char* where) {
  cfg.validate();
  if (cfg.kind != kind) {
    throw ValueError(fmt::format("{}: data term configured as {}", where,
                                 cfg.kind == DataTermKind::NonBlind ? "non-blind"
                                                                    : "noise-adaptive"));
  }
}

void require_observation(const Image& x, const Image& y, const DegradationOp& op,
                         const char* where) {
  if (x.shape() != op.latent_shape() || y.shape() != op.observed_shape()) {
    throw ShapeError(fmt::format("{}: x {} / y {} do not fit operator {} -> {}", where,
                                 to_string(x.shape()), to_string(y.shape()),
                                 to_string(op.latent_shape()), to_string(op.observed_shape())));
  }
}

double na_denominator(double residual, const Kernel& k, const DataTermConfig& cfg) {
  return residual + static_cast<double>(cfg.op.latent_count()) * cfg.sigma * cfg.sigma *
                        k.squared_norm();
}

}  // namespace

DataTermConfig DataTermConfig::non_blind(DegradationOp op, double sigma_n, double sigma) {
  DataTermConfig cfg{DataTermKind::NonBlind, std::move(op), sigma, sigma_n};
  cfg.validate();
  return cfg;
}

DataTermConfig DataTermConfig::noise_adaptive(DegradationOp op, double sigma) {
  DataTermConfig cfg{DataTermKind::NoiseAdaptive, std::move(op), sigma, 0.0};
  cfg.validate();
  return cfg;
}

void DataTermConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ValueError("DataTermConfig: sigma must be finite and >= 0");
  }
  if (kind == DataTermKind::NonBlind && (!(sigma_n > 0.0) || !std::isfinite(sigma_n))) {
    throw ValueError(fmt::format("DataTermConfig: non-blind needs sigma_n > 0, got {}", sigma_n));
  }
  if (op.observed_count() == 0) throw ValueError("DataTermConfig: operator observes no samples");
}

double residual_energy(const Image& x, const Image& y, const DegradationOp& op) {
  require_observation(x, y, op, "residual_energy");
  return squared_norm(op.apply(x) - y);
}

double objective_nb(const Image& x, const Image& y, const DataTermConfig& cfg) {
  cfg.validate();
  return residual_energy(x, y, cfg.op) / (2.0 * cfg.sigma_n * cfg.sigma_n);
}

double objective_na(const Image& x, const Image& y, const Kernel& k, const DataTermConfig& cfg) {
  cfg.validate();
  const double d = na_denominator(residual_energy(x, y, op_for(cfg, k)), k, cfg);
  return 0.5 * static_cast<double>(cfg.op.observed_count()) * std::log(d);
}

Image grad_nb(const Image& x, const Image& y, const DataTermConfig& cfg) {
  require_kind(cfg, DataTermKind::NonBlind, "grad_nb");
  require_observation(x, y, cfg.op, "grad_nb");
  Image g = cfg.op.adjoint(cfg.op.apply(x) - y);
  g *= 1.0 / (cfg.sigma_n * cfg.sigma_n);
  return g;
}

double lambda_na(const Image& x, const Image& y, const Kernel& k, const DataTermConfig& cfg) {
  require_kind(cfg, DataTermKind::NoiseAdaptive, "lambda_na");
  const double d = na_denominator(residual_energy(x, y, op_for(cfg, k)), k, cfg);
  if (!(d > 0.0)) {
    throw ExactFitError("lambda_na: residual and kernel term are both zero (exact fit with sigma=0)");
  }
  return static_cast<double>(cfg.op.observed_count()) / d;
}

Image grad_na(const Image& x, const Image& y, const DataTermConfig& cfg) {
  const double lambda = lambda_na(x, y, cfg.op.kernel(), cfg);
  Image g = cfg.op.adjoint(cfg.op.apply(x) - y);
  g *= lambda;
  return g;
}

double estimate_sigma_n(const Image& x, const Image& y, const Kernel& k, const DataTermConfig& cfg) {
  cfg.validate();
  const double d = na_denominator(residual_energy(x, y, op_for(cfg, k)), k, cfg);
  return std::sqrt(d / static_cast<double>(cfg.op.observed_count()));
}

Kernel kernel_grad(const Image& x, const Image& y, const Kernel& k, const DataTermConfig& cfg) {
  require_kind(cfg, DataTermKind::NoiseAdaptive, "kernel_grad");
  if (k.height() != cfg.op.kernel().height() || k.width() != cfg.op.kernel().width()) {
    throw ShapeError(fmt::format("kernel_grad: kernel {}x{} does not match support {}x{}",
                                 k.height(), k.width(), cfg.op.kernel().height(),
                                 cfg.op.kernel().width()));
  }
  const DegradationOp op = op_for(cfg, k);
  require_observation(x, y, op, "kernel_grad");
  const Image residual = op.apply(x) - y;
  const double d = na_denominator(squared_norm(residual), k, cfg);
  if (!(d > 0.0)) {
    throw ExactFitError("kernel_grad: residual and kernel term are both zero (exact fit with sigma=0)");
  }
  const double lambda = static_cast<double>(cfg.op.observed_count()) / d;
  Kernel g = op.kernel_adjoint(x, residual);
  Kernel reg = k;
  reg *= static_cast<double>(cfg.op.latent_count()) * cfg.sigma * cfg.sigma;
  g += reg;
  g *= lambda;
  return g;
}

}  // namespace dmsp
