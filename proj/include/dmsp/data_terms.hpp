#pragma once

#include <cstdint>

#include "dmsp/image.hpp"
#include "dmsp/operators.hpp"

namespace dmsp {

enum class DataTermKind : std::uint8_t { NonBlind, NoiseAdaptive };

/// Data-term setup. `sigma` is the prior smoothing std, which enters the
/// expected residual through the M sigma^2 |k|^2 term. N and M come from
/// `op` (live observation samples and latent samples).
struct DataTermConfig {
  DataTermKind kind;
  DegradationOp op;
  double sigma = 0.0;
  double sigma_n = 0.0;  // non-blind only

  static DataTermConfig non_blind(DegradationOp op, double sigma_n, double sigma = 0.0);
  static DataTermConfig noise_adaptive(DegradationOp op, double sigma);

  void validate() const;
};

/// |y - A x|^2 for the operator's own kernel.
double residual_energy(const Image& x, const Image& y, const DegradationOp& op);

/// |y - Ax|^2 / (2 sigma_n^2): the non-blind data term negated, x-dependent part.
double objective_nb(const Image& x, const Image& y, const DataTermConfig& cfg);

/// (N/2) log(|y - A_k x|^2 + M sigma^2 |k|^2): the noise-adaptive data term negated.
double objective_na(const Image& x, const Image& y, const Kernel& k, const DataTermConfig& cfg);

/// (1/sigma_n^2) A^T (A x - y).
Image grad_nb(const Image& x, const Image& y, const DataTermConfig& cfg);

/// N / (|y - A_k x|^2 + M sigma^2 |k|^2). Throws ExactFitError when the
/// denominator vanishes.
double lambda_na(const Image& x, const Image& y, const Kernel& k, const DataTermConfig& cfg);

/// lambda A^T (A x - y) with lambda evaluated at x and the operator's kernel.
Image grad_na(const Image& x, const Image& y, const DataTermConfig& cfg);

/// sqrt((|y - A_k x|^2 + M sigma^2 |k|^2) / N): the optimal noise std for the
/// current estimate.
double estimate_sigma_n(const Image& x, const Image& y, const Kernel& k, const DataTermConfig& cfg);

/// Gradient of objective_na with respect to the kernel taps:
///   lambda (X^T (A_k x - y) + M sigma^2 k).
Kernel kernel_grad(const Image& x, const Image& y, const Kernel& k, const DataTermConfig& cfg);

}  // namespace dmsp
