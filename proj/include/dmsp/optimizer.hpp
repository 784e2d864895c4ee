#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmsp/data_terms.hpp"
#include "dmsp/denoiser.hpp"
#include "dmsp/error.hpp"
#include "dmsp/image.hpp"
#include "dmsp/operators.hpp"
#include "dmsp/prior.hpp"

namespace dmsp {

enum class PriorWeightProfile : std::uint8_t {
  Constant,
  LinearDecay,  // 1 at the first iteration, 0 at the last
};

/// From iteration `start` (0-based) on, the non-blind data term uses `sigma_n`.
struct NoisePhase {
  std::size_t start = 0;
  double sigma_n = 0.0;
};

/// Hyperparameters of the momentum descent.
///
/// Image step sizes are expressed on a 0..intensity_scale intensity axis
/// while iterates live in [0,1]; the applied image step is
/// alpha / intensity_scale^2, which reproduces a descent run on the wider
/// axis exactly. Kernel steps are scale-free.
struct Schedule {
  std::size_t iterations = 300;
  double alpha = 0.1;
  double mu = 0.9;
  double alpha_k = 0.005;
  double mu_k = 0.995;
  double intensity_scale = 255.0;
  PriorWeightProfile prior_weight = PriorWeightProfile::Constant;
  std::vector<NoisePhase> sigma_n_phases;
  /// Iterates are clamped to this range after every image step.
  std::optional<std::pair<double, double>> clamp = std::pair{-0.25, 1.25};

  static Schedule non_blind_defaults();
  static Schedule blind_defaults();

  void validate() const;
  double image_step() const { return alpha / (intensity_scale * intensity_scale); }
  double prior_weight_at(std::size_t t) const;
  std::optional<double> sigma_n_at(std::size_t t) const;
};

struct TraceEntry {
  std::size_t t = 0;
  double lambda = 0.0;
  double data_grad_norm = 0.0;
  double prior_grad_norm = 0.0;
  double step_norm = 0.0;
  double kernel_step_norm = 0.0;
  double sigma_n_estimate = 0.0;
  double data_objective = 0.0;  // negated data term at the pre-step iterate
  bool operator==(const TraceEntry&) const = default;
};

struct Trace {
  double alpha = 0.0;
  double mu = 0.0;
  double alpha_k = 0.0;
  double mu_k = 0.0;
  bool blind = false;
  std::vector<TraceEntry> entries;

  /// One JSON object per line per iteration:
  /// {t, lambda, data_grad_norm, prior_grad_norm, step_norm, sigma_n_estimate}.
  std::string to_json_lines() const;
  bool operator==(const Trace&) const = default;
};

struct OptimizerState {
  Image x;
  Image u_bar;
  Kernel k;
  Kernel v_bar;
  std::size_t t = 0;
  Trace trace;

  /// Zero running steps, t = 0.
  static OptimizerState start(Image x0, Kernel k0);
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration, Image last_x, Kernel last_k)
      : Error(what), iteration_(iteration), last_x_(std::move(last_x)), last_k_(std::move(last_k)) {}
  std::size_t iteration() const { return iteration_; }
  const Image& last_finite_x() const { return last_x_; }
  const Kernel& last_finite_k() const { return last_k_; }

 private:
  std::size_t iteration_;
  Image last_x_;
  Kernel last_k_;
};

/// u = data_grad - prior_grad;  u_bar = mu u_bar - a u;  x += u_bar, where
/// data_grad is the gradient of the negated data term and prior_grad the
/// gradient of the image log-likelihood. Increments t. Returns |u_bar|.
double step_image(OptimizerState& state, const Image& data_grad, const Image& prior_grad,
                  const Schedule& sched);

/// max(k, 0) then divide by the l1 norm.
Kernel project_kernel(const Kernel& k);

/// Kernel gradient as fed to step_kernel by run(): mean tap removed, then
/// divided by the observation count N.
Kernel kernel_step_direction(const Kernel& kernel_grad, std::size_t observed_count);

/// v_bar = mu_k v_bar - alpha_k v;  k = project(k + v_bar). Returns |v_bar|.
double step_kernel(OptimizerState& state, const Kernel& kernel_grad, const Schedule& sched);

struct Problem {
  Image y;
  DataTermConfig data;  // operator carries the known or initial kernel
  const Denoiser* denoiser = nullptr;
  PriorConfig prior;
  bool blind = false;
  Image x0;
};

struct RunResult {
  Image x;  // clamped to [0,1]
  Kernel k;
  Trace trace;
};

using IterationObserver = std::function<void(const OptimizerState&)>;

/// Runs `sched.iterations` steps. Per iteration: one prior-gradient sample,
/// the data gradient at the pre-step iterate, the image step, and in blind
/// mode the kernel step using the pre-step iterate.
RunResult run(const Problem& problem, const Schedule& sched, Rng& rng,
              const IterationObserver& observer = {});

}  // namespace dmsp
