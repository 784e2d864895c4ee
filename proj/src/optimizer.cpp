#include "dmsp/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

namespace dmsp {

Schedule Schedule::non_blind_defaults() { return Schedule{}; }

Schedule Schedule::blind_defaults() {
  Schedule s;
  s.iterations = 1000;
  s.alpha = 0.3;
  s.mu = 0.7;
  s.alpha_k = 0.005;
  s.mu_k = 0.995;
  return s;
}

void Schedule::validate() const {
  if (!(alpha > 0.0) || !(alpha_k > 0.0)) throw ValueError("Schedule: step sizes must be > 0");
  if (!(mu >= 0.0 && mu < 1.0) || !(mu_k >= 0.0 && mu_k < 1.0)) {
    throw ValueError("Schedule: momentum must lie in [0, 1)");
  }
  if (!(intensity_scale > 0.0)) throw ValueError("Schedule: intensity_scale must be > 0");
  for (std::size_t i = 0; i < sigma_n_phases.size(); ++i) {
    if (!(sigma_n_phases[i].sigma_n > 0.0)) throw ValueError("Schedule: phase sigma_n must be > 0");
    if (i > 0 && sigma_n_phases[i].start <= sigma_n_phases[i - 1].start) {
      throw ValueError("Schedule: sigma_n phases must have increasing start iterations");
    }
  }
  if (clamp && !(clamp->first < clamp->second)) throw ValueError("Schedule: empty clamp range");
}

double Schedule::prior_weight_at(std::size_t t) const {
  if (prior_weight == PriorWeightProfile::Constant || iterations <= 1) return 1.0;
  return static_cast<double>(iterations - 1 - std::min(t, iterations - 1)) /
         static_cast<double>(iterations - 1);
}

std::optional<double> Schedule::sigma_n_at(std::size_t t) const {
  std::optional<double> out;
  for (const NoisePhase& p : sigma_n_phases) {
    if (p.start <= t) out = p.sigma_n;
  }
  return out;
}

std::string Trace::to_json_lines() const {
  std::string out;
  for (const TraceEntry& e : entries) {
    nlohmann::ordered_json j;
    j["t"] = e.t;
    j["lambda"] = e.lambda;
    j["data_grad_norm"] = e.data_grad_norm;
    j["prior_grad_norm"] = e.prior_grad_norm;
    j["step_norm"] = e.step_norm;
    j["sigma_n_estimate"] = e.sigma_n_estimate;
    out += j.dump();
    out += '\n';
  }
  return out;
}

OptimizerState OptimizerState::start(Image x0, Kernel k0) {
  OptimizerState s;
  s.u_bar = Image(x0.shape(), 0.0);
  s.v_bar = Kernel(k0.height(), k0.width(), 0.0);
  s.x = std::move(x0);
  s.k = std::move(k0);
  return s;
}

double step_image(OptimizerState& state, const Image& data_grad, const Image& prior_grad,
                  const Schedule& sched) {
  require_same_shape(state.x, data_grad, "step_image");
  require_same_shape(state.x, prior_grad, "step_image");
  if (!data_grad.all_finite() || !prior_grad.all_finite()) {
    throw DivergenceError(fmt::format("non-finite gradient at iteration {}", state.t + 1),
                          state.t + 1, state.x, state.k);
  }
  const double a = sched.image_step();
  Image& ub = state.u_bar;
  for (std::size_t i = 0; i < ub.size(); ++i) {
    const double u = data_grad[i] - prior_grad[i];
    ub[i] = sched.mu * ub[i] - a * u;
  }
  Image next = state.x + ub;
  if (!next.all_finite()) {
    throw DivergenceError(fmt::format("non-finite iterate at iteration {}", state.t + 1),
                          state.t + 1, state.x, state.k);
  }
  state.x = std::move(next);
  ++state.t;
  return norm(ub);
}

Kernel project_kernel(const Kernel& k) {
  Kernel out = k;
  double total = 0.0;
  for (double& v : out.taps()) {
    if (!std::isfinite(v)) throw ValueError("project_kernel: non-finite tap");
    v = std::max(v, 0.0);
    total += v;
  }
  if (!(total > 0.0)) throw ValueError("project_kernel: no positive tap survives clipping");
  out *= 1.0 / total;
  return out;
}

Kernel kernel_step_direction(const Kernel& kernel_grad, std::size_t observed_count) {
  if (observed_count == 0) throw ValueError("kernel_step_direction: no observed samples");
  Kernel v = kernel_grad;
  const double mean = v.sum() / static_cast<double>(v.size());
  for (double& t : v.taps()) t -= mean;
  v *= 1.0 / static_cast<double>(observed_count);
  return v;
}

double step_kernel(OptimizerState& state, const Kernel& kernel_grad, const Schedule& sched) {
  if (kernel_grad.height() != state.k.height() || kernel_grad.width() != state.k.width()) {
    throw ShapeError("step_kernel: gradient shape does not match the kernel");
  }
  if (!kernel_grad.all_finite()) {
    throw DivergenceError(fmt::format("non-finite kernel gradient at iteration {}", state.t),
                          state.t, state.x, state.k);
  }
  double sq = 0.0;
  Kernel next = state.k;
  for (std::size_t i = 0; i < next.size(); ++i) {
    state.v_bar[i] = sched.mu_k * state.v_bar[i] - sched.alpha_k * kernel_grad[i];
    next[i] += state.v_bar[i];
    sq += state.v_bar[i] * state.v_bar[i];
  }
  state.k = project_kernel(next);
  return std::sqrt(sq);
}

RunResult run(const Problem& problem, const Schedule& sched, Rng& rng,
              const IterationObserver& observer) {
  sched.validate();
  problem.prior.validate();
  problem.data.validate();
  if (problem.denoiser == nullptr) throw ValueError("run: no denoiser");
  require_sigma_match(*problem.denoiser, problem.prior);
  if (problem.data.kind == DataTermKind::NoiseAdaptive &&
      std::abs(problem.data.sigma - problem.prior.sigma) > kSigmaTolerance) {
    throw SigmaMismatchError("run: data-term sigma differs from the prior smoothing sigma",
                             problem.prior.sigma, problem.data.sigma);
  }
  if (problem.blind && problem.data.kind != DataTermKind::NoiseAdaptive) {
    throw ValueError("run: kernel-blind restoration requires the noise-adaptive data term");
  }
  const DegradationOp& base_op = problem.data.op;
  if (problem.x0.shape() != base_op.latent_shape() || problem.y.shape() != base_op.observed_shape()) {
    throw ShapeError(fmt::format("run: x0 {} / y {} do not fit operator {} -> {}",
                                 to_string(problem.x0.shape()), to_string(problem.y.shape()),
                                 to_string(base_op.latent_shape()),
                                 to_string(base_op.observed_shape())));
  }

  OptimizerState state = OptimizerState::start(problem.x0, base_op.kernel());
  state.trace.alpha = sched.alpha;
  state.trace.mu = sched.mu;
  state.trace.alpha_k = sched.alpha_k;
  state.trace.mu_k = sched.mu_k;
  state.trace.blind = problem.blind;

  DataTermConfig data = problem.data;
  for (std::size_t it = 0; it < sched.iterations; ++it) {
    if (problem.blind && !(data.op.kernel() == state.k)) data.op = data.op.with_kernel(state.k);
    if (data.kind == DataTermKind::NonBlind) {
      if (auto s = sched.sigma_n_at(it)) data.sigma_n = *s;
    }

    PriorConfig prior = problem.prior;
    prior.weight *= sched.prior_weight_at(it);

    TraceEntry entry;
    entry.t = it + 1;

    const Image prior_g = prior_grad(state.x, *problem.denoiser, prior, rng);
    Image data_g(state.x.shape());
    std::optional<Kernel> kernel_g;
    if (data.kind == DataTermKind::NonBlind) {
      data_g = grad_nb(state.x, problem.y, data);
      entry.lambda = 1.0 / (data.sigma_n * data.sigma_n);
      entry.data_objective = objective_nb(state.x, problem.y, data);
    } else {
      entry.lambda = lambda_na(state.x, problem.y, state.k, data);
      data_g = data.op.adjoint(data.op.apply(state.x) - problem.y);
      data_g *= entry.lambda;
      entry.data_objective = objective_na(state.x, problem.y, state.k, data);
      if (problem.blind) kernel_g = kernel_grad(state.x, problem.y, state.k, data);
    }
    entry.sigma_n_estimate = estimate_sigma_n(state.x, problem.y, state.k, data);
    entry.data_grad_norm = norm(data_g);
    entry.prior_grad_norm = norm(prior_g);

    entry.step_norm = step_image(state, data_g, prior_g, sched);
    if (sched.clamp) state.x = clamp(std::move(state.x), sched.clamp->first, sched.clamp->second);
    if (kernel_g) {
      entry.kernel_step_norm =
          step_kernel(state, kernel_step_direction(*kernel_g, data.op.observed_count()), sched);
    }

    state.trace.entries.push_back(entry);
    if (observer) observer(state);
  }

  return RunResult{clamp(std::move(state.x), 0.0, 1.0), std::move(state.k), std::move(state.trace)};
}

}  // namespace dmsp
