#include "dmsp/tasks.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "dmsp/cnn.hpp"
#include "dmsp/image_io.hpp"
#include "dmsp/metrics.hpp"

namespace dmsp {
namespace {

using nlohmann::json;

double number_field(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ValueError(fmt::format("oracle spec: '{}' must be a number", key));
  return j[key].get<double>();
}

std::vector<double> array_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw ValueError(fmt::format("oracle spec: '{}' must be an array", key));
  }
  std::vector<double> out;
  for (const json& v : j[key]) {
    if (!v.is_number()) throw ValueError(fmt::format("oracle spec: '{}' holds a non-number", key));
    out.push_back(v.get<double>());
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  f << text;
  if (!f) throw IoError(fmt::format("write to {} failed", path.string()));
}

Image observed_mosaic(const Image& input, const Image& mask) {
  if (input.channels() == 3) return apply_mask(input, mask);
  if (input.channels() != 1) {
    throw ShapeError(fmt::format("demosaic: expected a 1-channel mosaic or a 3-channel image, got {}",
                                 to_string(input.shape())));
  }
  Image out(mask.shape());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < input.height(); ++y) {
      for (std::size_t x = 0; x < input.width(); ++x) {
        out.at(c, y, x) = input.at(0, y, x) * mask.at(c, y, x);
      }
    }
  }
  return out;
}

}  // namespace

Image bilinear_upsample(const Image& y, std::size_t factor) {
  if (factor == 0) throw ValueError("bilinear_upsample: factor must be >= 1");
  const std::size_t h = y.height();
  const std::size_t w = y.width();
  Image out(Shape{y.channels(), h * factor, w * factor});
  const double s = static_cast<double>(factor);
  for (std::size_t c = 0; c < y.channels(); ++c) {
    for (std::size_t i = 0; i < h * factor; ++i) {
      const std::size_t i0 = i / factor;
      const std::size_t i1 = (i0 + 1) % h;
      const double ti = static_cast<double>(i % factor) / s;
      for (std::size_t j = 0; j < w * factor; ++j) {
        const std::size_t j0 = j / factor;
        const std::size_t j1 = (j0 + 1) % w;
        const double tj = static_cast<double>(j % factor) / s;
        out.at(c, i, j) = (1 - ti) * ((1 - tj) * y.at(c, i0, j0) + tj * y.at(c, i0, j1)) +
                          ti * ((1 - tj) * y.at(c, i1, j0) + tj * y.at(c, i1, j1));
      }
    }
  }
  return out;
}

Image bilinear_demosaic(const Image& mosaic, const Image& mask) {
  require_same_shape(mosaic, mask, "bilinear_demosaic");
  const Kernel tent(3, 3, {0.25, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 0.25});
  const Image num = convolve(apply_mask(mosaic, mask), tent);
  const Image den = convolve(mask, tent);
  Image out = mosaic;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i] != 0.0) continue;
    if (!(den[i] > 0.0)) throw ValueError("bilinear_demosaic: a sample has no observed neighbour");
    out[i] = num[i] / den[i];
  }
  return out;
}

Image deblur_init(const Image& y, const DegradationOp& op) { return clamp(op.adjoint(y), 0.0, 1.0); }

Kernel initial_kernel(std::size_t height, std::size_t width) {
  return Kernel::gaussian(height, width, static_cast<double>(width) / 4.0);
}

Kernel sr_kernel(std::size_t scale) {
  if (scale == 0) throw ValueError("sr_kernel: scale must be >= 1");
  const double sd = 0.5 * static_cast<double>(scale);
  const auto half = static_cast<std::size_t>(std::ceil(4.0 * sd));
  return Kernel::gaussian(2 * half + 1, 2 * half + 1, sd);
}

OracleSpec parse_oracle_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValueError(fmt::format("oracle spec: {}", e.what()));
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ValueError("oracle spec: expected an object with a string 'type'");
  }
  OracleSpec spec;
  const std::string type = j["type"].get<std::string>();
  if (type == "gaussian") {
    spec.kind = OracleSpec::Kind::Gaussian;
    spec.mean = number_field(j, "mean", spec.mean);
    spec.variance = number_field(j, "variance", spec.variance);
    spec.correlation_length = number_field(j, "correlation_length", spec.correlation_length);
    spec.floor_fraction = number_field(j, "floor_fraction", spec.floor_fraction);
    if (!(spec.variance > 0.0) || !(spec.correlation_length > 0.0) ||
        !(spec.floor_fraction > 0.0)) {
      throw ValueError("oracle spec: variance, correlation_length and floor_fraction must be > 0");
    }
  } else if (type == "gmm") {
    spec.kind = OracleSpec::Kind::Gmm;
    spec.gmm.weights = array_field(j, "weights");
    spec.gmm.means = array_field(j, "means");
    spec.gmm.variances = array_field(j, "variances");
    spec.gmm.validate();
  } else {
    throw ValueError(fmt::format("oracle spec: unknown type '{}'", type));
  }
  if (j.contains("sigma")) {
    spec.sigma = number_field(j, "sigma", 0.0);
    if (!(*spec.sigma > 0.0)) throw ValueError("oracle spec: sigma must be > 0");
  }
  return spec;
}

OracleSpec read_oracle_spec(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot open oracle spec {}", path.string()));
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_oracle_spec(ss.str());
}

std::unique_ptr<Denoiser> make_oracle(const OracleSpec& spec, Shape shape, double sigma) {
  if (spec.kind == OracleSpec::Kind::Gmm) return std::make_unique<GmmOracleDenoiser>(spec.gmm, sigma);
  GaussianPrior prior{Image(shape, spec.mean),
                      stationary_spectrum(shape, spec.variance, spec.correlation_length,
                                          spec.floor_fraction)};
  return std::make_unique<GaussianOracleDenoiser>(std::move(prior), sigma);
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::Deblur: return "deblur";
    case Task::SuperResolution: return "sr";
    case Task::Demosaic: return "demosaic";
  }
  return "unknown";
}

double default_denoiser_sigma(Task t) {
  switch (t) {
    case Task::Deblur: return kDeblurDenoiserSigma;
    case Task::SuperResolution: return kSrDenoiserSigma;
    case Task::Demosaic: return kDemosaicDenoiserSigma;
  }
  return kDeblurDenoiserSigma;
}

void JobSpec::validate() const {
  if (input.empty()) throw UsageError("--input is required");
  if (output.empty()) throw UsageError("--output is required");
  if (weights && oracle) throw UsageError("--weights and --oracle are mutually exclusive");
  if (!weights && !oracle) throw UsageError("a denoiser is required: pass --weights or --oracle");
  if (noise_adaptive && sigma_n) throw UsageError("--noise-adaptive and --sigma-n are mutually exclusive");
  if (sigma_n && !(*sigma_n >= 0.0 && std::isfinite(*sigma_n))) {
    throw UsageError("--sigma-n must be finite and >= 0");
  }
  if (iterations && *iterations > 1000000) throw UsageError("--iterations is unreasonably large");
  const auto positive = [](const std::optional<double>& v) { return !v || (*v > 0.0 && std::isfinite(*v)); };
  const auto momentum = [](const std::optional<double>& v) { return !v || (*v >= 0.0 && *v < 1.0); };
  if (!positive(alpha) || !positive(alpha_k)) throw UsageError("step sizes must be > 0");
  if (!momentum(mu) || !momentum(mu_k)) throw UsageError("momentum must lie in [0, 1)");

  switch (task) {
    case Task::Deblur:
      if (blind) {
        if (kernel) throw UsageError("--kernel and --blind are mutually exclusive");
        if (sigma_n) throw UsageError("--blind requires the noise-adaptive data term; drop --sigma-n");
        if (kernel_size < 1 || kernel_size % 2 == 0) throw UsageError("--kernel-size must be odd");
      } else if (!kernel) {
        throw UsageError("deblur needs --kernel unless --blind is given");
      }
      if (sigma_n && *sigma_n == 0.0) throw UsageError("--sigma-n must be > 0 for deblurring");
      break;
    case Task::SuperResolution:
      if (scale < 1 || scale > 5) throw UsageError("--scale must be an integer in 1..5");
      if (blind || kernel) throw UsageError("sr uses its built-in anti-alias kernel");
      if (noise_adaptive) throw UsageError("sr runs with a fixed noise level");
      break;
    case Task::Demosaic:
      if (blind || kernel) throw UsageError("demosaic takes no kernel");
      if (noise_adaptive) throw UsageError("demosaic runs with its two-phase fixed noise schedule");
      if (sigma_n && *sigma_n == 0.0) throw UsageError("--sigma-n must be > 0 for demosaicing");
      break;
  }
  if (kernel_output && !blind) throw UsageError("--kernel-output only applies to --blind runs");
}

std::filesystem::path JobSpec::kernel_output_path() const {
  if (kernel_output) return *kernel_output;
  std::filesystem::path p = output;
  p.replace_extension(".kernel.txt");
  return p;
}

Schedule schedule_for(const JobSpec& spec) {
  Schedule s = spec.blind ? Schedule::blind_defaults() : Schedule::non_blind_defaults();
  if (spec.task == Task::SuperResolution) s.prior_weight = PriorWeightProfile::LinearDecay;
  if (spec.iterations) s.iterations = *spec.iterations;
  if (spec.alpha) s.alpha = *spec.alpha;
  if (spec.mu) s.mu = *spec.mu;
  if (spec.alpha_k) s.alpha_k = *spec.alpha_k;
  if (spec.mu_k) s.mu_k = *spec.mu_k;
  if (spec.task == Task::Demosaic && !spec.sigma_n) {
    s.sigma_n_phases = {NoisePhase{0, kDemosaicSigmaN1}, NoisePhase{s.iterations / 2, kDemosaicSigmaN2}};
    if (s.sigma_n_phases[1].start == 0) s.sigma_n_phases.erase(s.sigma_n_phases.begin());
  }
  return s;
}

std::string JobMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["task"] = std::string(to_string(task));
  j["iterations"] = iterations;
  j["sigma_n_estimate"] = sigma_n_estimate;
  if (psnr) j["psnr"] = std::isfinite(*psnr) ? json(*psnr) : json("inf");
  if (psnr_input) j["psnr_input"] = std::isfinite(*psnr_input) ? json(*psnr_input) : json("inf");
  j["runtime_s"] = runtime_s;
  return j.dump();
}

JobResult restore(const JobSpec& spec, const InMemoryJob& job, const IterationObserver& observer) {
  spec.validate();
  if (job.denoiser == nullptr) throw ValueError("restore: no denoiser");
  const Image& y = job.observed;
  const Schedule sched = schedule_for(spec);
  PriorConfig prior = spec.prior_mode == PriorMode::Deterministic
                          ? PriorConfig::deterministic(job.denoiser->sigma())
                          : PriorConfig::stochastic_for_denoiser(job.denoiser->sigma());

  Problem problem{y, DataTermConfig::noise_adaptive(DegradationOp(y.shape(), Kernel::delta()), prior.sigma),
                  job.denoiser, prior, false, Image()};
  switch (spec.task) {
    case Task::Deblur: {
      Kernel k = spec.blind ? initial_kernel(spec.kernel_size, spec.kernel_size)
                            : (job.kernel ? *job.kernel : throw UsageError("deblur needs a kernel"));
      DegradationOp op(y.shape(), std::move(k));
      problem.x0 = deblur_init(y, op);
      problem.data = spec.sigma_n ? DataTermConfig::non_blind(op, *spec.sigma_n, prior.sigma)
                                  : DataTermConfig::noise_adaptive(op, prior.sigma);
      problem.blind = spec.blind;
      break;
    }
    case Task::SuperResolution: {
      const Shape latent{y.channels(), y.height() * spec.scale, y.width() * spec.scale};
      DegradationOp op(latent, sr_kernel(spec.scale), spec.scale);
      const double sn = std::max(spec.sigma_n.value_or(kSrDefaultSigmaN), kSrSigmaNFloor);
      problem.data = DataTermConfig::non_blind(op, sn, prior.sigma);
      problem.x0 = clamp(bilinear_upsample(y, spec.scale), 0.0, 1.0);
      break;
    }
    case Task::Demosaic: {
      const Image mask = bayer_mask(spec.pattern, y.height(), y.width());
      const Image mosaic = observed_mosaic(y, mask);
      DegradationOp op(mask.shape(), Kernel::delta(), 1, mask);
      problem.y = mosaic;
      problem.data = DataTermConfig::non_blind(op, spec.sigma_n.value_or(kDemosaicSigmaN1), prior.sigma);
      problem.x0 = clamp(bilinear_demosaic(mosaic, mask), 0.0, 1.0);
      break;
    }
  }

  Rng rng(spec.seed);
  RunResult r = run(problem, sched, rng, observer);
  JobResult out;
  out.metrics.task = spec.task;
  out.metrics.iterations = sched.iterations;
  out.metrics.sigma_n_estimate =
      estimate_sigma_n(r.x, problem.y, r.k, problem.data.kind == DataTermKind::NoiseAdaptive
                                                  ? problem.data
                                                  : DataTermConfig::noise_adaptive(problem.data.op, prior.sigma));
  out.restored = std::move(r.x);
  out.kernel = std::move(r.k);
  out.trace = std::move(r.trace);
  return out;
}

JobResult run_job(const JobSpec& spec) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const Image input = io::read_image(spec.input);
  std::optional<Kernel> kernel;
  if (spec.kernel) kernel = io::read_kernel(*spec.kernel);
  std::optional<Image> reference;
  if (spec.reference) reference = io::read_image(*spec.reference);

  const Shape latent = spec.task == Task::SuperResolution
                           ? Shape{input.channels(), input.height() * spec.scale, input.width() * spec.scale}
                       : spec.task == Task::Demosaic ? Shape{3, input.height(), input.width()}
                                                     : input.shape();
  std::unique_ptr<Denoiser> denoiser;
  if (spec.weights) {
    CnnWeights w = read_weights_file(*spec.weights);
    w.validate_for(latent.channels);
    denoiser = std::make_unique<CnnDenoiser>(std::move(w));
  } else {
    const OracleSpec os = read_oracle_spec(*spec.oracle);
    denoiser = make_oracle(os, latent, os.sigma.value_or(default_denoiser_sigma(spec.task)));
  }
  if (reference && reference->shape() != latent) {
    throw ShapeError(fmt::format("reference {} does not match the restored shape {}",
                                 to_string(reference->shape()), to_string(latent)));
  }

  Trace partial;
  const auto observer = [&](const OptimizerState& s) { partial.entries.push_back(s.trace.entries.back()); };
  JobResult result;
  try {
    result = restore(spec, InMemoryJob{input, kernel, denoiser.get()}, spec.trace ? observer : IterationObserver{});
  } catch (const DivergenceError&) {
    if (spec.trace) write_text(*spec.trace, partial.to_json_lines());
    throw;
  }

  io::write_image(spec.output, result.restored);
  if (spec.blind) io::write_kernel(spec.kernel_output_path(), result.kernel);
  if (spec.trace) write_text(*spec.trace, result.trace.to_json_lines());

  if (reference) {
    const std::size_t border = spec.task == Task::Demosaic ? 0 : default_psnr_border(result.kernel);
    result.metrics.psnr = psnr(result.restored, *reference, 1.0, border);
    Image init;
    if (spec.task == Task::SuperResolution) {
      init = clamp(bilinear_upsample(input, spec.scale), 0.0, 1.0);
    } else if (spec.task == Task::Demosaic) {
      const Image mask = bayer_mask(spec.pattern, input.height(), input.width());
      init = clamp(bilinear_demosaic(observed_mosaic(input, mask), mask), 0.0, 1.0);
    } else {
      init = input;
    }
    result.metrics.psnr_input = psnr(init, *reference, 1.0, border);
  }
  result.metrics.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace dmsp
