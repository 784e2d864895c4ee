#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmsp/denoiser.hpp"
#include "dmsp/error.hpp"
#include "dmsp/image.hpp"
#include "dmsp/operators.hpp"
#include "dmsp/optimizer.hpp"
#include "dmsp/prior.hpp"

namespace dmsp {

/// Invalid combination of job options; maps to exit status 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Periodic bilinear interpolation onto a grid `factor` times finer. Samples
/// at multiples of `factor` reproduce the input exactly.
Image bilinear_upsample(const Image& y, std::size_t factor);

/// Keeps observed samples and fills the rest of every channel by normalized
/// convolution with the bilinear tent [1 2 1; 2 4 2; 1 2 1] / 4.
Image bilinear_demosaic(const Image& mosaic, const Image& mask);

/// A^T y clamped to [0,1].
Image deblur_init(const Image& y, const DegradationOp& op);

/// Centered Gaussian with std = width / 4.
Kernel initial_kernel(std::size_t height, std::size_t width);

/// Gaussian with std 0.5 * scale, truncated at 4 std, normalized.
Kernel sr_kernel(std::size_t scale);

/// Analytic denoiser description read from JSON:
///   {"type": "gaussian", "mean": m, "variance": v, "correlation_length": l,
///    "floor_fraction": f, "sigma": s}
///   {"type": "gmm", "weights": [...], "means": [...], "variances": [...], "sigma": s}
/// `sigma` is optional and overrides the task's default denoiser level.
struct OracleSpec {
  enum class Kind : std::uint8_t { Gaussian, Gmm };
  Kind kind = Kind::Gaussian;
  double mean = 0.5;
  double variance = 0.01;
  double correlation_length = 3.0;
  double floor_fraction = 0.05;
  GmmPrior gmm;
  std::optional<double> sigma;
};

OracleSpec parse_oracle_spec(std::string_view json_text);
OracleSpec read_oracle_spec(const std::filesystem::path& path);

/// Builds the oracle for images of `shape` at denoiser level `sigma`.
std::unique_ptr<Denoiser> make_oracle(const OracleSpec& spec, Shape shape, double sigma);

enum class Task : std::uint8_t { Deblur, SuperResolution, Demosaic };

std::string_view to_string(Task t);

/// Denoiser levels used when neither the weights nor the oracle spec fix one.
inline constexpr double kDeblurDenoiserSigma = 11.0 / 255.0;
inline constexpr double kSrDenoiserSigma = 11.0 / 255.0;
inline constexpr double kDemosaicDenoiserSigma = 3.0 / 255.0;
inline constexpr double kSrDefaultSigmaN = 1.0 / 255.0;
inline constexpr double kSrSigmaNFloor = 1e-4;
inline constexpr double kDemosaicSigmaN1 = 2.5 / 255.0;
inline constexpr double kDemosaicSigmaN2 = 1.0 / 255.0;

struct JobSpec {
  Task task = Task::Deblur;
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> kernel;
  std::optional<std::filesystem::path> kernel_output;  // blind only
  std::optional<std::filesystem::path> reference;
  std::optional<std::filesystem::path> trace;
  std::optional<std::filesystem::path> weights;
  std::optional<std::filesystem::path> oracle;
  bool blind = false;
  bool noise_adaptive = false;
  std::optional<double> sigma_n;
  std::size_t scale = 2;
  BayerPattern pattern = BayerPattern::RGGB;
  std::size_t kernel_size = 15;
  PriorMode prior_mode = PriorMode::Stochastic;
  std::optional<std::size_t> iterations;
  std::optional<double> alpha;
  std::optional<double> mu;
  std::optional<double> alpha_k;
  std::optional<double> mu_k;
  std::uint64_t seed = 0;

  /// Checks option consistency without touching any file. Throws UsageError.
  void validate() const;
  /// Where a blind run writes its kernel: `kernel_output` or
  /// <output stem>.kernel.txt next to the output.
  std::filesystem::path kernel_output_path() const;
};

/// Task defaults with the job's overrides applied.
Schedule schedule_for(const JobSpec& spec);

struct JobMetrics {
  Task task = Task::Deblur;
  std::size_t iterations = 0;
  double sigma_n_estimate = 0.0;
  std::optional<double> psnr;        // restored vs reference
  std::optional<double> psnr_input;  // initialization vs reference
  double runtime_s = 0.0;

  /// Versioned JSON object on one line.
  std::string to_json() const;
};

struct JobResult {
  Image restored;
  Kernel kernel;
  Trace trace;
  JobMetrics metrics;
};

/// Reads inputs, restores, writes the output image (plus kernel and trace
/// when requested). On divergence the partial trace is written before the
/// DivergenceError propagates.
JobResult run_job(const JobSpec& spec);

/// Degrades and restores in memory, with no file access: the building block
/// of run_job, exposed for tests.
struct InMemoryJob {
  Image observed;
  std::optional<Kernel> kernel;
  const Denoiser* denoiser = nullptr;
};
JobResult restore(const JobSpec& spec, const InMemoryJob& job,
                  const IterationObserver& observer = {});

/// Default denoiser level for the task.
double default_denoiser_sigma(Task t);

}  // namespace dmsp
