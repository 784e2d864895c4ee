// restore: deblurring, super-resolution and demosaicing with a mean-shift prior.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dmsp/error.hpp"
#include "dmsp/optimizer.hpp"
#include "dmsp/tasks.hpp"
#include "dmsp/verify.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::vector<std::string> inputs;
  std::string output;
  std::string kernel;
  std::string kernel_output;
  std::string reference;
  std::string trace;
  std::string weights;
  std::string oracle;
  std::string metrics;
  std::string pattern = "RGGB";
  std::string prior_mode = "stochastic";
  bool blind = false;
  bool noise_adaptive = false;
  std::optional<double> sigma_n;
  std::size_t scale = 2;
  std::size_t kernel_size = 15;
  std::optional<std::size_t> iterations;
  std::optional<double> alpha;
  std::optional<double> mu;
  std::optional<double> alpha_k;
  std::optional<double> mu_k;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("restore");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("RESTORE_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept real level names.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--input", o.inputs, "Input image(s), .png or .pfm")->required();
  cmd->add_option("--output", o.output, "Output image, or a directory for several inputs")->required();
  cmd->add_option("--reference", o.reference, "Ground truth for PSNR reporting");
  cmd->add_option("--weights", o.weights, "DMSP weight file of the denoiser");
  cmd->add_option("--oracle", o.oracle, "JSON spec of an analytic oracle denoiser");
  cmd->add_option("--sigma-n", o.sigma_n, "Fixed noise std in [0,1] units");
  cmd->add_option("--iterations", o.iterations, "Gradient steps");
  cmd->add_option("--alpha", o.alpha, "Image step size (0-255 intensity units)");
  cmd->add_option("--mu", o.mu, "Image momentum");
  cmd->add_option("--seed", o.seed, "Seed of the prior noise");
  cmd->add_option("--trace", o.trace, "Per-iteration JSON lines");
  cmd->add_option("--metrics", o.metrics, "Also write the metrics JSON here");
  cmd->add_option("--prior-mode", o.prior_mode, "stochastic or deterministic")
      ->check(CLI::IsMember({"stochastic", "deterministic"}));
  cmd->add_option("--jobs", o.jobs, "Inputs restored concurrently")->check(CLI::Range(1, 256));
}

dmsp::JobSpec make_spec(dmsp::Task task, const Options& o, const fs::path& input, const fs::path& output) {
  dmsp::JobSpec s;
  s.task = task;
  s.input = input;
  s.output = output;
  s.kernel = opt_path(o.kernel);
  s.kernel_output = opt_path(o.kernel_output);
  s.reference = opt_path(o.reference);
  s.trace = opt_path(o.trace);
  s.weights = opt_path(o.weights);
  s.oracle = opt_path(o.oracle);
  s.blind = o.blind;
  s.noise_adaptive = o.noise_adaptive;
  s.sigma_n = o.sigma_n;
  s.scale = o.scale;
  s.kernel_size = o.kernel_size;
  s.prior_mode = o.prior_mode == "deterministic" ? dmsp::PriorMode::Deterministic
                                                 : dmsp::PriorMode::Stochastic;
  s.iterations = o.iterations;
  s.alpha = o.alpha;
  s.mu = o.mu;
  s.alpha_k = o.alpha_k;
  s.mu_k = o.mu_k;
  s.seed = o.seed;
  try {
    s.pattern = dmsp::parse_bayer_pattern(o.pattern);
  } catch (const dmsp::Error& e) {
    throw dmsp::UsageError(e.what());
  }
  return s;
}

fs::path suffixed(const fs::path& p, const std::string& stem_suffix) {
  fs::path out = p;
  out.replace_filename(p.stem().string() + stem_suffix + p.extension().string());
  return out;
}

// One spec per input; several inputs write into the --output directory and
// get per-input trace and metrics files.
std::vector<dmsp::JobSpec> expand(dmsp::Task task, const Options& o) {
  std::vector<dmsp::JobSpec> specs;
  if (o.inputs.size() == 1) {
    specs.push_back(make_spec(task, o, o.inputs.front(), o.output));
  } else {
    if (!o.reference.empty()) throw dmsp::UsageError("--reference needs a single --input");
    if (!o.kernel_output.empty()) throw dmsp::UsageError("--kernel-output needs a single --input");
    for (const std::string& in : o.inputs) {
      const fs::path name = fs::path(in).filename();
      dmsp::JobSpec s = make_spec(task, o, in, fs::path(o.output) / name);
      if (s.trace) s.trace = suffixed(*s.trace, "." + name.stem().string());
      specs.push_back(std::move(s));
    }
  }
  for (const dmsp::JobSpec& s : specs) s.validate();
  return specs;
}

int run_tasks(dmsp::Task task, const Options& o) {
  const std::vector<dmsp::JobSpec> specs = expand(task, o);
  if (specs.size() > 1) fs::create_directories(o.output);

  std::vector<std::string> metrics(specs.size());
  std::vector<std::string> errors(specs.size());
  std::vector<int> status(specs.size(), kExitOk);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      const dmsp::JobSpec& s = specs[i];
      try {
        spdlog::info("{} {} -> {}", to_string(task), s.input.string(), s.output.string());
        const dmsp::JobResult r = dmsp::run_job(s);
        metrics[i] = r.metrics.to_json();
      } catch (const dmsp::DivergenceError& e) {
        errors[i] = s.trace ? fmt::format("{}: {} (trace: {})", s.input.string(), e.what(), s.trace->string())
                            : fmt::format("{}: {}", s.input.string(), e.what());
        status[i] = kExitFailure;
      } catch (const dmsp::UsageError& e) {
        errors[i] = fmt::format("{}: {}", s.input.string(), e.what());
        status[i] = kExitUsage;
      } catch (const std::exception& e) {
        errors[i] = fmt::format("{}: {}", s.input.string(), e.what());
        status[i] = kExitFailure;
      }
    }
  };
  const std::size_t threads = std::min(o.jobs, specs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  int code = kExitOk;
  std::string all_metrics;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (status[i] != kExitOk) {
      spdlog::error("{}", errors[i]);
      code = std::max(code, status[i]);
    } else {
      all_metrics += metrics[i] + "\n";
    }
  }
  std::cout << all_metrics;
  if (!o.metrics.empty()) {
    std::ofstream f(o.metrics, std::ios::binary);
    f << all_metrics;
    if (!f) {
      spdlog::error("cannot write metrics to {}", o.metrics);
      code = std::max(code, kExitFailure);
    }
  }
  return code;
}

int run_verify(std::uint64_t seed) {
  bool ok = true;
  for (const dmsp::SuiteResult& r : dmsp::run_verify_suites(seed)) {
    std::cout << fmt::format("{} {}: {}\n", r.passed ? "PASS" : "FAIL", r.name, r.detail);
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Image restoration with a denoiser-driven mean-shift prior"};
  app.require_subcommand(1);
  Options o;

  CLI::App* deblur = app.add_subcommand("deblur", "Non-blind, noise-blind or kernel-blind deblurring");
  add_common(deblur, o);
  deblur->add_option("--kernel", o.kernel, "Blur kernel text file");
  deblur->add_flag("--blind", o.blind, "Estimate the kernel as well");
  deblur->add_option("--kernel-size", o.kernel_size, "Odd support of the estimated kernel");
  deblur->add_option("--kernel-output", o.kernel_output, "Where a blind run writes its kernel");
  deblur->add_flag("--noise-adaptive", o.noise_adaptive, "Estimate the noise level while restoring");
  deblur->add_option("--alpha-k", o.alpha_k, "Kernel step size");
  deblur->add_option("--mu-k", o.mu_k, "Kernel momentum");

  CLI::App* sr = app.add_subcommand("sr", "Single-image super-resolution");
  add_common(sr, o);
  sr->add_option("--scale", o.scale, "Integer upscaling factor");

  CLI::App* demosaic = app.add_subcommand("demosaic", "Bayer demosaicing");
  add_common(demosaic, o);
  demosaic->add_option("--pattern", o.pattern, "RGGB, BGGR, GRBG or GBRG");

  CLI::App* verify = app.add_subcommand("verify", "Run the analytic identity suites");
  std::uint64_t verify_seed = 0;
  verify->add_option("--seed", verify_seed, "Seed of the random test points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (verify->parsed()) return run_verify(verify_seed);
    const dmsp::Task task = deblur->parsed() ? dmsp::Task::Deblur
                            : sr->parsed()   ? dmsp::Task::SuperResolution
                                             : dmsp::Task::Demosaic;
    return run_tasks(task, o);
  } catch (const dmsp::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
}
