#include "dmsp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include <fmt/format.h>

#include "dmsp/denoiser.hpp"
#include "dmsp/operators.hpp"
#include "dmsp/oracle.hpp"

namespace dmsp {
namespace {

constexpr double kIdentityTol = 1e-4;
constexpr double kAdjointTol = 1e-9;

Image random_image(Shape s, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image x(s);
  for (double& v : x.data()) v = u(rng);
  return x;
}

Kernel random_kernel(std::size_t h, std::size_t w, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.5, 1.0);
  Kernel k(h, w);
  for (double& v : k.taps()) v = u(rng);
  return k;
}

Image random_mask(Shape s, Rng& rng) {
  std::bernoulli_distribution b(0.6);
  Image m(s);
  for (double& v : m.data()) v = b(rng) ? 1.0 : 0.0;
  return m;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::size_t pick_odd(Rng& rng, std::size_t hi) { return 2 * pick(rng, 0, (hi - 1) / 2) + 1; }

// Relative dot-product mismatch; 0 when both sides vanish.
double adjoint_gap(double lhs, double rhs, double scale) {
  return scale > 0.0 ? std::abs(lhs - rhs) / scale : std::abs(lhs - rhs);
}

struct Worst {
  double value = 0.0;
  void take(double v) { value = std::max(value, v); }
};

}  // namespace

SuiteResult verify_mean_shift_identity(std::uint64_t seed) {
  Rng rng(seed);
  Worst analytic;
  Worst numeric;
  std::size_t points = 0;

  // Stationary Gaussian prior on 8x8 images: 16 draws of 64 samples.
  const Shape shape{1, 8, 8};
  GaussianPrior gp{Image(shape, 0.5), stationary_spectrum(shape, 0.05, 2.0)};
  const double sg = 0.1;
  GaussianOracleDenoiser gd(gp, sg);
  const SmoothedDensity gs{gp, sg};
  for (int draw = 0; draw < 16; ++draw) {
    Image x = sample(gp, rng);
    add_gaussian_noise(x, sg, rng);
    Image shift = gd.denoise(x) - x;
    shift *= 1.0 / (sg * sg);
    const Image score = grad_log_p_smoothed(gs, x);
    const Image fd = finite_diff_grad([&](const Image& z) { return log_p_smoothed(gs, z); }, x, 1e-5);
    for (std::size_t i = 0; i < x.size(); ++i) {
      analytic.take(std::abs(shift[i] - score[i]));
      numeric.take(std::abs(shift[i] - fd[i]));
    }
    points += x.size();
  }

  // Symmetric two-component mixture, 1000 scalar points.
  const GmmPrior gmm{{0.5, 0.5}, {-2.0, 2.0}, {0.25, 0.25}};
  const double sm = 1.0;
  GmmOracleDenoiser md(gmm, sm);
  const SmoothedDensity ms{gmm, sm};
  Image x(Shape{1, 25, 40});
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (double& v : x.data()) v = u(rng);
  Image shift = md.denoise(x) - x;
  shift *= 1.0 / (sm * sm);
  const Image score = grad_log_p_smoothed(ms, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Image one(Shape{1, 1, 1}, x[i]);
    const double fd =
        finite_diff_grad([&](const Image& z) { return log_p_smoothed(ms, z); }, one, 1e-5)[0];
    analytic.take(std::abs(shift[i] - score[i]));
    numeric.take(std::abs(shift[i] - fd));
  }
  points += x.size();

  const bool ok = analytic.value <= kIdentityTol && numeric.value <= kIdentityTol;
  return {"mean-shift identity", ok,
          fmt::format("{} points, max |shift - score| {:.3g}, max |shift - fd| {:.3g} (tol {:g})",
                      points, analytic.value, numeric.value, kIdentityTol)};
}

SuiteResult verify_adjoints(std::uint64_t seed) {
  Rng rng(seed);
  constexpr int kInstances = 100;
  Worst conv;
  Worst down;
  Worst mask;
  Worst comp;
  Worst kern;
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t c = pick(rng, 1, 3);
    const std::size_t h = pick(rng, 5, 20);
    const std::size_t w = pick(rng, 5, 20);
    const Shape s{c, h, w};
    const Kernel k = random_kernel(pick_odd(rng, std::min<std::size_t>(h, 7)),
                                   pick_odd(rng, std::min<std::size_t>(w, 7)), rng);

    {
      const Image x = random_image(s, rng);
      const Image y = random_image(s, rng);
      const Image ax = convolve(x, k);
      const Image aty = adjoint_convolve(y, k);
      conv.take(adjoint_gap(dot(ax, y), dot(x, aty), norm(ax) * norm(y) + norm(x) * norm(aty)));
    }
    {
      const std::size_t f = pick(rng, 1, 4);
      const Shape hs{c, h * f, w * f};
      const Image x = random_image(hs, rng);
      const Image y = random_image(s, rng);
      const Image ax = downsample(x, f);
      const Image aty = upsample_adjoint(y, f);
      down.take(adjoint_gap(dot(ax, y), dot(x, aty), norm(ax) * norm(y) + norm(x) * norm(aty)));
    }
    {
      const Image m = random_mask(s, rng);
      const Image x = random_image(s, rng);
      const Image y = random_image(s, rng);
      const Image ax = apply_mask(x, m);
      const Image aty = apply_mask(y, m);
      mask.take(adjoint_gap(dot(ax, y), dot(x, aty), norm(ax) * norm(y) + norm(x) * norm(aty)));
    }
    {
      const std::size_t f = pick(rng, 1, 3);
      const Shape latent{c, h * f, w * f};
      std::optional<Image> m;
      if (pick(rng, 0, 1) == 1) m = random_mask(s, rng);
      const DegradationOp op(latent, k, f, m);
      const Image x = random_image(latent, rng);
      const Image y = random_image(op.observed_shape(), rng);
      const Image ax = op.apply(x);
      const Image aty = op.adjoint(y);
      comp.take(adjoint_gap(dot(ax, y), dot(x, aty), norm(ax) * norm(y) + norm(x) * norm(aty)));

      // k -> A_k x is linear in k; its adjoint is kernel_adjoint.
      const Kernel kk = random_kernel(k.height(), k.width(), rng);
      const Image akx = op.with_kernel(kk).apply(x);
      const Kernel atr = op.kernel_adjoint(x, y);
      kern.take(adjoint_gap(dot(akx, y), dot(kk, atr),
                            norm(akx) * norm(y) + std::sqrt(kk.squared_norm() * atr.squared_norm())));
    }
  }
  const double worst = std::max({conv.value, down.value, mask.value, comp.value, kern.value});
  return {"adjoints", worst <= kAdjointTol,
          fmt::format("{} instances each; max relative gap conv {:.2g}, down {:.2g}, mask {:.2g}, "
                      "composed {:.2g}, kernel {:.2g} (tol {:g})",
                      kInstances, conv.value, down.value, mask.value, comp.value, kern.value,
                      kAdjointTol)};
}

SuiteResult verify_jensen_ordering(std::uint64_t seed) {
  Rng rng(seed);
  const Shape shape{1, 8, 8};
  GaussianPrior gp{Image(shape, 0.5), stationary_spectrum(shape, 0.02, 3.0)};
  constexpr int kPoints = 1000;
  int violations = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  std::uniform_real_distribution<double> level(0.01, 0.2);
  std::uniform_real_distribution<double> spread(0.0, 3.0);
  for (int i = 0; i < kPoints; ++i) {
    const double sigma = level(rng);
    const double share = i % 2 == 0 ? 0.5 : frac(rng);
    const double s1 = sigma * std::sqrt(share);
    const double s2 = sigma * std::sqrt(1.0 - share);
    Image x = sample(gp, rng);
    add_gaussian_noise(x, spread(rng) * sigma, rng);
    const double bound = log_prior_lower_bound(gp, s1, s2, x);
    const double exact = log_p_smoothed(SmoothedDensity{gp, sigma}, x);
    const double gap = exact - bound;
    min_gap = std::min(min_gap, gap);
    if (!(gap >= 0.0)) ++violations;
  }
  return {"jensen ordering", violations == 0,
          fmt::format("{} points, {} violations, min gap {:.3g}", kPoints, violations, min_gap)};
}

std::vector<SuiteResult> run_verify_suites(std::uint64_t seed) {
  return {verify_mean_shift_identity(seed), verify_adjoints(seed + 1), verify_jensen_ordering(seed + 2)};
}

}  // namespace dmsp
