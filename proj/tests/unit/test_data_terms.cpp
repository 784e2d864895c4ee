#include <gtest/gtest.h>

#include <cmath>

#include "dmsp/data_terms.hpp"
#include "dmsp/error.hpp"
#include "dmsp/oracle.hpp"
#include "helpers.hpp"

namespace dmsp {
namespace {

double rel(const Image& a, const Image& b) { return testing::relative_error(a, b); }

double rel(const Kernel& a, const Kernel& b) {
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(num / b.squared_norm());
}

struct Fixture {
  Image x;
  Image truth;
  Image y;
  DegradationOp op;
};

Fixture make_setup(std::uint64_t seed, std::size_t scale = 1, bool masked = false, double sigma_n = 0.02) {
  Rng rng(seed);
  const Shape latent{3, 16 * scale, 16 * scale};
  const Kernel k = testing::random_probability_kernel(5, 3, rng);
  std::optional<Image> mask;
  if (masked) mask = bayer_mask(BayerPattern::RGGB, 16, 16);
  DegradationOp op(latent, k, scale, mask);
  const Image truth = testing::random_image(latent, rng);
  const Image y = degrade(truth, op, sigma_n, rng);
  const Image x = testing::random_image(latent, rng);
  return {x, truth, y, op};
}

Kernel fd_kernel_grad(const Image& x, const Image& y, const Kernel& k, const DataTermConfig& cfg, double h) {
  Kernel g(k.height(), k.width());
  for (std::size_t i = 0; i < k.size(); ++i) {
    Kernel kp = k;
    Kernel km = k;
    kp[i] += h;
    km[i] -= h;
    g[i] = (objective_na(x, y, kp, cfg) - objective_na(x, y, km, cfg)) / (2.0 * h);
  }
  return g;
}

TEST(GradNb, ZeroAtTruthWithoutNoise) {
  Fixture s = make_setup(1, 1, false, 0.0);
  const auto cfg = DataTermConfig::non_blind(s.op, 0.05);
  EXPECT_LT(norm(grad_nb(s.truth, s.y, cfg)), 1e-10);
}

TEST(GradNb, MatchesFiniteDifference) {
  for (auto [scale, masked] : {std::pair{1, false}, std::pair{2, false}, std::pair{1, true}}) {
    Fixture s = make_setup(2, scale, masked);
    const auto cfg = DataTermConfig::non_blind(s.op, 0.05);
    const Image g = grad_nb(s.x, s.y, cfg);
    const Image fd = finite_diff_grad([&](const Image& z) { return objective_nb(z, s.y, cfg); }, s.x, 1e-6);
    EXPECT_LT(rel(g, fd), 1e-6) << scale << masked;
  }
}

TEST(GradNb, DoublingSigmaQuartersGradient) {
  Fixture s = make_setup(3);
  const Image g1 = grad_nb(s.x, s.y, DataTermConfig::non_blind(s.op, 0.05));
  const Image g2 = grad_nb(s.x, s.y, DataTermConfig::non_blind(s.op, 0.1));
  EXPECT_LT(testing::max_abs_diff(0.25 * g1, g2), 1e-9);
}

TEST(GradNb, RejectsWrongKindAndShape) {
  Fixture s = make_setup(4);
  EXPECT_THROW((void)grad_nb(s.x, s.y, DataTermConfig::noise_adaptive(s.op, 0.01)), ValueError);
  EXPECT_THROW((void)grad_nb(Image(Shape{3, 8, 8}), s.y, DataTermConfig::non_blind(s.op, 0.05)), ShapeError);
  EXPECT_THROW(DataTermConfig::non_blind(s.op, 0.0), ValueError);
}

TEST(LambdaNa, Arithmetic) {
  const Shape sh{1, 4, 4};
  const DegradationOp op(sh, Kernel::delta());
  const Image x(sh, 0.0);
  const Image y(sh, 0.5);  // |r|^2 = 16 * 0.25 = 4
  const auto cfg = DataTermConfig::noise_adaptive(op, 0.0);
  EXPECT_DOUBLE_EQ(lambda_na(x, y, op.kernel(), cfg), 4.0);
  EXPECT_DOUBLE_EQ(lambda_na(x, 3.0 * y, op.kernel(), cfg), 4.0 / 9.0);
}

TEST(LambdaNa, KernelTermUsesLatentCount) {
  const Shape sh{1, 8, 8};
  const DegradationOp op(sh, Kernel::gaussian(3, 3, 1.0), 2);
  const Image x(sh, 0.0);
  const Image y(op.observed_shape(), 0.0);
  const double sigma = 0.1;
  const auto cfg = DataTermConfig::noise_adaptive(op, sigma);
  const double expected = 16.0 / (64.0 * sigma * sigma * op.kernel().squared_norm());
  EXPECT_NEAR(lambda_na(x, y, op.kernel(), cfg), expected, 1e-9 * expected);
}

TEST(LambdaNa, MatchesNonBlindWeightForTrueNoise) {
  for (double sigma_n : {2.55 / 255, 10.2 / 255}) {
    Rng rng(5);
    const Shape sh{1, 64, 64};
    const DegradationOp op(sh, Kernel::gaussian(5, 5, 1.0));
    const Image truth = testing::random_image(sh, rng);
    const Image y = degrade(truth, op, sigma_n, rng);
    const double lambda = lambda_na(truth, y, op.kernel(), DataTermConfig::noise_adaptive(op, 0.0));
    EXPECT_NEAR(lambda * sigma_n * sigma_n, 1.0, 0.1);
  }
}

TEST(LambdaNa, ExactFitError) {
  Fixture s = make_setup(6, 1, false, 0.0);
  const auto cfg = DataTermConfig::noise_adaptive(s.op, 0.0);
  EXPECT_THROW((void)lambda_na(s.truth, s.y, s.op.kernel(), cfg), ExactFitError);
  EXPECT_THROW((void)grad_na(s.truth, s.y, cfg), ExactFitError);
  EXPECT_THROW((void)kernel_grad(s.truth, s.y, s.op.kernel(), cfg), ExactFitError);
}

TEST(LambdaNa, InvariantUnderPixelPermutation) {
  const Shape sh{1, 4, 4};
  const DegradationOp op(sh, Kernel::delta());
  Rng rng(7);
  const Image x = testing::random_image(sh, rng);
  const Image y = testing::random_image(sh, rng);
  Image xp(sh);
  Image yp(sh);
  for (std::size_t i = 0; i < sh.size(); ++i) {
    xp[i] = x[(i * 5 + 3) % sh.size()];
    yp[i] = y[(i * 5 + 3) % sh.size()];
  }
  const auto cfg = DataTermConfig::noise_adaptive(op, 0.02);
  EXPECT_NEAR(lambda_na(x, y, op.kernel(), cfg), lambda_na(xp, yp, op.kernel(), cfg), 1e-9);
}

TEST(GradNa, EqualsNonBlindWithLambdaSubstituted) {
  Fixture s = make_setup(8);
  const auto na = DataTermConfig::noise_adaptive(s.op, 0.03);
  const double lambda = lambda_na(s.x, s.y, s.op.kernel(), na);
  const Image nb = grad_nb(s.x, s.y, DataTermConfig::non_blind(s.op, 1.0 / std::sqrt(lambda)));
  EXPECT_LT(rel(grad_na(s.x, s.y, na), nb), 1e-12);
}

TEST(GradNa, MatchesFiniteDifference) {
  for (auto [scale, masked] : {std::pair{1, false}, std::pair{2, false}, std::pair{1, true}}) {
    Fixture s = make_setup(9, scale, masked);
    const auto cfg = DataTermConfig::noise_adaptive(s.op, 0.03);
    const Image g = grad_na(s.x, s.y, cfg);
    const Image fd = finite_diff_grad(
        [&](const Image& z) { return objective_na(z, s.y, s.op.kernel(), cfg); }, s.x, 1e-6);
    EXPECT_LT(rel(g, fd), 1e-5) << scale << masked;
  }
}

TEST(EstimateSigmaN, ZeroSmoothingIsResidualRms) {
  Fixture s = make_setup(10);
  const auto cfg = DataTermConfig::noise_adaptive(s.op, 0.0);
  const double rms = std::sqrt(residual_energy(s.x, s.y, s.op) / static_cast<double>(s.y.size()));
  EXPECT_NEAR(estimate_sigma_n(s.x, s.y, s.op.kernel(), cfg), rms, 1e-14);
}

TEST(EstimateSigmaN, ExactInputGivesZero) {
  Rng rng(11);
  const Shape sh{1, 8, 8};
  const DegradationOp op(sh, Kernel::delta(3, 3));
  const Image x = testing::random_image(sh, rng);
  EXPECT_EQ(estimate_sigma_n(x, x, op.kernel(), DataTermConfig::noise_adaptive(op, 0.0)), 0.0);
}

TEST(EstimateSigmaN, RecoversKnownNoise) {
  Rng rng(12);
  const Shape sh{1, 64, 64};
  const DegradationOp op(sh, Kernel::gaussian(5, 5, 1.2));
  const Image truth = testing::random_image(sh, rng);
  const double sigma_n = 7.65 / 255.0;
  const Image y = degrade(truth, op, sigma_n, rng);
  const double est = estimate_sigma_n(truth, y, op.kernel(), DataTermConfig::noise_adaptive(op, 0.0));
  EXPECT_NEAR(est / sigma_n, 1.0, 0.1);
}

TEST(EstimateSigmaN, AlgebraicIdentity) {
  Fixture s = make_setup(13, 2, false);
  const auto cfg = DataTermConfig::noise_adaptive(s.op, 0.04);
  const double e = estimate_sigma_n(s.x, s.y, s.op.kernel(), cfg);
  const double rhs = residual_energy(s.x, s.y, s.op) +
                     static_cast<double>(s.op.latent_count()) * 0.04 * 0.04 * s.op.kernel().squared_norm();
  EXPECT_NEAR(e * e * static_cast<double>(s.op.observed_count()), rhs, 1e-12 * rhs);
}

TEST(KernelGrad, DeltaImage) {
  const Shape sh{1, 9, 9};
  Rng rng(14);
  const Kernel k = testing::random_probability_kernel(3, 5, rng);
  const DegradationOp op(sh, k);
  Image x(sh);
  x.at(0, 0, 0) = 1.0;
  const Image y = testing::random_image(sh, rng);
  const auto cfg = DataTermConfig::noise_adaptive(op, 0.0);
  const double lambda = lambda_na(x, y, k, cfg);
  const Kernel g = kernel_grad(x, y, k, cfg);
  const Image ax = op.apply(x);
  for (std::size_t i = 0; i < k.height(); ++i)
    for (std::size_t j = 0; j < k.width(); ++j) {
      const std::size_t py = (i + sh.height - k.height() / 2) % sh.height;
      const std::size_t px = (j + sh.width - k.width() / 2) % sh.width;
      ASSERT_DOUBLE_EQ(ax.at(0, py, px), k.at(i, j));
      EXPECT_NEAR(g.at(i, j), lambda * (k.at(i, j) - y.at(0, py, px)), 1e-12);
    }
}

TEST(KernelGrad, MatchesFiniteDifferencePerTap) {
  for (auto [scale, masked] : {std::pair{1, false}, std::pair{2, false}, std::pair{1, true}}) {
    Fixture s = make_setup(15, scale, masked);
    const auto cfg = DataTermConfig::noise_adaptive(s.op, 0.03);
    const Kernel g = kernel_grad(s.x, s.y, s.op.kernel(), cfg);
    const Kernel fd = fd_kernel_grad(s.x, s.y, s.op.kernel(), cfg, 1e-6);
    EXPECT_LT(rel(g, fd), 1e-5) << scale << masked;
  }
}

TEST(KernelGrad, EvaluatesAtGivenKernel) {
  Fixture s = make_setup(16);
  const auto cfg = DataTermConfig::noise_adaptive(s.op, 0.02);
  Rng rng(17);
  const Kernel other = testing::random_probability_kernel(5, 3, rng);
  const Kernel g = kernel_grad(s.x, s.y, other, cfg);
  const Kernel fd = fd_kernel_grad(s.x, s.y, other, cfg, 1e-6);
  EXPECT_LT(rel(g, fd), 1e-5);
  EXPECT_THROW((void)kernel_grad(s.x, s.y, Kernel::delta(3, 3), cfg), ShapeError);
}

}  // namespace
}  // namespace dmsp
