#include <gtest/gtest.h>

#include <cmath>

#include "dmsp/error.hpp"
#include "dmsp/operators.hpp"
#include "helpers.hpp"

namespace dmsp {
namespace {

using testing::max_abs_diff;
using testing::random_image;
using testing::random_kernel;

// Direct sliding-window sum with periodic wrap, coded independently.
Image brute_convolve(const Image& x, const Kernel& k) {
  Image out(x.shape());
  const auto H = static_cast<long>(x.height());
  const auto W = static_cast<long>(x.width());
  const long cy = static_cast<long>(k.height() / 2);
  const long cx = static_cast<long>(k.width() / 2);
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (long i = 0; i < H; ++i) {
      for (long j = 0; j < W; ++j) {
        double s = 0.0;
        for (long a = 0; a < static_cast<long>(k.height()); ++a) {
          for (long b = 0; b < static_cast<long>(k.width()); ++b) {
            const long si = ((i - (a - cy)) % H + H) % H;
            const long sj = ((j - (b - cx)) % W + W) % W;
            s += k.at(a, b) * x.at(c, si, sj);
          }
        }
        out.at(c, i, j) = s;
      }
    }
  }
  return out;
}

double adjoint_gap(const Image& x, const Image& ax, const Image& y, const Image& aty) {
  return std::abs(dot(ax, y) - dot(x, aty)) / (norm(ax) * norm(y) + norm(x) * norm(aty));
}

TEST(Convolve, DeltaKernelIsIdentity) {
  Rng rng(1);
  const Image x = random_image(Shape{2, 6, 5}, rng);
  EXPECT_EQ(convolve(x, Kernel::delta(3, 3)), x);
  EXPECT_EQ(adjoint_convolve(x, Kernel::delta()), x);
}

TEST(Convolve, NormalizedKernelPreservesConstants) {
  Rng rng(2);
  Kernel k = testing::random_probability_kernel(5, 3, rng);
  const Image c(Shape{1, 7, 9}, 0.37);
  EXPECT_LT(max_abs_diff(convolve(c, k), c), 1e-15);
}

TEST(Convolve, MatchesBruteForceSlidingWindow) {
  Rng rng(3);
  const Image x = random_image(Shape{1, 8, 8}, rng);
  const Kernel k = random_kernel(3, 3, rng, -1.0, 1.0);
  EXPECT_LT(max_abs_diff(convolve(x, k), brute_convolve(x, k)), 1e-14);
  const Kernel k2 = random_kernel(5, 7, rng, -1.0, 1.0);
  const Image x2 = random_image(Shape{2, 9, 11}, rng);
  EXPECT_LT(max_abs_diff(convolve(x2, k2), brute_convolve(x2, k2)), 1e-14);
}

TEST(Convolve, AdjointIsFlippedKernelConvolution) {
  Rng rng(4);
  const Image y = random_image(Shape{1, 8, 8}, rng);
  const Kernel k = random_kernel(3, 5, rng);
  EXPECT_LT(max_abs_diff(adjoint_convolve(y, k), convolve(y, k.flipped())), 1e-14);
  const Kernel sym = Kernel::gaussian(5, 5, 1.0);
  EXPECT_LT(max_abs_diff(adjoint_convolve(y, sym), convolve(y, sym)), 1e-15);
}

TEST(Convolve, DotProductAdjointTest) {
  Rng rng(5);
  for (int n = 0; n < 20; ++n) {
    const Image x = random_image(Shape{2, 9, 7}, rng);
    const Image y = random_image(Shape{2, 9, 7}, rng);
    const Kernel k = random_kernel(5, 3, rng, -1.0, 1.0);
    EXPECT_LT(adjoint_gap(x, convolve(x, k), y, adjoint_convolve(y, k)), 1e-9);
  }
}

TEST(Convolve, IsLinear) {
  Rng rng(6);
  const Image x = random_image(Shape{1, 8, 8}, rng);
  const Image z = random_image(Shape{1, 8, 8}, rng);
  const Kernel k = random_kernel(3, 3, rng);
  const Image lhs = convolve(2.5 * x + (-1.5) * z, k);
  const Image rhs = 2.5 * convolve(x, k) + (-1.5) * convolve(z, k);
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
}

TEST(Convolve, CommutesWithCyclicShift) {
  Rng rng(7);
  const Image x = random_image(Shape{1, 8, 6}, rng);
  const Kernel k = random_kernel(3, 5, rng);
  const auto shift = [](const Image& in, std::size_t dy, std::size_t dx) {
    Image out(in.shape());
    for (std::size_t i = 0; i < in.height(); ++i)
      for (std::size_t j = 0; j < in.width(); ++j)
        out.at(0, (i + dy) % in.height(), (j + dx) % in.width()) = in.at(0, i, j);
    return out;
  };
  EXPECT_LT(max_abs_diff(convolve(shift(x, 3, 2), k), shift(convolve(x, k), 3, 2)), 1e-14);
}

TEST(Convolve, RejectsKernelLargerThanImage) {
  const Image x(Shape{1, 3, 3});
  EXPECT_THROW((void)convolve(x, Kernel(5, 1)), ShapeError);
  EXPECT_THROW((void)adjoint_convolve(x, Kernel(1, 5)), ShapeError);
}

TEST(CorrelateToKernel, IsAdjointOfKernelToImageMap) {
  Rng rng(8);
  const Image x = random_image(Shape{2, 8, 9}, rng);
  const Image z = random_image(Shape{2, 8, 9}, rng);
  const Kernel k = random_kernel(3, 5, rng, -1.0, 1.0);
  const Kernel g = correlate_to_kernel(x, z, 3, 5);
  EXPECT_NEAR(dot(convolve(x, k), z), dot(k, g), 1e-10);
}

TEST(Downsample, FactorOneIsIdentity) {
  Rng rng(9);
  const Image x = random_image(Shape{1, 4, 6}, rng);
  EXPECT_EQ(downsample(x, 1), x);
  EXPECT_EQ(upsample_adjoint(x, 1), x);
}

TEST(Downsample, KeepsSamplesAtMultiplesOfTheFactor) {
  Image x(Shape{1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
  const Image d = downsample(x, 2);
  EXPECT_EQ(d, Image(Shape{1, 2, 2}, std::vector<double>{0, 2, 8, 10}));
  const Image u = upsample_adjoint(d, 2);
  EXPECT_EQ(u.at(0, 2, 2), 10.0);
  EXPECT_EQ(u.at(0, 1, 1), 0.0);
}

TEST(Downsample, AdjointIsExact) {
  Rng rng(10);
  const Image x = random_image(Shape{3, 12, 9}, rng);
  const Image y = random_image(Shape{3, 4, 3}, rng);
  EXPECT_EQ(dot(downsample(x, 3), y), dot(x, upsample_adjoint(y, 3)));
}

TEST(Downsample, RejectsNonDivisibleSize) {
  EXPECT_THROW((void)downsample(Image(Shape{1, 5, 4}), 2), ShapeError);
}

TEST(Mask, AllOnesIsIdentityAndApplyIsIdempotent) {
  Rng rng(11);
  const Image x = random_image(Shape{3, 4, 4}, rng);
  EXPECT_EQ(apply_mask(x, Image(x.shape(), 1.0)), x);
  const Image m = bayer_mask(BayerPattern::GRBG, 4, 4);
  EXPECT_EQ(apply_mask(apply_mask(x, m), m), apply_mask(x, m));
  EXPECT_THROW((void)apply_mask(x, Image(Shape{3, 4, 5}, 1.0)), ShapeError);
}

TEST(Mask, RggbLayoutOnTwoByTwo) {
  const Image m = bayer_mask(BayerPattern::RGGB, 2, 2);
  const Image x(Shape{3, 2, 2}, 1.0);
  const Image k = apply_mask(x, m);
  // R at (0,0); G at (0,1) and (1,0); B at (1,1).
  EXPECT_EQ(k.at(0, 0, 0), 1.0);
  EXPECT_EQ(k.at(1, 0, 1), 1.0);
  EXPECT_EQ(k.at(1, 1, 0), 1.0);
  EXPECT_EQ(k.at(2, 1, 1), 1.0);
  double total = 0.0;
  for (double v : k.data()) total += v;
  EXPECT_EQ(total, 4.0);
}

TEST(Mask, PatternNamesSelectLayouts) {
  EXPECT_EQ(parse_bayer_pattern("BGGR"), BayerPattern::BGGR);
  EXPECT_EQ(bayer_mask(BayerPattern::BGGR, 2, 2).at(2, 0, 0), 1.0);
  EXPECT_EQ(bayer_mask(BayerPattern::GBRG, 2, 2).at(2, 0, 1), 1.0);
  EXPECT_EQ(bayer_mask(BayerPattern::GRBG, 2, 2).at(0, 0, 1), 1.0);
  EXPECT_EQ(to_string(BayerPattern::GBRG), "GBRG");
  EXPECT_THROW((void)parse_bayer_pattern("RGBG"), ValueError);
}

TEST(DegradationOp, CountsAndComposition) {
  Rng rng(12);
  const Shape latent{3, 8, 8};
  const Image mask = bayer_mask(BayerPattern::RGGB, 4, 4);
  const Kernel k = testing::random_probability_kernel(3, 3, rng);
  const DegradationOp op(latent, k, 2, mask);
  EXPECT_EQ(op.observed_shape(), (Shape{3, 4, 4}));
  EXPECT_EQ(op.observed_count(), 16u);
  EXPECT_EQ(op.latent_count(), 192u);
  const Image x = random_image(latent, rng);
  EXPECT_EQ(op.apply(x), apply_mask(downsample(convolve(x, k), 2), mask));
  const Image y = random_image(op.observed_shape(), rng);
  EXPECT_LT(adjoint_gap(x, op.apply(x), y, op.adjoint(y)), 1e-12);
}

TEST(DegradationOp, RejectsNonBinaryMask) {
  Image mask(Shape{1, 4, 4}, 1.0);
  mask[3] = 0.5;
  EXPECT_THROW(DegradationOp(Shape{1, 4, 4}, Kernel::delta(), 1, mask), ValueError);
}

TEST(Degrade, NoiselessDeltaIsIdentity) {
  Rng rng(13);
  const Image x = random_image(Shape{1, 6, 6}, rng);
  Rng a(1);
  Rng b(999);
  const DegradationOp op(x.shape(), Kernel::delta());
  EXPECT_EQ(degrade(x, op, 0.0, a), x);
  EXPECT_EQ(degrade(x, op, 0.0, b), x);
}

TEST(Degrade, FixedSeedIsBitIdentical) {
  Rng rng(14);
  const Image x = random_image(Shape{1, 16, 16}, rng);
  const DegradationOp op(x.shape(), Kernel::gaussian(5, 5, 1.0));
  Rng a(42);
  Rng b(42);
  EXPECT_EQ(degrade(x, op, 0.05, a), degrade(x, op, 0.05, b));
}

TEST(Degrade, NoiseVarianceMatchesWithinFivePercent) {
  Rng rng(15);
  const Image x = random_image(Shape{1, 256, 256}, rng);
  const DegradationOp op(x.shape(), Kernel::gaussian(5, 5, 1.2));
  const double sn = 0.03;
  const Image r = degrade(x, op, sn, rng) - convolve(x, op.kernel());
  double mean = 0.0;
  for (double v : r.data()) mean += v;
  mean /= static_cast<double>(r.size());
  double var = 0.0;
  for (double v : r.data()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(r.size() - 1);
  EXPECT_NEAR(var / (sn * sn), 1.0, 0.05);
}

TEST(Degrade, UnobservedSamplesStayZero) {
  Rng rng(16);
  const Image x = random_image(Shape{3, 4, 4}, rng);
  const Image mask = bayer_mask(BayerPattern::RGGB, 4, 4);
  const DegradationOp op(x.shape(), Kernel::delta(), 1, mask);
  const Image y = degrade(x, op, 0.1, rng);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (mask[i] == 0.0) EXPECT_EQ(y[i], 0.0);
  }
}

}  // namespace
}  // namespace dmsp
