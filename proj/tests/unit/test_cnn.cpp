#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "dmsp/cnn.hpp"
#include "dmsp/error.hpp"
#include "dmsp/image_io.hpp"
#include "helpers.hpp"

namespace dmsp {
namespace {

ConvLayer layer(std::uint32_t out, std::uint32_t in, std::uint32_t kh, std::uint32_t kw, float fill = 0.0f) {
  ConvLayer l{out, in, kh, kw, {}, {}};
  l.weights.assign(std::size_t{out} * in * kh * kw, fill);
  l.biases.assign(out, 0.0f);
  return l;
}

// Straight loops over every tap, wrapping indices by hand.
Image naive_forward(const CnnWeights& w, const Image& x) {
  const std::size_t h = x.height();
  const std::size_t wd = x.width();
  Image a = x;
  for (std::size_t n = 0; n < w.layers.size(); ++n) {
    const ConvLayer& l = w.layers[n];
    Image next(Shape{l.out_channels, h, wd});
    for (std::size_t o = 0; o < l.out_channels; ++o)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < wd; ++j) {
          double s = l.biases[o];
          for (std::size_t c = 0; c < l.in_channels; ++c)
            for (std::size_t r = 0; r < l.kernel_height; ++r)
              for (std::size_t q = 0; q < l.kernel_width; ++q) {
                const std::size_t yy = (i + r + h - l.kernel_height / 2) % h;
                const std::size_t xx = (j + q + wd - l.kernel_width / 2) % wd;
                s += static_cast<double>(l.weight(o, c, r, q)) * a.at(c, yy, xx);
              }
          next.at(o, i, j) = n + 1 < w.layers.size() ? std::max(s, 0.0) : s;
        }
    a = std::move(next);
  }
  return x - a;
}

Image cyclic_shift(const Image& x, std::size_t dy, std::size_t dx) {
  Image out(x.shape());
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t i = 0; i < x.height(); ++i)
      for (std::size_t j = 0; j < x.width(); ++j)
        out.at(c, (i + dy) % x.height(), (j + dx) % x.width()) = x.at(c, i, j);
  return out;
}

TEST(CnnInfer, ZeroWeightsReturnInput) {
  CnnWeights w{0.1, {layer(4, 3, 3, 3), layer(3, 4, 3, 3)}};
  Rng rng(1);
  const Image x = testing::random_image(Shape{3, 6, 7}, rng);
  EXPECT_EQ(cnn_infer(w, x), x);
}

TEST(CnnInfer, UnitPointwiseLayerCancelsInput) {
  CnnWeights w{0.1, {layer(1, 1, 1, 1, 1.0f)}};
  Rng rng(2);
  const Image x = testing::random_image(Shape{1, 5, 5}, rng);
  const Image out = cnn_infer(w, x);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(CnnInfer, MatchesNaiveLoops) {
  Rng rng(3);
  const CnnWeights w = random_cnn(3, 0.05, rng, 3, 6, 3);
  const Image x = testing::random_image(Shape{3, 9, 11}, rng);
  EXPECT_LT(testing::max_abs_diff(cnn_infer(w, x), naive_forward(w, x)), 1e-6);
}

TEST(CnnInfer, NonSquareTapsMatchNaiveLoops) {
  Rng rng(4);
  CnnWeights w{0.1, {layer(2, 1, 3, 5), layer(1, 2, 1, 3)}};
  for (ConvLayer& l : w.layers) {
    for (float& v : l.weights) v = static_cast<float>(testing::random_image(Shape{1, 1, 1}, rng, -1, 1)[0]);
    for (float& v : l.biases) v = 0.1f;
  }
  const Image x = testing::random_image(Shape{1, 6, 8}, rng);
  EXPECT_LT(testing::max_abs_diff(cnn_infer(w, x), naive_forward(w, x)), 1e-12);
}

TEST(CnnInfer, TranslationEquivariant) {
  Rng rng(5);
  const CnnWeights w = random_cnn(1, 0.05, rng, 4, 8);
  const Image x = testing::random_image(Shape{1, 12, 10}, rng);
  const Image a = cnn_infer(w, cyclic_shift(x, 3, 7));
  const Image b = cyclic_shift(cnn_infer(w, x), 3, 7);
  EXPECT_LT(testing::max_abs_diff(a, b), 1e-12);
}

TEST(CnnInfer, RejectsChannelMismatch) {
  Rng rng(6);
  const CnnWeights w = random_cnn(3, 0.05, rng, 2, 4);
  EXPECT_THROW((void)cnn_infer(w, Image(Shape{1, 4, 4})), LayerError);
  EXPECT_THROW(w.validate_for(1), LayerError);
}

TEST(CnnWeights, ValidateNamesBrokenLayer) {
  CnnWeights w{0.1, {layer(4, 1, 3, 3), layer(1, 5, 3, 3)}};
  try {
    w.validate();
    FAIL() << "expected LayerError";
  } catch (const LayerError& e) {
    EXPECT_EQ(e.layer(), 1u);
  }
}

TEST(WeightFormat, RoundTripIsExact) {
  Rng rng(7);
  const CnnWeights w = random_cnn(3, 11.0 / 255.0, rng);
  EXPECT_EQ(load_weights(save_weights(w)), w);
}

TEST(WeightFormat, HeaderLayout) {
  const CnnWeights w{0.5, {layer(1, 1, 1, 1, 2.0f)}};
  const auto b = save_weights(w);
  ASSERT_EQ(b.size(), 4u + 4u + 8u + 4u + 16u + 4u + 4u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "DMSP");
  EXPECT_EQ(b[4], 1u);
  EXPECT_EQ(b[5] | b[6] | b[7], 0u);
  EXPECT_EQ(b[16], 1u);  // layer count
}

TEST(WeightFormat, CorruptMagic) {
  Rng rng(8);
  auto b = save_weights(random_cnn(1, 0.1, rng, 2, 4));
  b[0] = 'X';
  EXPECT_THROW(load_weights(b), MagicMismatchError);
}

TEST(WeightFormat, Truncation) {
  Rng rng(9);
  const auto b = save_weights(random_cnn(1, 0.1, rng, 2, 4));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, b.size() / 2, b.size() - 1}) {
    const std::vector<std::uint8_t> part(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(load_weights(part), TruncatedError) << cut;
  }
}

TEST(WeightFormat, UnsupportedVersion) {
  Rng rng(10);
  auto b = save_weights(random_cnn(1, 0.1, rng, 2, 4));
  b[4] = 2;
  EXPECT_THROW(load_weights(b), UnsupportedVersionError);
}

TEST(WeightFormat, InconsistentLayerShape) {
  Rng rng(11);
  auto b = save_weights(random_cnn(1, 0.1, rng, 2, 4));
  b[20] = 5;  // first layer out channels 4 -> 5, breaking the chain
  EXPECT_THROW(load_weights(b), FormatError);
  auto even = save_weights(random_cnn(1, 0.1, rng, 2, 4));
  even[28] = 2;  // first layer tap height
  EXPECT_THROW(load_weights(even), LayerShapeError);
}

TEST(WeightFormat, TrailingBytes) {
  Rng rng(12);
  auto b = save_weights(random_cnn(1, 0.1, rng, 2, 4));
  b.push_back(0);
  EXPECT_THROW(load_weights(b), FormatError);
}

TEST(WeightFormat, FileRoundTrip) {
  Rng rng(13);
  const CnnWeights w = random_cnn(1, 0.1, rng, 2, 4);
  const auto path = std::filesystem::temp_directory_path() / "dmsp_cnn_roundtrip.dmsp";
  write_weights_file(path, w);
  EXPECT_EQ(read_weights_file(path), w);
  std::filesystem::remove(path);
  EXPECT_THROW(read_weights_file(path), IoError);
}

TEST(WeightFormat, ExternalFixtureMatchesReferenceForward) {
  const std::filesystem::path dir = DMSP_FIXTURE_DIR;
  const CnnWeights w = read_weights_file(dir / "weights.dmsp");
  EXPECT_NEAR(w.sigma_train, 25.0 / 255.0, 1e-15);
  ASSERT_EQ(w.layers.size(), 4u);
  const Image x = io::read_pfm(dir / "input.pfm");
  const Image expected = io::read_pfm(dir / "expected.pfm");
  EXPECT_LT(testing::max_abs_diff(CnnDenoiser(w).denoise(x), expected), 1e-5);
}

}  // namespace
}  // namespace dmsp
