#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dmsp/denoiser.hpp"
#include "dmsp/image.hpp"
#include "dmsp/operators.hpp"

namespace dmsp {

/// One convolution layer. Weights are ordered out-channel major, then
/// in-channel, then row, then column. Stored as float to match the file
/// format bit for bit; inference accumulates in double.
struct ConvLayer {
  std::uint32_t out_channels = 0;
  std::uint32_t in_channels = 0;
  std::uint32_t kernel_height = 0;
  std::uint32_t kernel_width = 0;
  std::vector<float> weights;
  std::vector<float> biases;

  float weight(std::size_t o, std::size_t i, std::size_t r, std::size_t c) const {
    return weights[((o * in_channels + i) * kernel_height + r) * kernel_width + c];
  }

  bool operator==(const ConvLayer&) const = default;
};

/// Residual denoising network: convolutions with ReLU between them; the last
/// layer predicts the noise, which is subtracted from the input.
struct CnnWeights {
  double sigma_train = 0.0;
  std::vector<ConvLayer> layers;

  /// Throws LayerError naming the first inconsistent layer.
  void validate() const;
  /// Also checks that the first/last layers match `channels`.
  void validate_for(std::size_t channels) const;

  bool operator==(const CnnWeights&) const = default;
};

/// L layers of 3x3 convolutions, `width` hidden channels, weights drawn with
/// He-style scaling from `rng` (used for tests and as a trainer seed).
CnnWeights random_cnn(std::size_t channels, double sigma_train, Rng& rng,
                      std::size_t layers = 5, std::size_t width = 32,
                      std::size_t kernel_size = 3);

/// Forward pass with periodic same-padding cross-correlation:
///   a_o(i,j) = b_o + sum_{c,r,s} w[o,c,r,s] a_c(i + r - kh/2, j + s - kw/2)
/// ReLU after every layer but the last; output = x - last activation.
Image cnn_infer(const CnnWeights& w, const Image& x);

/// DMSP little-endian byte format.
std::vector<std::uint8_t> save_weights(const CnnWeights& w);
CnnWeights load_weights(std::span<const std::uint8_t> bytes);

CnnWeights read_weights_file(const std::filesystem::path& path);
void write_weights_file(const std::filesystem::path& path, const CnnWeights& w);

class CnnDenoiser final : public Denoiser {
 public:
  explicit CnnDenoiser(CnnWeights weights);
  Image denoise(const Image& x) const override { return cnn_infer(weights_, x); }
  double sigma() const override { return weights_.sigma_train; }
  const CnnWeights& weights() const { return weights_; }

 private:
  CnnWeights weights_;
};

}  // namespace dmsp
