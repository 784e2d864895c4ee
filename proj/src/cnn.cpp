#include "dmsp/cnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "dmsp/error.hpp"

namespace dmsp {
namespace {

constexpr std::uint8_t kMagic[4] = {'D', 'M', 'S', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "weight codec assumes a little-endian host");

std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  const std::ptrdiff_t r = i % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

// out(i, j) += w * in(i + dy, j + dx), periodic.
void accumulate_tap(const double* in, double* out, std::size_t h, std::size_t w,
                    std::ptrdiff_t dy, std::ptrdiff_t dx, double weight) {
  const std::size_t sx = wrap(dx, w);
  const std::size_t first = w - sx;
  for (std::size_t i = 0; i < h; ++i) {
    const double* src = in + wrap(static_cast<std::ptrdiff_t>(i) + dy, h) * w;
    double* dst = out + i * w;
    for (std::size_t j = 0; j < first; ++j) dst[j] += weight * src[sx + j];
    for (std::size_t j = first; j < w; ++j) dst[j] += weight * src[j - first];
  }
}

std::vector<double> conv_layer(const ConvLayer& layer, const std::vector<double>& in,
                               std::size_t h, std::size_t w) {
  const std::size_t plane = h * w;
  std::vector<double> out(layer.out_channels * plane);
  const auto ch = static_cast<std::ptrdiff_t>(layer.kernel_height / 2);
  const auto cw = static_cast<std::ptrdiff_t>(layer.kernel_width / 2);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    double* dst = out.data() + o * plane;
    std::fill(dst, dst + plane, static_cast<double>(layer.biases[o]));
    for (std::size_t c = 0; c < layer.in_channels; ++c) {
      const double* src = in.data() + c * plane;
      for (std::size_t r = 0; r < layer.kernel_height; ++r) {
        for (std::size_t s = 0; s < layer.kernel_width; ++s) {
          const double wt = layer.weight(o, c, r, s);
          if (wt == 0.0) continue;
          accumulate_tap(src, dst, h, w, static_cast<std::ptrdiff_t>(r) - ch,
                         static_cast<std::ptrdiff_t>(s) - cw, wt);
        }
      }
    }
  }
  return out;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    bytes_.insert(bytes_.end(), std::begin(raw), std::end(raw));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if (remaining() < sizeof(T)) {
      throw TruncatedError(fmt::format("weights truncated while reading {} at byte {}", what, pos_));
    }
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::span<const std::uint8_t> take(std::size_t n) {
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_layer(const ConvLayer& l, std::size_t index) {
  if (l.out_channels == 0 || l.in_channels == 0 || l.kernel_height == 0 || l.kernel_width == 0) {
    throw LayerError(fmt::format("layer {}: zero dimension", index), index);
  }
  if (l.kernel_height % 2 == 0 || l.kernel_width % 2 == 0) {
    throw LayerError(fmt::format("layer {}: kernel {}x{} must have odd dimensions", index,
                                 l.kernel_height, l.kernel_width),
                     index);
  }
  const std::size_t expected = static_cast<std::size_t>(l.out_channels) * l.in_channels *
                               l.kernel_height * l.kernel_width;
  if (l.weights.size() != expected || l.biases.size() != l.out_channels) {
    throw LayerError(fmt::format("layer {}: {} weights / {} biases, expected {} / {}", index,
                                 l.weights.size(), l.biases.size(), expected, l.out_channels),
                     index);
  }
  for (float v : l.weights)
    if (!std::isfinite(v)) throw LayerError(fmt::format("layer {}: non-finite weight", index), index);
  for (float v : l.biases)
    if (!std::isfinite(v)) throw LayerError(fmt::format("layer {}: non-finite bias", index), index);
}

}  // namespace

void CnnWeights::validate() const {
  if (!(sigma_train > 0.0) || !std::isfinite(sigma_train)) {
    throw ValueError(fmt::format("CnnWeights: sigma_train {} must be > 0", sigma_train));
  }
  if (layers.empty()) throw LayerError("CnnWeights: no layers", 0);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    check_layer(layers[i], i);
    if (i > 0 && layers[i].in_channels != layers[i - 1].out_channels) {
      throw LayerError(fmt::format("layer {}: takes {} channels but layer {} produces {}", i,
                                   layers[i].in_channels, i - 1, layers[i - 1].out_channels),
                       i);
    }
  }
  if (layers.back().out_channels != layers.front().in_channels) {
    throw LayerError(fmt::format("layer {}: produces {} channels, residual needs {}",
                                 layers.size() - 1, layers.back().out_channels,
                                 layers.front().in_channels),
                     layers.size() - 1);
  }
}

void CnnWeights::validate_for(std::size_t channels) const {
  validate();
  if (layers.front().in_channels != channels) {
    throw LayerError(fmt::format("layer 0: expects {} channels, image has {}",
                                 layers.front().in_channels, channels),
                     0);
  }
}

CnnWeights random_cnn(std::size_t channels, double sigma_train, Rng& rng, std::size_t layers,
                      std::size_t width, std::size_t kernel_size) {
  if (layers == 0 || width == 0 || kernel_size % 2 == 0) {
    throw ValueError("random_cnn: need >= 1 layer, width >= 1 and an odd kernel size");
  }
  CnnWeights w;
  w.sigma_train = sigma_train;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < layers; ++l) {
    ConvLayer layer;
    layer.in_channels = static_cast<std::uint32_t>(l == 0 ? channels : width);
    layer.out_channels = static_cast<std::uint32_t>(l + 1 == layers ? channels : width);
    layer.kernel_height = layer.kernel_width = static_cast<std::uint32_t>(kernel_size);
    const double fan_in = static_cast<double>(layer.in_channels * kernel_size * kernel_size);
    const double scale = std::sqrt(2.0 / fan_in);
    layer.weights.resize(static_cast<std::size_t>(layer.out_channels) * layer.in_channels *
                         kernel_size * kernel_size);
    for (float& v : layer.weights) v = static_cast<float>(scale * normal(rng));
    layer.biases.resize(layer.out_channels);
    for (float& v : layer.biases) v = static_cast<float>(0.01 * normal(rng));
    w.layers.push_back(std::move(layer));
  }
  return w;
}

Image cnn_infer(const CnnWeights& w, const Image& x) {
  w.validate_for(x.channels());
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    if (w.layers[l].kernel_height > x.height() || w.layers[l].kernel_width > x.width()) {
      throw LayerError(fmt::format("layer {}: kernel larger than image {}", l,
                                   to_string(x.shape())),
                       l);
    }
  }
  std::vector<double> act = x.data();
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    act = conv_layer(w.layers[l], act, x.height(), x.width());
    if (l + 1 < w.layers.size()) {
      for (double& v : act) v = std::max(v, 0.0);
    }
  }
  Image out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= act[i];
  return out;
}

std::vector<std::uint8_t> save_weights(const CnnWeights& w) {
  w.validate();
  Writer out;
  for (std::uint8_t b : kMagic) out.put(b);
  out.put(kFormatVersion);
  out.put(w.sigma_train);
  out.put(static_cast<std::uint32_t>(w.layers.size()));
  for (const ConvLayer& l : w.layers) {
    out.put(l.out_channels);
    out.put(l.in_channels);
    out.put(l.kernel_height);
    out.put(l.kernel_width);
    for (float v : l.weights) out.put(v);
    for (float v : l.biases) out.put(v);
  }
  return out.take();
}

CnnWeights load_weights(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (bytes.size() < 4) throw TruncatedError("weights truncated: missing magic");
  const auto magic = in.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw MagicMismatchError("weights: magic bytes are not 'DMSP'");
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kFormatVersion) {
    throw UnsupportedVersionError(fmt::format("weights: unsupported format version {}", version));
  }
  CnnWeights w;
  w.sigma_train = in.get<double>("sigma_train");
  const auto count = in.get<std::uint32_t>("layer count");
  if (count == 0) throw LayerShapeError("weights: zero layers", 0);
  for (std::uint32_t i = 0; i < count; ++i) {
    ConvLayer l;
    l.out_channels = in.get<std::uint32_t>("out channels");
    l.in_channels = in.get<std::uint32_t>("in channels");
    l.kernel_height = in.get<std::uint32_t>("kernel height");
    l.kernel_width = in.get<std::uint32_t>("kernel width");
    if (l.out_channels == 0 || l.in_channels == 0 || l.kernel_height % 2 == 0 ||
        l.kernel_width % 2 == 0) {
      throw LayerShapeError(fmt::format("weights: layer {} has invalid shape {}x{}x{}x{}", i,
                                        l.out_channels, l.in_channels, l.kernel_height,
                                        l.kernel_width),
                            i);
    }
    if (i > 0 && l.in_channels != w.layers.back().out_channels) {
      throw LayerShapeError(fmt::format("weights: layer {} takes {} channels, previous gives {}",
                                        i, l.in_channels, w.layers.back().out_channels),
                            i);
    }
    const std::uint64_t n = static_cast<std::uint64_t>(l.out_channels) * l.in_channels *
                            l.kernel_height * l.kernel_width;
    if ((n + l.out_channels) * sizeof(float) > in.remaining()) {
      throw TruncatedError(fmt::format("weights truncated in layer {}", i));
    }
    l.weights.resize(n);
    for (float& v : l.weights) v = in.get<float>("weight");
    l.biases.resize(l.out_channels);
    for (float& v : l.biases) v = in.get<float>("bias");
    w.layers.push_back(std::move(l));
  }
  if (in.remaining() != 0) {
    throw FormatError(fmt::format("weights: {} trailing bytes", in.remaining()));
  }
  if (w.layers.back().out_channels != w.layers.front().in_channels) {
    throw LayerShapeError("weights: last layer channel count differs from the input",
                          w.layers.size() - 1);
  }
  try {
    w.validate();
  } catch (const LayerError& e) {
    throw LayerShapeError(e.what(), e.layer());
  } catch (const ValueError& e) {
    throw FormatError(e.what());
  }
  return w;
}

CnnWeights read_weights_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open weights '{}'", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_weights(bytes);
}

void write_weights_file(const std::filesystem::path& path, const CnnWeights& w) {
  const auto bytes = save_weights(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

CnnDenoiser::CnnDenoiser(CnnWeights weights) : weights_(std::move(weights)) {
  weights_.validate();
}

}  // namespace dmsp
