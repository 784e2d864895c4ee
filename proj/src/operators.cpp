#include "dmsp/operators.hpp"

#include <algorithm>
#include <string>

#include <fmt/format.h>

#include "dmsp/error.hpp"

namespace dmsp {
namespace {

std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  std::ptrdiff_t r = i % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

void require_kernel_fits(const Image& x, const Kernel& k, const char* where) {
  if (k.height() > x.height() || k.width() > x.width()) {
    throw ShapeError(fmt::format("{}: kernel {}x{} larger than image {}", where,
                                 k.height(), k.width(), to_string(x.shape())));
  }
  if (k.size() == 0) throw ShapeError(fmt::format("{}: empty kernel", where));
}

// out(y, x) += w * in((y - dy) mod H, (x - dx) mod W) for one plane.
void accumulate_shifted(std::span<const double> in, std::span<double> out, std::size_t h,
                        std::size_t w, std::ptrdiff_t dy, std::ptrdiff_t dx, double weight) {
  const std::size_t sx = wrap(-dx, w);  // source column for output column 0
  for (std::size_t y = 0; y < h; ++y) {
    const double* src = in.data() + wrap(static_cast<std::ptrdiff_t>(y) - dy, h) * w;
    double* dst = out.data() + y * w;
    const std::size_t first = w - sx;  // output columns served before wrap
    for (std::size_t x = 0; x < first; ++x) dst[x] += weight * src[sx + x];
    for (std::size_t x = first; x < w; ++x) dst[x] += weight * src[x - first];
  }
}

Image shifted_sum(const Image& x, const Kernel& k, int sign) {
  Image out(x.shape(), 0.0);
  const auto cy = k.center_y();
  const auto cx = k.center_x();
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t a = 0; a < k.height(); ++a) {
      for (std::size_t b = 0; b < k.width(); ++b) {
        const double t = k.at(a, b);
        if (t == 0.0) continue;
        const std::ptrdiff_t dy = sign * (static_cast<std::ptrdiff_t>(a) - cy);
        const std::ptrdiff_t dx = sign * (static_cast<std::ptrdiff_t>(b) - cx);
        accumulate_shifted(x.plane(c), out.plane(c), x.height(), x.width(), dy, dx, t);
      }
    }
  }
  return out;
}

}  // namespace

Image convolve(const Image& x, const Kernel& k) {
  require_kernel_fits(x, k, "convolve");
  return shifted_sum(x, k, +1);
}

Image adjoint_convolve(const Image& y, const Kernel& k) {
  require_kernel_fits(y, k, "adjoint_convolve");
  return shifted_sum(y, k, -1);
}

Kernel correlate_to_kernel(const Image& x, const Image& z, std::size_t kh, std::size_t kw) {
  require_same_shape(x, z, "correlate_to_kernel");
  Kernel out(kh, kw, 0.0);
  require_kernel_fits(x, out, "correlate_to_kernel");
  const auto cy = out.center_y();
  const auto cx = out.center_x();
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  for (std::size_t a = 0; a < kh; ++a) {
    for (std::size_t b = 0; b < kw; ++b) {
      const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(a) - cy;
      const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(b) - cx;
      double s = 0.0;
      for (std::size_t c = 0; c < x.channels(); ++c) {
        const auto xp = x.plane(c);
        const auto zp = z.plane(c);
        for (std::size_t i = 0; i < h; ++i) {
          const double* xr = xp.data() + wrap(static_cast<std::ptrdiff_t>(i) - dy, h) * w;
          const double* zr = zp.data() + i * w;
          for (std::size_t j = 0; j < w; ++j) {
            s += xr[wrap(static_cast<std::ptrdiff_t>(j) - dx, w)] * zr[j];
          }
        }
      }
      out.at(a, b) = s;
    }
  }
  return out;
}

Image downsample(const Image& x, std::size_t factor) {
  if (factor == 0) throw ValueError("downsample: factor must be >= 1");
  if (x.height() % factor != 0 || x.width() % factor != 0) {
    throw ShapeError(fmt::format("downsample: image {} not divisible by {}",
                                 to_string(x.shape()), factor));
  }
  if (factor == 1) return x;
  Image out({x.channels(), x.height() / factor, x.width() / factor});
  for (std::size_t c = 0; c < out.channels(); ++c)
    for (std::size_t y = 0; y < out.height(); ++y)
      for (std::size_t v = 0; v < out.width(); ++v)
        out.at(c, y, v) = x.at(c, y * factor, v * factor);
  return out;
}

Image upsample_adjoint(const Image& y, std::size_t factor) {
  if (factor == 0) throw ValueError("upsample_adjoint: factor must be >= 1");
  if (factor == 1) return y;
  Image out({y.channels(), y.height() * factor, y.width() * factor}, 0.0);
  for (std::size_t c = 0; c < y.channels(); ++c)
    for (std::size_t i = 0; i < y.height(); ++i)
      for (std::size_t j = 0; j < y.width(); ++j)
        out.at(c, i * factor, j * factor) = y.at(c, i, j);
  return out;
}

Image apply_mask(const Image& x, const Image& mask) {
  require_same_shape(x, mask, "apply_mask");
  Image out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

BayerPattern parse_bayer_pattern(std::string_view name) {
  if (name == "RGGB") return BayerPattern::RGGB;
  if (name == "BGGR") return BayerPattern::BGGR;
  if (name == "GRBG") return BayerPattern::GRBG;
  if (name == "GBRG") return BayerPattern::GBRG;
  throw ValueError(fmt::format("unknown Bayer pattern '{}'", name));
}

std::string_view to_string(BayerPattern p) {
  switch (p) {
    case BayerPattern::RGGB: return "RGGB";
    case BayerPattern::BGGR: return "BGGR";
    case BayerPattern::GRBG: return "GRBG";
    case BayerPattern::GBRG: return "GBRG";
  }
  return "?";
}

Image bayer_mask(BayerPattern pattern, std::size_t height, std::size_t width) {
  const std::string_view layout = to_string(pattern);
  Image mask({3, height, width}, 0.0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const char color = layout[(y % 2) * 2 + (x % 2)];
      const std::size_t c = color == 'R' ? 0 : color == 'G' ? 1 : 2;
      mask.at(c, y, x) = 1.0;
    }
  }
  return mask;
}

DegradationOp::DegradationOp(Shape latent, Kernel kernel, std::size_t scale,
                             std::optional<Image> mask)
    : latent_(latent), kernel_(std::move(kernel)), scale_(scale), mask_(std::move(mask)) {
  if (scale_ == 0) throw ValueError("DegradationOp: scale must be >= 1");
  if (latent_.size() == 0) throw ShapeError("DegradationOp: empty latent shape");
  if (latent_.height % scale_ != 0 || latent_.width % scale_ != 0) {
    throw ShapeError(fmt::format("DegradationOp: latent {} not divisible by scale {}",
                                 to_string(latent_), scale_));
  }
  if (kernel_.height() > latent_.height || kernel_.width() > latent_.width) {
    throw ShapeError(fmt::format("DegradationOp: kernel {}x{} larger than latent {}",
                                 kernel_.height(), kernel_.width(), to_string(latent_)));
  }
  observed_ = {latent_.channels, latent_.height / scale_, latent_.width / scale_};
  observed_count_ = observed_.size();
  if (mask_) {
    if (mask_->shape() != observed_) {
      throw ShapeError(fmt::format("DegradationOp: mask {} does not match observation {}",
                                   to_string(mask_->shape()), to_string(observed_)));
    }
    observed_count_ = 0;
    for (double v : mask_->data()) {
      if (v != 0.0 && v != 1.0) throw ValueError("DegradationOp: mask values must be 0 or 1");
      if (v == 1.0) ++observed_count_;
    }
  }
}

Image DegradationOp::apply(const Image& x) const {
  if (x.shape() != latent_) {
    throw ShapeError(fmt::format("DegradationOp::apply: got {}, expected {}",
                                 to_string(x.shape()), to_string(latent_)));
  }
  Image y = downsample(convolve(x, kernel_), scale_);
  return mask_ ? apply_mask(y, *mask_) : y;
}

Image DegradationOp::adjoint(const Image& y) const {
  if (y.shape() != observed_) {
    throw ShapeError(fmt::format("DegradationOp::adjoint: got {}, expected {}",
                                 to_string(y.shape()), to_string(observed_)));
  }
  const Image masked = mask_ ? apply_mask(y, *mask_) : y;
  return adjoint_convolve(upsample_adjoint(masked, scale_), kernel_);
}

Kernel DegradationOp::kernel_adjoint(const Image& x, const Image& r) const {
  if (x.shape() != latent_ || r.shape() != observed_) {
    throw ShapeError(fmt::format("DegradationOp::kernel_adjoint: got x {} r {}, expected {} {}",
                                 to_string(x.shape()), to_string(r.shape()),
                                 to_string(latent_), to_string(observed_)));
  }
  const Image masked = mask_ ? apply_mask(r, *mask_) : r;
  return correlate_to_kernel(x, upsample_adjoint(masked, scale_), kernel_.height(),
                             kernel_.width());
}

DegradationOp DegradationOp::with_kernel(Kernel k) const {
  return DegradationOp(latent_, std::move(k), scale_, mask_);
}

void add_gaussian_noise(Image& x, double stddev, Rng& rng) {
  if (stddev < 0.0) throw ValueError("noise stddev must be >= 0");
  if (stddev == 0.0) return;
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& v : x.data()) v += normal(rng);
}

Image degrade(const Image& x, const DegradationOp& op, double sigma_n, Rng& rng) {
  if (!(sigma_n >= 0.0)) throw ValueError("degrade: sigma_n must be >= 0");
  Image y = op.apply(x);
  add_gaussian_noise(y, sigma_n, rng);
  // Unobserved samples stay exactly zero so N counts every noisy sample.
  return op.mask() ? apply_mask(y, *op.mask()) : y;
}

}  // namespace dmsp
