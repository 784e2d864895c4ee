#include "dmsp/image.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dmsp/error.hpp"

namespace dmsp {

std::string to_string(const Shape& s) {
  return fmt::format("{}x{}x{}", s.channels, s.height, s.width);
}

Image::Image(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Image::Image(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError(fmt::format("image data has {} samples, shape {} needs {}",
                                 data_.size(), to_string(shape_), shape_.size()));
  }
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Image& Image::operator+=(const Image& o) {
  require_same_shape(*this, o, "Image::operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Image& Image::operator-=(const Image& o) {
  require_same_shape(*this, o, "Image::operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Image& Image::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Image operator+(Image a, const Image& b) { return a += b; }
Image operator-(Image a, const Image& b) { return a -= b; }
Image operator*(double s, Image a) { return a *= s; }

void require_same_shape(const Image& a, const Image& b, const char* where) {
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", where,
                                 to_string(a.shape()), to_string(b.shape())));
  }
}

double dot(const Image& a, const Image& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(const Image& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

double norm(const Image& a) { return std::sqrt(squared_norm(a)); }

void axpy(double s, const Image& b, Image& a) {
  require_same_shape(a, b, "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

Image clamp(Image x, double lo, double hi) {
  for (double& v : x.data()) v = std::clamp(v, lo, hi);
  return x;
}

Kernel::Kernel(std::size_t height, std::size_t width, std::vector<double> taps)
    : height_(height), width_(width), taps_(std::move(taps)) {
  if (height_ % 2 == 0 || width_ % 2 == 0) {
    throw ShapeError(fmt::format("kernel dimensions must be odd, got {}x{}", height_, width_));
  }
  if (taps_.size() != height_ * width_) {
    throw ShapeError(fmt::format("kernel has {} taps, {}x{} needs {}", taps_.size(),
                                 height_, width_, height_ * width_));
  }
}

Kernel::Kernel(std::size_t height, std::size_t width, double fill)
    : Kernel(height, width, std::vector<double>(height * width, fill)) {}

Kernel Kernel::delta(std::size_t height, std::size_t width) {
  Kernel k(height, width, 0.0);
  k.at(height / 2, width / 2) = 1.0;
  return k;
}

Kernel Kernel::gaussian(std::size_t height, std::size_t width, double stddev) {
  return gaussian(height, width, stddev, stddev);
}

Kernel Kernel::gaussian(std::size_t height, std::size_t width, double stddev_y,
                        double stddev_x) {
  if (!(stddev_y > 0.0) || !(stddev_x > 0.0)) {
    throw ValueError("gaussian kernel stddev must be positive");
  }
  Kernel k(height, width, 0.0);
  const double cy = static_cast<double>(height / 2);
  const double cx = static_cast<double>(width / 2);
  double total = 0.0;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dy = (static_cast<double>(y) - cy) / stddev_y;
      const double dx = (static_cast<double>(x) - cx) / stddev_x;
      const double v = std::exp(-0.5 * (dy * dy + dx * dx));
      k.at(y, x) = v;
      total += v;
    }
  }
  k *= 1.0 / total;
  return k;
}

double Kernel::sum() const {
  double s = 0.0;
  for (double v : taps_) s += v;
  return s;
}

double Kernel::squared_norm() const {
  double s = 0.0;
  for (double v : taps_) s += v * v;
  return s;
}

bool Kernel::all_finite() const {
  return std::all_of(taps_.begin(), taps_.end(),
                     [](double v) { return std::isfinite(v); });
}

Kernel Kernel::flipped() const {
  Kernel out(height_, width_, 0.0);
  for (std::size_t y = 0; y < height_; ++y)
    for (std::size_t x = 0; x < width_; ++x)
      out.at(height_ - 1 - y, width_ - 1 - x) = at(y, x);
  return out;
}

Kernel& Kernel::operator+=(const Kernel& o) {
  if (o.height_ != height_ || o.width_ != width_) {
    throw ShapeError(fmt::format("kernel shape mismatch {}x{} vs {}x{}", height_, width_,
                                 o.height_, o.width_));
  }
  for (std::size_t i = 0; i < taps_.size(); ++i) taps_[i] += o.taps_[i];
  return *this;
}

Kernel& Kernel::operator*=(double s) {
  for (double& v : taps_) v *= s;
  return *this;
}

double dot(const Kernel& a, const Kernel& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("kernel dot: shape mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace dmsp
