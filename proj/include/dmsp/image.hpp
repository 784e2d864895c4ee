#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dmsp {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t plane() const { return height * width; }
  std::size_t size() const { return channels * height * width; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Planar, channel-major raster of 64-bit samples. Nominal range is [0,1]
/// but nothing here enforces it; intermediate iterates leave that range.
class Image {
 public:
  Image() = default;
  explicit Image(Shape shape, double fill = 0.0);
  Image(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> plane(std::size_t c) {
    return {data_.data() + c * shape_.plane(), shape_.plane()};
  }
  std::span<const double> plane(std::size_t c) const {
    return {data_.data() + c * shape_.plane(), shape_.plane()};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;

  Image& operator+=(const Image& o);
  Image& operator-=(const Image& o);
  Image& operator*=(double s);

  bool operator==(const Image&) const = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

Image operator+(Image a, const Image& b);
Image operator-(Image a, const Image& b);
Image operator*(double s, Image a);

/// Throws ShapeError naming both shapes unless a and b agree.
void require_same_shape(const Image& a, const Image& b, const char* where);

double dot(const Image& a, const Image& b);
double squared_norm(const Image& a);
double norm(const Image& a);

/// a += s * b
void axpy(double s, const Image& b, Image& a);

Image clamp(Image x, double lo, double hi);

/// A 2D point-spread function shared by all channels. Dimensions are odd so
/// that tap (height/2, width/2) is the origin. Normalization is not enforced
/// here: kernel-shaped gradients and momentum steps use the same type.
class Kernel {
 public:
  Kernel() = default;
  Kernel(std::size_t height, std::size_t width, std::vector<double> taps);
  Kernel(std::size_t height, std::size_t width, double fill = 0.0);

  static Kernel delta(std::size_t height = 1, std::size_t width = 1);
  /// Centered isotropic Gaussian, normalized to unit sum.
  static Kernel gaussian(std::size_t height, std::size_t width, double stddev);
  /// Centered Gaussian with independent row/column deviations.
  static Kernel gaussian(std::size_t height, std::size_t width, double stddev_y,
                         double stddev_x);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return taps_.size(); }
  std::ptrdiff_t center_y() const { return static_cast<std::ptrdiff_t>(height_ / 2); }
  std::ptrdiff_t center_x() const { return static_cast<std::ptrdiff_t>(width_ / 2); }

  double& at(std::size_t y, std::size_t x) { return taps_[y * width_ + x]; }
  double at(std::size_t y, std::size_t x) const { return taps_[y * width_ + x]; }
  double& operator[](std::size_t i) { return taps_[i]; }
  double operator[](std::size_t i) const { return taps_[i]; }

  const std::vector<double>& taps() const { return taps_; }
  std::vector<double>& taps() { return taps_; }

  double sum() const;
  double squared_norm() const;
  bool all_finite() const;
  /// Kernel rotated by 180 degrees.
  Kernel flipped() const;

  Kernel& operator+=(const Kernel& o);
  Kernel& operator*=(double s);

  bool operator==(const Kernel&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> taps_;
};

double dot(const Kernel& a, const Kernel& b);

}  // namespace dmsp
