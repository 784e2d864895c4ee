#include "dmsp/spectral.hpp"

#include <memory>
#include <mutex>

#include <fftw3.h>

#include "dmsp/error.hpp"

namespace dmsp::spectral {
namespace {

// FFTW planning is not thread-safe; execution of a private plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using Buffer = std::unique_ptr<fftw_complex[], FftwFree>;

Buffer allocate(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (p == nullptr) throw Error("fftw_malloc failed");
  return Buffer(p);
}

void transform(fftw_complex* in, fftw_complex* out, std::size_t h, std::size_t w, int sign) {
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), in, out, sign,
                            FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw Error("fftw_plan_dft_2d failed");
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

std::vector<Complex> forward(std::span<const double> plane, std::size_t h, std::size_t w) {
  const std::size_t n = h * w;
  if (plane.size() != n) throw ShapeError("spectral::forward: plane size mismatch");
  Buffer in = allocate(n);
  Buffer out = allocate(n);
  for (std::size_t i = 0; i < n; ++i) {
    in[i][0] = plane[i];
    in[i][1] = 0.0;
  }
  transform(in.get(), out.get(), h, w, FFTW_FORWARD);
  std::vector<Complex> result(n);
  for (std::size_t i = 0; i < n; ++i) result[i] = {out[i][0], out[i][1]};
  return result;
}

std::vector<double> inverse_real(std::span<const Complex> spectrum, std::size_t h,
                                 std::size_t w) {
  const std::size_t n = h * w;
  if (spectrum.size() != n) throw ShapeError("spectral::inverse_real: size mismatch");
  Buffer in = allocate(n);
  Buffer out = allocate(n);
  for (std::size_t i = 0; i < n; ++i) {
    in[i][0] = spectrum[i].real();
    in[i][1] = spectrum[i].imag();
  }
  transform(in.get(), out.get(), h, w, FFTW_BACKWARD);
  std::vector<double> result(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) result[i] = out[i][0] * scale;
  return result;
}

std::vector<Complex> transfer_function(const Kernel& k, std::size_t h, std::size_t w) {
  if (k.height() > h || k.width() > w) throw ShapeError("transfer_function: kernel too large");
  std::vector<double> embedded(h * w, 0.0);
  for (std::size_t a = 0; a < k.height(); ++a) {
    for (std::size_t b = 0; b < k.width(); ++b) {
      const auto dy = static_cast<std::ptrdiff_t>(a) - k.center_y();
      const auto dx = static_cast<std::ptrdiff_t>(b) - k.center_x();
      const std::size_t y = static_cast<std::size_t>((dy % static_cast<std::ptrdiff_t>(h) +
                                                      static_cast<std::ptrdiff_t>(h)) %
                                                     static_cast<std::ptrdiff_t>(h));
      const std::size_t x = static_cast<std::size_t>((dx % static_cast<std::ptrdiff_t>(w) +
                                                      static_cast<std::ptrdiff_t>(w)) %
                                                     static_cast<std::ptrdiff_t>(w));
      embedded[y * w + x] += k.at(a, b);
    }
  }
  return forward(embedded, h, w);
}

Image filter(const Image& x, const Image& gain) {
  require_same_shape(x, gain, "spectral::filter");
  Image out(x.shape());
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  for (std::size_t c = 0; c < x.channels(); ++c) {
    auto spec = forward(x.plane(c), h, w);
    const auto g = gain.plane(c);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= g[i];
    const auto back = inverse_real(spec, h, w);
    std::copy(back.begin(), back.end(), out.plane(c).begin());
  }
  return out;
}

double signed_frequency(std::size_t i, std::size_t n) {
  const auto si = static_cast<double>(i);
  const auto sn = static_cast<double>(n);
  return si <= sn / 2.0 ? si : si - sn;
}

}  // namespace dmsp::spectral
