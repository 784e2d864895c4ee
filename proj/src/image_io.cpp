#include "dmsp/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include <fmt/format.h>
#include <png.h>

#include "dmsp/error.hpp"

namespace dmsp::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "PFM and weight encoders assume a little-endian host");

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError(fmt::format("cannot open '{}': {}", path.string(), std::strerror(errno)));
  return f;
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Decodes into `rows` (8 or 16 bit, big-endian samples). Only PODs and
// objects constructed before setjmp live in this frame.
bool decode_png(std::FILE* fp, png_uint_32& width, png_uint_32& height, int& channels,
                int& depth, std::vector<unsigned char>& pixels, std::string& message) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) {
    message = "png_create_read_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    message = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    message = "libpng decode error";
    return false;
  }
  png_init_io(png, fp);
  png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA, nullptr);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  png_bytepp rows = png_get_rows(png, info);
  pixels.resize(row_bytes * height);
  for (png_uint_32 y = 0; y < height; ++y) {
    std::memcpy(pixels.data() + y * row_bytes, rows[y], row_bytes);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode_png(std::FILE* fp, png_uint_32 width, png_uint_32 height, int channels, int depth,
                const std::vector<unsigned char>& pixels, std::string& message) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) {
    message = "png_create_write_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    message = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    message = "libpng encode error";
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * channels * (depth / 8);
  for (png_uint_32 y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * row_bytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  int depth = 0;
  std::vector<unsigned char> pixels;
  std::string message;
  if (!decode_png(f.get(), width, height, channels, depth, pixels, message)) {
    throw IoError(fmt::format("'{}': {}", path.string(), message));
  }
  if (channels != 1 && channels != 3) {
    throw IoError(fmt::format("'{}': unsupported channel count {}", path.string(), channels));
  }
  const double max_code = depth == 16 ? 65535.0 : 255.0;
  Image img({static_cast<std::size_t>(channels), height, width});
  std::size_t i = 0;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        double code;
        if (depth == 16) {
          code = static_cast<double>((pixels[i] << 8) | pixels[i + 1]);
          i += 2;
        } else {
          code = static_cast<double>(pixels[i]);
          i += 1;
        }
        img.at(static_cast<std::size_t>(c), y, x) = code / max_code;
      }
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ValueError("write_png: bit depth must be 8 or 16");
  if (img.channels() != 1 && img.channels() != 3) {
    throw ValueError(fmt::format("write_png: unsupported channel count {}", img.channels()));
  }
  const double max_code = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<unsigned char> pixels;
  pixels.reserve(img.size() * static_cast<std::size_t>(bit_depth / 8));
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < img.channels(); ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        const auto code = static_cast<std::uint32_t>(std::lround(v * max_code));
        if (bit_depth == 16) pixels.push_back(static_cast<unsigned char>(code >> 8));
        pixels.push_back(static_cast<unsigned char>(code & 0xff));
      }
    }
  }
  FilePtr f = open_file(path, "wb");
  std::string message;
  if (!encode_png(f.get(), static_cast<png_uint_32>(img.width()),
                  static_cast<png_uint_32>(img.height()), static_cast<int>(img.channels()),
                  bit_depth, pixels, message)) {
    throw IoError(fmt::format("'{}': {}", path.string(), message));
  }
}

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string magic;
  std::size_t width = 0;
  std::size_t height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || (magic != "PF" && magic != "Pf")) {
    throw IoError(fmt::format("'{}': not a PFM file", path.string()));
  }
  if (scale >= 0.0) {
    throw IoError(fmt::format("'{}': big-endian PFM is not supported", path.string()));
  }
  in.get();  // single whitespace after the scale line
  const std::size_t channels = magic == "PF" ? 3 : 1;
  std::vector<float> raw(width * height * channels);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(float))) {
    throw IoError(fmt::format("'{}': truncated PFM payload", path.string()));
  }
  Image img({channels, height, width});
  std::size_t i = 0;
  for (std::size_t row = 0; row < height; ++row) {
    const std::size_t y = height - 1 - row;
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < channels; ++c) img.at(c, y, x) = raw[i++];
  }
  if (!img.all_finite()) throw IoError(fmt::format("'{}': non-finite samples", path.string()));
  return img;
}

void write_pfm(const std::filesystem::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ValueError(fmt::format("write_pfm: unsupported channel count {}", img.channels()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out << (img.channels() == 3 ? "PF" : "Pf") << '\n'
      << img.width() << ' ' << img.height() << '\n'
      << "-1.0\n";
  std::vector<float> raw;
  raw.reserve(img.size());
  for (std::size_t row = 0; row < img.height(); ++row) {
    const std::size_t y = img.height() - 1 - row;
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < img.channels(); ++c)
        raw.push_back(static_cast<float>(img.at(c, y, x)));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

Image read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pfm") return read_pfm(path);
  throw IoError(fmt::format("'{}': unsupported image extension", path.string()));
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return write_png(path, img);
  if (ext == ".pfm") return write_pfm(path, img);
  throw IoError(fmt::format("'{}': unsupported image extension", path.string()));
}

Kernel parse_kernel(const std::string& text) {
  std::istringstream in(text);
  std::size_t h = 0;
  std::size_t w = 0;
  if (!(in >> h >> w) || h == 0 || w == 0) throw IoError("kernel text: bad 'h w' header");
  std::vector<double> taps(h * w);
  for (double& t : taps) {
    if (!(in >> t)) throw IoError("kernel text: too few taps");
  }
  std::string extra;
  if (in >> extra) throw IoError("kernel text: trailing data after last row");
  try {
    return Kernel(h, w, std::move(taps));
  } catch (const ShapeError& e) {
    throw IoError(fmt::format("kernel text: {}", e.what()));
  }
}

std::string format_kernel(const Kernel& k) {
  std::string out = fmt::format("{} {}\n", k.height(), k.width());
  for (std::size_t y = 0; y < k.height(); ++y) {
    for (std::size_t x = 0; x < k.width(); ++x) {
      out += fmt::format("{}{:.17g}", x == 0 ? "" : " ", k.at(y, x));
    }
    out += '\n';
  }
  return out;
}

Kernel read_kernel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open kernel '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_kernel(buf.str());
}

void write_kernel(const std::filesystem::path& path, const Kernel& k) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out << format_kernel(k);
}

}  // namespace dmsp::io
