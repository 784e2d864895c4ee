#pragma once

#include <filesystem>
#include <string>

#include "dmsp/image.hpp"

namespace dmsp::io {

/// 8/16-bit gray or RGB PNG; codes map linearly onto [0,1] (no gamma decode).
/// Palettes are expanded and alpha is dropped.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img, int bit_depth = 16);

/// Little-endian 32-bit PFM ("Pf" gray, "PF" RGB), rows stored bottom-up.
Image read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Image& img);

/// Dispatches on the extension (.png or .pfm).
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

/// Plain text: "h w" then h rows of w reals.
Kernel read_kernel(const std::filesystem::path& path);
void write_kernel(const std::filesystem::path& path, const Kernel& k);
Kernel parse_kernel(const std::string& text);
std::string format_kernel(const Kernel& k);

}  // namespace dmsp::io
