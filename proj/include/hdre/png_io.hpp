#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hdre/image.hpp"

namespace hdre::img {

/// Reads an 8-bit RGB PNG. Any other bit depth or color type raises
/// UnsupportedError.
LdrImage read_png(std::span<const std::uint8_t> bytes);
LdrImage read_png_file(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG; the pixel payload round-trips byte-identically.
std::vector<std::uint8_t> write_png(const LdrImage& img);
void write_png_file(const LdrImage& img, const std::filesystem::path& path);

} // namespace hdre::img
