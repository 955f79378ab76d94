#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hdre/image.hpp"

namespace hdre::img {

/// Reads a Radiance RGBE stream (flat or new-style RLE scanlines,
/// "-Y h +X w" orientation only).
HdrImage read_radiance_hdr(std::span<const std::uint8_t> bytes);
HdrImage read_radiance_hdr_file(const std::filesystem::path& path);

/// Writes a Radiance RGBE stream with flat scanlines.
std::vector<std::uint8_t> write_radiance_hdr(const HdrImage& img);
void write_radiance_hdr_file(const HdrImage& img, const std::filesystem::path& path);

/// Shared-exponent encoding of one RGB triple, (m+0.5)/256 * 2^(e-128)
/// decode convention. Exposed for tests.
void rgb_to_rgbe(float r, float g, float b, std::uint8_t out[4]);
void rgbe_to_rgb(const std::uint8_t rgbe[4], float& r, float& g, float& b);

} // namespace hdre::img
