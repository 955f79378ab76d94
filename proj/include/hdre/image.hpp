#pragma once

#include <cstdint>
#include <vector>

namespace hdre::img {

/// Linear radiance map: three nonnegative finite floats per pixel.
struct HdrImage {
    int width = 0;
    int height = 0;
    std::vector<float> data; // interleaved RGB, width*height*3

    static HdrImage filled(int w, int h, float r, float g, float b);

    float* pixel(int x, int y) { return data.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
    const float* pixel(int x, int y) const {
        return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
    bool empty() const { return width <= 0 || height <= 0; }
};

/// Display-referred 8-bit RGB image.
struct LdrImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // interleaved RGB, width*height*3

    static LdrImage filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

    std::uint8_t* pixel(int x, int y) {
        return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
    const std::uint8_t* pixel(int x, int y) const {
        return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
    bool empty() const { return width <= 0 || height <= 0; }
};

/// Throws InputError when the image violates its type invariants
/// (dimension/payload mismatch, negative or non-finite radiance).
void validate(const HdrImage& img);
void validate(const LdrImage& img);

/// Rec. 709 luma coefficients, the project-wide luminance definition.
inline constexpr float kLumaR = 0.2126f;
inline constexpr float kLumaG = 0.7152f;
inline constexpr float kLumaB = 0.0722f;

inline float luminance(float r, float g, float b) {
    return kLumaR * r + kLumaG * g + kLumaB * b;
}

/// Zero guard inside the log-average luminance.
inline constexpr double kLogMeanDelta = 1e-6;

/// exp(mean(ln(delta + L))) over all pixels.
double geometric_mean_luminance(const HdrImage& img);

inline float code_to_float(std::uint8_t c) { return static_cast<float>(c) / 255.0f; }

/// round(clamp(f, 0, 1) * 255); NaN maps to 0.
std::uint8_t float_to_code(float f);

/// Code c maps to c/255.
HdrImage to_float(const LdrImage& img);

/// Float f maps to round(clamp(f, 0, 1) * 255).
LdrImage quantize(const HdrImage& img);

} // namespace hdre::img
