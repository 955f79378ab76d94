#include "hdre/image.hpp"

#include <cmath>

#include "hdre/errors.hpp"

namespace hdre::img {

HdrImage HdrImage::filled(int w, int h, float r, float g, float b) {
    HdrImage img;
    img.width = w;
    img.height = h;
    img.data.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < img.data.size(); i += 3) {
        img.data[i] = r;
        img.data[i + 1] = g;
        img.data[i + 2] = b;
    }
    return img;
}

LdrImage LdrImage::filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    LdrImage img;
    img.width = w;
    img.height = h;
    img.data.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < img.data.size(); i += 3) {
        img.data[i] = r;
        img.data[i + 1] = g;
        img.data[i + 2] = b;
    }
    return img;
}

void validate(const HdrImage& img) {
    if (img.width < 1 || img.height < 1)
        throw InputError("HdrImage: width and height must be >= 1");
    if (img.data.size() != static_cast<std::size_t>(img.width) * img.height * 3)
        throw InputError("HdrImage: data length does not match width*height*3");
    for (float v : img.data) {
        if (!std::isfinite(v) || v < 0.0f)
            throw InputError("HdrImage: channel values must be finite and >= 0");
    }
}

void validate(const LdrImage& img) {
    if (img.width < 1 || img.height < 1)
        throw InputError("LdrImage: width and height must be >= 1");
    if (img.data.size() != static_cast<std::size_t>(img.width) * img.height * 3)
        throw InputError("LdrImage: data length does not match width*height*3");
}

double geometric_mean_luminance(const HdrImage& img) {
    if (img.empty()) throw InputError("geometric_mean_luminance: empty image");
    double acc = 0.0;
    const std::size_t pixels = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t p = 0; p < pixels; ++p) {
        const float* px = img.data.data() + 3 * p;
        acc += std::log(kLogMeanDelta + static_cast<double>(luminance(px[0], px[1], px[2])));
    }
    return std::exp(acc / static_cast<double>(pixels));
}

HdrImage to_float(const LdrImage& img) {
    HdrImage out;
    out.width = img.width;
    out.height = img.height;
    out.data.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
    return out;
}

std::uint8_t float_to_code(float f) {
    if (!(f > 0.0f)) f = 0.0f;
    if (f > 1.0f) f = 1.0f;
    return static_cast<std::uint8_t>(std::lround(f * 255.0f));
}

LdrImage quantize(const HdrImage& img) {
    LdrImage out;
    out.width = img.width;
    out.height = img.height;
    out.data.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = float_to_code(img.data[i]);
    return out;
}

} // namespace hdre::img
