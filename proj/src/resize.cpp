#include "hdre/resize.hpp"

#include <cmath>
#include <vector>

#include "hdre/errors.hpp"

namespace hdre::img {
namespace {

struct Taps {
    std::vector<int> lo, hi;
    std::vector<float> frac;
};

Taps make_taps(int in_size, int out_size) {
    Taps t;
    t.lo.resize(static_cast<std::size_t>(out_size));
    t.hi.resize(static_cast<std::size_t>(out_size));
    t.frac.resize(static_cast<std::size_t>(out_size));
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        const double limit = in_size - 1;
        if (src > limit) src = limit;
        const int lo = static_cast<int>(std::floor(src));
        t.lo[static_cast<std::size_t>(o)] = lo;
        t.hi[static_cast<std::size_t>(o)] = lo + 1 < in_size ? lo + 1 : lo;
        t.frac[static_cast<std::size_t>(o)] = static_cast<float>(src - lo);
    }
    return t;
}

} // namespace

HdrImage resize_bilinear(const HdrImage& img, int out_w, int out_h) {
    if (img.empty()) throw InputError("resize_bilinear: empty image");
    if (out_w < 1 || out_h < 1) throw InputError("resize_bilinear: output size must be >= 1");
    if (out_w == img.width && out_h == img.height) return img;

    const Taps tx = make_taps(img.width, out_w);
    const Taps ty = make_taps(img.height, out_h);

    HdrImage out;
    out.width = out_w;
    out.height = out_h;
    out.data.resize(static_cast<std::size_t>(out_w) * out_h * 3);
    for (int y = 0; y < out_h; ++y) {
        const float* row0 = img.pixel(0, ty.lo[static_cast<std::size_t>(y)]);
        const float* row1 = img.pixel(0, ty.hi[static_cast<std::size_t>(y)]);
        const float fy = ty.frac[static_cast<std::size_t>(y)];
        float* dst = out.pixel(0, y);
        for (int x = 0; x < out_w; ++x) {
            const int x0 = 3 * tx.lo[static_cast<std::size_t>(x)];
            const int x1 = 3 * tx.hi[static_cast<std::size_t>(x)];
            const float fx = tx.frac[static_cast<std::size_t>(x)];
            for (int c = 0; c < 3; ++c) {
                const float top = row0[x0 + c] + fx * (row0[x1 + c] - row0[x0 + c]);
                const float bot = row1[x0 + c] + fx * (row1[x1 + c] - row1[x0 + c]);
                dst[3 * x + c] = top + fy * (bot - top);
            }
        }
    }
    return out;
}

LdrImage resize_bilinear(const LdrImage& img, int out_w, int out_h) {
    return quantize(resize_bilinear(to_float(img), out_w, out_h));
}

} // namespace hdre::img
