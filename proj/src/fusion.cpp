#include "hdre/fusion.hpp"

#include <cmath>
#include <cstddef>

#include "hdre/errors.hpp"

namespace hdre::fusion {
namespace {

// Channel-generic float grid; images use c=3, weight maps c=1.
struct Grid {
    int w = 0, h = 0, c = 0;
    std::vector<float> v;

    static Grid make(int w, int h, int c) {
        Grid g;
        g.w = w;
        g.h = h;
        g.c = c;
        g.v.assign(static_cast<std::size_t>(w) * h * c, 0.0f);
        return g;
    }
    float* row(int y) { return v.data() + static_cast<std::size_t>(y) * w * c; }
    const float* row(int y) const { return v.data() + static_cast<std::size_t>(y) * w * c; }
};

constexpr float kKernel[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};

// reflect-101 mirror (no edge duplication)
int mirror(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

Grid blur_binomial(const Grid& src) {
    Grid tmp = Grid::make(src.w, src.h, src.c);
    for (int y = 0; y < src.h; ++y) {
        const float* in = src.row(y);
        float* out = tmp.row(y);
        for (int x = 0; x < src.w; ++x)
            for (int ch = 0; ch < src.c; ++ch) {
                float acc = 0.0f;
                for (int k = -2; k <= 2; ++k)
                    acc += kKernel[k + 2] * in[mirror(x + k, src.w) * src.c + ch];
                out[x * src.c + ch] = acc;
            }
    }
    Grid dst = Grid::make(src.w, src.h, src.c);
    for (int y = 0; y < src.h; ++y) {
        float* out = dst.row(y);
        for (int k = -2; k <= 2; ++k) {
            const float* in = tmp.row(mirror(y + k, src.h));
            const float kv = kKernel[k + 2];
            for (int i = 0; i < src.w * src.c; ++i) out[i] += kv * in[i];
        }
    }
    return dst;
}

Grid downsample(const Grid& src) {
    const Grid blurred = blur_binomial(src);
    Grid dst = Grid::make((src.w + 1) / 2, (src.h + 1) / 2, src.c);
    for (int y = 0; y < dst.h; ++y) {
        const float* in = blurred.row(2 * y);
        float* out = dst.row(y);
        for (int x = 0; x < dst.w; ++x)
            for (int ch = 0; ch < src.c; ++ch) out[x * src.c + ch] = in[2 * x * src.c + ch];
    }
    return dst;
}

// Zero-insertion upsample to (tw, th) followed by the doubled kernel.
Grid upsample(const Grid& src, int tw, int th) {
    const int c = src.c;
    Grid horiz = Grid::make(tw, src.h, c);
    for (int y = 0; y < src.h; ++y) {
        const float* in = src.row(y);
        float* out = horiz.row(y);
        for (int x = 0; x < tw; ++x)
            for (int ch = 0; ch < c; ++ch) {
                float acc = 0.0f;
                for (int k = -2; k <= 2; ++k) {
                    const int j = mirror(x + k, tw);
                    if ((j & 1) == 0 && j / 2 < src.w) acc += kKernel[k + 2] * in[(j / 2) * c + ch];
                }
                out[x * c + ch] = 2.0f * acc;
            }
    }
    Grid dst = Grid::make(tw, th, c);
    for (int y = 0; y < th; ++y) {
        float* out = dst.row(y);
        for (int k = -2; k <= 2; ++k) {
            const int j = mirror(y + k, th);
            if ((j & 1) != 0 || j / 2 >= src.h) continue;
            const float kv = 2.0f * kKernel[k + 2];
            const float* in = horiz.row(j / 2);
            for (int i = 0; i < tw * c; ++i) out[i] += kv * in[i];
        }
    }
    return dst;
}

std::vector<Grid> gaussian_levels(Grid base, int levels) {
    std::vector<Grid> g;
    g.reserve(static_cast<std::size_t>(levels));
    g.push_back(std::move(base));
    for (int l = 1; l < levels; ++l) g.push_back(downsample(g.back()));
    return g;
}

std::vector<Grid> laplacian_levels(Grid base, int levels) {
    std::vector<Grid> g = gaussian_levels(std::move(base), levels);
    for (int l = 0; l + 1 < levels; ++l) {
        const Grid up = upsample(g[static_cast<std::size_t>(l) + 1], g[static_cast<std::size_t>(l)].w,
                                 g[static_cast<std::size_t>(l)].h);
        auto& lvl = g[static_cast<std::size_t>(l)].v;
        for (std::size_t i = 0; i < lvl.size(); ++i) lvl[i] -= up.v[i];
    }
    return g;
}

Grid collapse_levels(std::vector<Grid> levels) {
    Grid acc = std::move(levels.back());
    for (std::size_t l = levels.size() - 1; l-- > 0;) {
        Grid up = upsample(acc, levels[l].w, levels[l].h);
        for (std::size_t i = 0; i < up.v.size(); ++i) up.v[i] += levels[l].v[i];
        acc = std::move(up);
    }
    return acc;
}

Grid from_image(const img::HdrImage& im) {
    Grid g;
    g.w = im.width;
    g.h = im.height;
    g.c = 3;
    g.v = im.data;
    return g;
}

img::HdrImage to_image(Grid g) {
    img::HdrImage im;
    im.width = g.w;
    im.height = g.h;
    im.data = std::move(g.v);
    return im;
}

void check_levels(const img::HdrImage& im, int levels) {
    if (im.empty()) throw InputError("pyramid: empty image");
    if (levels < 1) throw InputError("pyramid: levels must be >= 1");
    if (levels > max_pyramid_levels(im.width, im.height))
        throw InputError("pyramid: too many levels for image size");
}

} // namespace

int max_pyramid_levels(int w, int h) {
    int side = w < h ? w : h;
    int levels = 1;
    while (side > 1) {
        side >>= 1;
        ++levels;
    }
    return levels;
}

int default_pyramid_levels(int w, int h) {
    const int levels = max_pyramid_levels(w, h) - 2;
    return levels < 1 ? 1 : levels;
}

Pyramid gaussian_pyramid(const img::HdrImage& im, int levels) {
    check_levels(im, levels);
    Pyramid p;
    for (auto& g : gaussian_levels(from_image(im), levels)) p.levels.push_back(to_image(std::move(g)));
    return p;
}

Pyramid laplacian_pyramid(const img::HdrImage& im, int levels) {
    check_levels(im, levels);
    Pyramid p;
    for (auto& g : laplacian_levels(from_image(im), levels)) p.levels.push_back(to_image(std::move(g)));
    return p;
}

img::HdrImage collapse(const Pyramid& p) {
    if (p.levels.empty()) throw InputError("collapse: empty pyramid");
    std::vector<Grid> levels;
    levels.reserve(p.levels.size());
    for (const auto& im : p.levels) levels.push_back(from_image(im));
    return to_image(collapse_levels(std::move(levels)));
}

WeightMap quality_weights(const img::HdrImage& im) {
    if (im.empty()) throw InputError("quality_weights: empty image");
    const int w = im.width, h = im.height;

    std::vector<float> gray(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float* px = im.pixel(x, y);
            gray[static_cast<std::size_t>(y) * w + x] = img::luminance(px[0], px[1], px[2]);
        }

    WeightMap wm;
    wm.width = w;
    wm.height = h;
    wm.w.resize(gray.size());

    constexpr float kSigma = 0.2f;
    constexpr float kEps = 1e-12f;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            // contrast: |discrete Laplacian| of the gray channel
            const float lap = gray[static_cast<std::size_t>(mirror(y - 1, h)) * w + x] +
                              gray[static_cast<std::size_t>(mirror(y + 1, h)) * w + x] +
                              gray[static_cast<std::size_t>(y) * w + mirror(x - 1, w)] +
                              gray[static_cast<std::size_t>(y) * w + mirror(x + 1, w)] -
                              4.0f * gray[i];
            const float contrast = std::fabs(lap);

            const float* px = im.pixel(x, y);
            const float mean = (px[0] + px[1] + px[2]) / 3.0f;
            const float saturation = std::sqrt(((px[0] - mean) * (px[0] - mean) +
                                                (px[1] - mean) * (px[1] - mean) +
                                                (px[2] - mean) * (px[2] - mean)) /
                                               3.0f);

            float exposedness = 1.0f;
            for (int ch = 0; ch < 3; ++ch) {
                const float d = px[ch] - 0.5f;
                exposedness *= std::exp(-(d * d) / (2.0f * kSigma * kSigma));
            }
            wm.w[i] = contrast * saturation * exposedness + kEps;
        }
    }
    return wm;
}

img::HdrImage exposure_fuse(const std::vector<img::HdrImage>& images) {
    if (images.empty()) throw InputError("exposure_fuse: need at least one image");
    const int w = images[0].width, h = images[0].height;
    for (const auto& im : images)
        if (im.width != w || im.height != h)
            throw InputError("exposure_fuse: images must share dimensions");
    if (w < 1 || h < 1) throw InputError("exposure_fuse: empty image");

    const std::size_t n = images.size();
    const std::size_t pixels = static_cast<std::size_t>(w) * h;

    std::vector<WeightMap> weights;
    weights.reserve(n);
    for (const auto& im : images) weights.push_back(quality_weights(im));

    // per-pixel normalization so the maps sum to one
    for (std::size_t p = 0; p < pixels; ++p) {
        float total = 0.0f;
        for (const auto& wm : weights) total += wm.w[p];
        for (auto& wm : weights) wm.w[p] /= total;
    }

    const int levels = default_pyramid_levels(w, h);
    std::vector<Grid> blended;
    for (std::size_t i = 0; i < n; ++i) {
        Grid wgrid = Grid::make(w, h, 1);
        wgrid.v = std::move(weights[i].w);
        const std::vector<Grid> wpyr = gaussian_levels(std::move(wgrid), levels);
        std::vector<Grid> lpyr = laplacian_levels(from_image(images[i]), levels);

        if (blended.empty()) {
            blended.resize(static_cast<std::size_t>(levels));
            for (int l = 0; l < levels; ++l)
                blended[static_cast<std::size_t>(l)] = Grid::make(lpyr[static_cast<std::size_t>(l)].w,
                                                                  lpyr[static_cast<std::size_t>(l)].h, 3);
        }
        for (int l = 0; l < levels; ++l) {
            const Grid& wl = wpyr[static_cast<std::size_t>(l)];
            const Grid& ll = lpyr[static_cast<std::size_t>(l)];
            Grid& out = blended[static_cast<std::size_t>(l)];
            for (std::size_t p = 0; p < wl.v.size(); ++p) {
                const float wv = wl.v[p];
                out.v[3 * p] += wv * ll.v[3 * p];
                out.v[3 * p + 1] += wv * ll.v[3 * p + 1];
                out.v[3 * p + 2] += wv * ll.v[3 * p + 2];
            }
        }
    }

    Grid fused = collapse_levels(std::move(blended));
    for (auto& v : fused.v) {
        if (!(v > 0.0f)) v = 0.0f;
        if (v > 1.0f) v = 1.0f;
    }
    return to_image(std::move(fused));
}

} // namespace hdre::fusion
