#include "hdre/tmqi.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hdre/errors.hpp"
#include "hdre/resize.hpp"

// Transcription of the published TMQI reference implementation
// (Yeganeh & Wang, IEEE TIP 2013). All constants below are that
// publication's fitted model parameters, not tunables.

namespace hdre::metrics {
namespace {

struct Map {
    int w = 0, h = 0;
    std::vector<double> v;
    Map() = default;
    Map(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_) {}
    double& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

constexpr int kLevels = 5;
constexpr double kLevelWeights[kLevels] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr double kA = 0.8012, kAlpha = 0.3046, kBeta = 0.7088;
constexpr double kC1 = 0.01, kC2 = 10.0;
constexpr int kWin = 11;
constexpr double kWinSigma = 1.5;

double normcdf(double x, double mu, double sigma) {
    return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

std::vector<double> gaussian_window() {
    std::vector<double> k(kWin);
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kWinSigma * kWinSigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// separable 'valid' correlation with the 11-tap window
Map filter_valid(const Map& img, const std::vector<double>& k) {
    const int ow = img.w - kWin + 1;
    const int oh = img.h - kWin + 1;
    Map tmp(ow, img.h);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += k[static_cast<std::size_t>(i)] * img.at(x + i, y);
            tmp.at(x, y) = acc;
        }
    Map out(ow, oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += k[static_cast<std::size_t>(i)] * tmp.at(x, y + i);
            out.at(x, y) = acc;
        }
    return out;
}

// 2x2 mean with the reference's even-kernel centering (top-left neighborhood,
// edge-replicated), sampled at even indices
Map downsample2(const Map& img) {
    const int ow = (img.w + 1) / 2;
    const int oh = (img.h + 1) / 2;
    Map out(ow, oh);
    for (int oy = 0; oy < oh; ++oy) {
        const int r1 = 2 * oy;
        const int r0 = std::max(r1 - 1, 0);
        for (int ox = 0; ox < ow; ++ox) {
            const int c1 = 2 * ox;
            const int c0 = std::max(c1 - 1, 0);
            out.at(ox, oy) = 0.25 * (img.at(c0, r0) + img.at(c1, r0) + img.at(c0, r1) + img.at(c1, r1));
        }
    }
    return out;
}

double contrast_sensitivity(double f) {
    return 100.0 * 2.6 * (0.0192 + 0.114 * f) * std::exp(-std::pow(0.114 * f, 1.1));
}

double structural_level(const Map& ref, const Map& test, double f, const std::vector<double>& k) {
    const Map mu1 = filter_valid(ref, k);
    const Map mu2 = filter_valid(test, k);

    Map sq1(ref.w, ref.h), sq2(ref.w, ref.h), cross(ref.w, ref.h);
    for (std::size_t i = 0; i < ref.v.size(); ++i) {
        sq1.v[i] = ref.v[i] * ref.v[i];
        sq2.v[i] = test.v[i] * test.v[i];
        cross.v[i] = ref.v[i] * test.v[i];
    }
    const Map e1 = filter_valid(sq1, k);
    const Map e2 = filter_valid(sq2, k);
    const Map e12 = filter_valid(cross, k);

    const double csf = contrast_sensitivity(f);
    const double u = 128.0 / (1.4 * csf);
    const double sig = u / 3.0;

    double acc = 0.0;
    for (std::size_t i = 0; i < mu1.v.size(); ++i) {
        const double s1 = std::sqrt(std::max(0.0, e1.v[i] - mu1.v[i] * mu1.v[i]));
        const double s2 = std::sqrt(std::max(0.0, e2.v[i] - mu2.v[i] * mu2.v[i]));
        const double s12 = e12.v[i] - mu1.v[i] * mu2.v[i];
        const double p1 = normcdf(s1, u, sig);
        const double p2 = normcdf(s2, u, sig);
        acc += ((2.0 * p1 * p2 + kC1) / (p1 * p1 + p2 * p2 + kC1)) *
               ((s12 + kC2) / (s1 * s2 + kC2));
    }
    return acc / static_cast<double>(mu1.v.size());
}

double structural_fidelity(Map ref, Map test) {
    double s = 1.0;
    for (int lvl = 0; lvl < kLevels; ++lvl) {
        const double f = 32.0 / std::exp2(static_cast<double>(lvl + 1)); // 16, 8, 4, 2, 1
        static const std::vector<double> k = gaussian_window();
        double sl = structural_level(ref, test, f, k);
        sl = std::clamp(sl, 0.0, 1.0);
        s *= std::pow(sl, kLevelWeights[lvl]);
        if (lvl + 1 < kLevels) {
            ref = downsample2(ref);
            test = downsample2(test);
        }
    }
    return s;
}

// 11x11 distinct blocks, zero-padded at the trailing edges, sample std (n-1)
double mean_block_std(const Map& img) {
    const int bw = (img.w + kWin - 1) / kWin;
    const int bh = (img.h + kWin - 1) / kWin;
    double acc = 0.0;
    for (int by = 0; by < bh; ++by)
        for (int bx = 0; bx < bw; ++bx) {
            double sum = 0.0, sum2 = 0.0;
            for (int y = 0; y < kWin; ++y)
                for (int x = 0; x < kWin; ++x) {
                    const int ix = bx * kWin + x;
                    const int iy = by * kWin + y;
                    const double v = (ix < img.w && iy < img.h) ? img.at(ix, iy) : 0.0;
                    sum += v;
                    sum2 += v * v;
                }
            const double n = kWin * kWin;
            const double var = std::max(0.0, (sum2 - sum * sum / n) / (n - 1.0));
            acc += std::sqrt(var);
        }
    return acc / (static_cast<double>(bw) * bh);
}

double beta_density_ratio(double x, double a, double b) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double mode = (a - 1.0) / (a + b - 2.0);
    const double log_ratio = (a - 1.0) * (std::log(x) - std::log(mode)) +
                             (b - 1.0) * (std::log(1.0 - x) - std::log(1.0 - mode));
    return std::exp(log_ratio);
}

double statistical_naturalness(const Map& ldr) {
    double mean = 0.0;
    for (double v : ldr.v) mean += v;
    mean /= static_cast<double>(ldr.v.size());
    const double block_std = mean_block_std(ldr);

    // fitted brightness/contrast models of the reference publication
    const double mu_hat = 115.94, sigma_hat = 27.99;
    const double pb = std::exp(-(mean - mu_hat) * (mean - mu_hat) / (2.0 * sigma_hat * sigma_hat));
    const double pc = beta_density_ratio(block_std / 64.29, 4.4, 10.1);
    return pb * pc;
}

} // namespace

TmqiResult tmqi(const img::HdrImage& reference, const img::LdrImage& test) {
    img::validate(reference);
    img::validate(test);
    if (reference.width < 176 || reference.height < 176)
        throw InputError("tmqi: reference must be at least 176x176 for five scales");

    img::LdrImage resized = test;
    if (test.width != reference.width || test.height != reference.height)
        resized = img::resize_bilinear(test, reference.width, reference.height);

    Map ref(reference.width, reference.height);
    Map ldr(reference.width, reference.height);
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (int y = 0; y < reference.height; ++y)
        for (int x = 0; x < reference.width; ++x) {
            const float* p = reference.pixel(x, y);
            const double lum = img::luminance(p[0], p[1], p[2]);
            ref.at(x, y) = lum;
            if (first || lum < lo) lo = lum;
            if (first || lum > hi) hi = lum;
            first = false;
            const std::uint8_t* q = resized.pixel(x, y);
            ldr.at(x, y) = img::kLumaR * q[0] + img::kLumaG * q[1] + img::kLumaB * q[2];
        }

    // reference luminance stretched onto a nominal 32-bit display range
    const double span = hi - lo;
    const double factor = 4294967295.0;
    for (double& v : ref.v) v = span > 0.0 ? factor * (v - lo) / span : 0.0;

    TmqiResult r;
    r.n = std::clamp(statistical_naturalness(ldr), 0.0, 1.0);
    r.s = std::clamp(structural_fidelity(std::move(ref), std::move(ldr)), 0.0, 1.0);
    r.q = tmqi_q(r.s, r.n);
    return r;
}

double tmqi_q(double s, double n) {
    return kA * std::pow(s, kAlpha) + (1.0 - kA) * std::pow(n, kBeta);
}

} // namespace hdre::metrics
