#include "hdre/synth.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "hdre/errors.hpp"
#include "hdre/fusion.hpp"
#include "hdre/resize.hpp"

namespace hdre::synth {
namespace {

img::HdrImage crop(const img::HdrImage& e, int x0, int y0, int n) {
    img::HdrImage out;
    out.width = n;
    out.height = n;
    out.data.resize(static_cast<std::size_t>(n) * n * 3);
    for (int y = 0; y < n; ++y)
        std::copy(e.pixel(x0, y0 + y), e.pixel(x0, y0 + y) + 3 * n, out.pixel(0, y));
    return out;
}

void flip_horizontal(img::HdrImage& img) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width / 2; ++x)
            for (int c = 0; c < 3; ++c)
                std::swap(img.pixel(x, y)[c], img.pixel(img.width - 1 - x, y)[c]);
}

void flip_vertical(img::HdrImage& img) {
    for (int y = 0; y < img.height / 2; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                std::swap(img.pixel(x, y)[c], img.pixel(x, img.height - 1 - y)[c]);
}

img::HdrImage build_patch(const img::HdrImage& e, int x0, int y0, int n, bool fh, bool fv,
                          int out_size) {
    img::HdrImage patch = crop(e, x0, y0, n);
    patch = img::resize_bilinear(patch, out_size, out_size);
    if (fh) flip_horizontal(patch);
    if (fv) flip_vertical(patch);
    return patch;
}

} // namespace

img::HdrImage sample_patch(const img::HdrImage& e, util::Rng& rng, int out_size, Provenance* prov) {
    const int short_side = std::min(e.width, e.height);
    if (short_side < 5) throw InputError("sample_patch: image too small for a crop");

    const double u = rng.uniform(0.2, 0.6);
    int n = static_cast<int>(std::lround(u * short_side));
    if (n < 1) n = 1;
    const int x0 = rng.uniform_int(0, e.width - n);
    const int y0 = rng.uniform_int(0, e.height - n);
    const bool fh = rng.coin();
    const bool fv = rng.coin();

    if (prov) {
        prov->crop_x = x0;
        prov->crop_y = y0;
        prov->crop_size = n;
        prov->flip_h = fh;
        prov->flip_v = fv;
    }
    return build_patch(e, x0, y0, n, fh, fv, out_size);
}

ExposureParams sample_exposure_params(double geo_mean, util::Rng& rng) {
    if (!(geo_mean > 0.0)) throw InputError("sample_exposure_params: G must be positive");
    ExposureParams p;
    p.v = rng.uniform(-4.0, 0.0);
    p.eta = std::max(0.0, rng.normal(0.6, std::sqrt(0.1)));
    p.gamma = std::max(kGammaMin, rng.normal(0.9, std::sqrt(0.1)));
    p.delta_t = kKeyValue * std::exp2(p.v) / geo_mean;
    return p;
}

img::HdrImage apply_exposure(const img::HdrImage& patch, double dt) {
    if (!(dt > 0.0)) throw InputError("apply_exposure: dt must be positive");
    img::HdrImage out = patch;
    const float f = static_cast<float>(dt);
    for (float& v : out.data) v *= f;
    return out;
}

double camera_curve(double lum, double eta, double gamma) {
    if (!(lum > 0.0)) return 0.0;
    const double lg = std::pow(lum, gamma);
    return std::min((1.0 + eta) * lg / (lg + eta), 1.0);
}

img::LdrImage virtual_camera(const img::HdrImage& x, double eta, double gamma) {
    if (eta < 0.0 || !(gamma > 0.0)) throw InputError("virtual_camera: invalid parameters");
    img::LdrImage out;
    out.width = x.width;
    out.height = x.height;
    out.data.resize(x.data.size());
    const std::size_t pixels = static_cast<std::size_t>(x.width) * x.height;
    for (std::size_t p = 0; p < pixels; ++p) {
        const float* px = x.data.data() + 3 * p;
        const double lum = img::luminance(px[0], px[1], px[2]);
        double s = 0.0;
        if (lum > 0.0) s = camera_curve(lum, eta, gamma) / lum;
        for (int c = 0; c < 3; ++c)
            out.data[3 * p + c] = img::float_to_code(static_cast<float>(px[c] * s));
    }
    return out;
}

img::LdrImage make_target(const img::HdrImage& patch, double geo_mean) {
    if (!(geo_mean > 0.0)) throw InputError("make_target: G must be positive");
    std::vector<img::HdrImage> exposures;
    for (const double stop : {-2.0, 0.0, 2.0}) {
        const double dt = kKeyValue * std::exp2(stop) / geo_mean;
        img::HdrImage y = apply_exposure(patch, dt);
        for (float& v : y.data) v = std::min(v, 1.0f);
        exposures.push_back(std::move(y));
    }
    return img::quantize(fusion::exposure_fuse(exposures));
}

SamplePair generate_pair(const img::HdrImage& e, std::uint64_t seed, const std::string& source_id,
                         int out_size) {
    util::Rng rng(seed);
    SamplePair pair;
    pair.prov.source = source_id;
    pair.prov.seed = seed;

    img::HdrImage patch = sample_patch(e, rng, out_size, &pair.prov);
    pair.prov.geo_mean = img::geometric_mean_luminance(patch);
    pair.prov.params = sample_exposure_params(pair.prov.geo_mean, rng);

    const img::HdrImage exposed = apply_exposure(patch, pair.prov.params.delta_t);
    pair.input = virtual_camera(exposed, pair.prov.params.eta, pair.prov.params.gamma);
    pair.target = make_target(patch, pair.prov.geo_mean);
    return pair;
}

EvalSample generate_eval_sample(const img::HdrImage& e, std::uint64_t seed,
                                const std::string& source_id, int out_size) {
    util::Rng rng(seed);
    EvalSample s;
    s.prov.source = source_id;
    s.prov.seed = seed;
    s.patch = sample_patch(e, rng, out_size, &s.prov);
    s.prov.geo_mean = img::geometric_mean_luminance(s.patch);
    s.prov.params = sample_exposure_params(s.prov.geo_mean, rng);
    const img::HdrImage exposed = apply_exposure(s.patch, s.prov.params.delta_t);
    s.input = virtual_camera(exposed, s.prov.params.eta, s.prov.params.gamma);
    return s;
}

SamplePair replay_pair(const img::HdrImage& e, const Provenance& prov, int out_size) {
    if (prov.crop_size < 1 || prov.crop_x < 0 || prov.crop_y < 0 ||
        prov.crop_x + prov.crop_size > e.width || prov.crop_y + prov.crop_size > e.height)
        throw InputError("replay_pair: crop rectangle outside the image");

    SamplePair pair;
    pair.prov = prov;
    img::HdrImage patch =
        build_patch(e, prov.crop_x, prov.crop_y, prov.crop_size, prov.flip_h, prov.flip_v, out_size);
    const img::HdrImage exposed = apply_exposure(patch, prov.params.delta_t);
    pair.input = virtual_camera(exposed, prov.params.eta, prov.params.gamma);
    pair.target = make_target(patch, prov.geo_mean);
    return pair;
}

std::string provenance_to_json(const Provenance& prov) {
    nlohmann::json j;
    j["source"] = prov.source;
    j["crop"] = {{"x", prov.crop_x}, {"y", prov.crop_y}, {"size", prov.crop_size}};
    j["flip_h"] = prov.flip_h;
    j["flip_v"] = prov.flip_v;
    j["v"] = prov.params.v;
    j["eta"] = prov.params.eta;
    j["gamma"] = prov.params.gamma;
    j["delta_t"] = prov.params.delta_t;
    j["G"] = prov.geo_mean;
    j["seed"] = prov.seed;
    return j.dump(2) + "\n";
}

Provenance provenance_from_json(const std::string& text) {
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        Provenance p;
        p.source = j.at("source").get<std::string>();
        p.crop_x = j.at("crop").at("x").get<int>();
        p.crop_y = j.at("crop").at("y").get<int>();
        p.crop_size = j.at("crop").at("size").get<int>();
        p.flip_h = j.at("flip_h").get<bool>();
        p.flip_v = j.at("flip_v").get<bool>();
        p.params.v = j.at("v").get<double>();
        p.params.eta = j.at("eta").get<double>();
        p.params.gamma = j.at("gamma").get<double>();
        p.params.delta_t = j.at("delta_t").get<double>();
        p.geo_mean = j.at("G").get<double>();
        p.seed = j.at("seed").get<std::uint64_t>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("provenance JSON: ") + e.what());
    }
}

} // namespace hdre::synth
