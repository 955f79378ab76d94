#pragma once

#include <cstdint>
#include <string>

#include "hdre/image.hpp"
#include "hdre/rng.hpp"

namespace hdre::synth {

/// Minimum exponent for the camera nonlinearity after clamping.
inline constexpr double kGammaMin = 0.1;
/// Key value of the exposure formula.
inline constexpr double kKeyValue = 0.18;

struct ExposureParams {
    double v = 0.0;       // exposure offset, uniform in [-4, 0]
    double eta = 0.6;     // camera parameter, normal(0.6, sqrt(0.1)) clamped >= 0
    double gamma = 0.9;   // camera exponent, normal(0.9, sqrt(0.1)) clamped >= 0.1
    double delta_t = 1.0; // 0.18 * 2^v / G
};

struct Provenance {
    std::string source;
    int crop_x = 0, crop_y = 0, crop_size = 0;
    bool flip_h = false, flip_v = false;
    ExposureParams params;
    double geo_mean = 0.0; // G of the resized patch
    std::uint64_t seed = 0;
};

struct SamplePair {
    img::LdrImage input;  // virtual-camera rendering of the exposure
    img::LdrImage target; // fused three-exposure rendering
    Provenance prov;
};

/// Square crop of side round(u * min(W,H)), u ~ U[0.2, 0.6], uniform corner,
/// resized to out_size then flipped by two independent coins.
/// Draw order: u, corner-x, corner-y, flip-h, flip-v.
img::HdrImage sample_patch(const img::HdrImage& e, util::Rng& rng, int out_size = 256,
                           Provenance* prov = nullptr);

/// Draw order: v, eta (2 uniforms), gamma (2 uniforms).
ExposureParams sample_exposure_params(double geo_mean, util::Rng& rng);

img::HdrImage apply_exposure(const img::HdrImage& patch, double dt);

/// f(L) = min((1+eta) L^gamma / (L^gamma + eta), 1) on luminance; RGB scaled by
/// f(L)/L with f(0)/0 := 0.
img::LdrImage virtual_camera(const img::HdrImage& x, double eta, double gamma);

/// Scalar transfer curve of the camera, exposed for property checks.
double camera_curve(double lum, double eta, double gamma);

/// Fuses the {-2, 0, +2} stop renderings of the patch.
img::LdrImage make_target(const img::HdrImage& patch, double geo_mean);

/// Full pipeline with a private stream seeded by `seed`; draw order is
/// sample_patch then sample_exposure_params.
SamplePair generate_pair(const img::HdrImage& e, std::uint64_t seed,
                         const std::string& source_id = "", int out_size = 256);

/// Rebuilds both images from a recorded draw, bypassing the RNG.
SamplePair replay_pair(const img::HdrImage& e, const Provenance& prov, int out_size = 256);

/// Patch plus its dark rendering only, for evaluation; shares generate_pair's
/// draw sequence so the same seed selects the same patch and exposure.
struct EvalSample {
    img::HdrImage patch;
    img::LdrImage input;
    Provenance prov;
};
EvalSample generate_eval_sample(const img::HdrImage& e, std::uint64_t seed,
                                const std::string& source_id = "", int out_size = 512);

std::string provenance_to_json(const Provenance& prov);
Provenance provenance_from_json(const std::string& text);

} // namespace hdre::synth
