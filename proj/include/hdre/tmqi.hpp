#pragma once

#include "hdre/image.hpp"

namespace hdre::metrics {

struct TmqiResult {
    double q = 0.0; // 0.8012*S^0.3046 + 0.1988*N^0.7088
    double s = 0.0; // multi-scale structural fidelity
    double n = 0.0; // statistical naturalness
};

/// Tone-mapped image quality index. The reference image is linear radiance
/// and must be at least 176x176 so the five-scale fidelity pass keeps a valid
/// filtering window; the 8-bit test image is resized to the reference
/// dimensions when they differ.
TmqiResult tmqi(const img::HdrImage& reference, const img::LdrImage& test);

/// Combines the fidelity and naturalness components into the overall score.
double tmqi_q(double s, double n);

} // namespace hdre::metrics
