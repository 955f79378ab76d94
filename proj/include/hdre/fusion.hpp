#pragma once

#include <vector>

#include "hdre/image.hpp"

namespace hdre::fusion {

/// Per-pixel scalar weights for one exposure.
struct WeightMap {
    int width = 0;
    int height = 0;
    std::vector<float> w;
};

/// Multi-resolution stack; each level is half the previous (rounding up).
struct Pyramid {
    std::vector<img::HdrImage> levels;
};

/// Default pyramid depth for a w x h image: floor(log2(min(w,h))) - 1,
/// at least 1.
int default_pyramid_levels(int w, int h);

/// Deepest legal pyramid for a w x h image.
int max_pyramid_levels(int w, int h);

/// 5-tap binomial blur + decimate, repeated. levels >= 1.
Pyramid gaussian_pyramid(const img::HdrImage& im, int levels);

/// Band-pass stack; collapse() inverts it exactly.
Pyramid laplacian_pyramid(const img::HdrImage& im, int levels);
img::HdrImage collapse(const Pyramid& p);

/// contrast * saturation * well-exposedness + epsilon, channels in [0,1].
WeightMap quality_weights(const img::HdrImage& im);

/// Mertens-style fusion of float images in [0,1]; output clamped to [0,1].
img::HdrImage exposure_fuse(const std::vector<img::HdrImage>& images);

} // namespace hdre::fusion
