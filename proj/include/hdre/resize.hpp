#pragma once

#include "hdre/image.hpp"

namespace hdre::img {

/// Bilinear resampling with half-pixel-centered sampling.
HdrImage resize_bilinear(const HdrImage& img, int out_w, int out_h);

/// LDR variant: converts codes to [0,1] floats, resamples, requantizes.
LdrImage resize_bilinear(const LdrImage& img, int out_w, int out_h);

} // namespace hdre::img
