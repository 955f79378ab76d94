#pragma once

#include <vector>

#include "hdre/tensor.hpp"

namespace hdre::nn {

// ---------------------------------------------------------------------------
// Convolution. Weights are (out_ch, in_ch, k, k); bias is (1, out_ch, 1, 1).
// Cross-correlation convention; output spatial = (in + 2*pad - k)/stride + 1.
// ---------------------------------------------------------------------------

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

/// Exact gradients of conv2d_forward. Any of the outputs may be null.
void conv2d_backward(const Tensor& x, const Tensor& w, int stride, int pad, const Tensor& gy,
                     Tensor* gx, Tensor* gw, Tensor* gb);

// ---------------------------------------------------------------------------
// Transposed convolution, the fixed 4x4 / fractional-stride-1/2 / pad-1
// upsampler: output spatial = 2 * input spatial. Weights are
// (in_ch, out_ch, 4, 4); bias is (1, out_ch, 1, 1).
// ---------------------------------------------------------------------------

Tensor tconv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void tconv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gy, Tensor* gx, Tensor* gw,
                      Tensor* gb);

// ---------------------------------------------------------------------------
// Batch normalization (per channel, epsilon 1e-5, running-stat momentum 0.9).
// ---------------------------------------------------------------------------

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.9;

struct BnCache {
    Tensor xhat;                  // normalized activations
    std::vector<float> inv_std;   // per channel
};

/// scale/shift/running stats are (1, C, 1, 1). Training mode normalizes by
/// batch statistics and updates the running buffers in place; eval mode uses
/// the running buffers and leaves them untouched. cache may be null in eval.
Tensor batchnorm_forward(const Tensor& x, const Tensor& scale, const Tensor& shift,
                         Tensor& running_mean, Tensor& running_var, bool train, BnCache* cache);

Tensor batchnorm_backward(const BnCache& cache, const Tensor& scale, const Tensor& gy,
                          Tensor* gscale, Tensor* gshift);

// ---------------------------------------------------------------------------
// Pointwise / structural ops.
// ---------------------------------------------------------------------------

Tensor relu_forward(const Tensor& x);
/// y must be the relu output for the matching forward call.
Tensor relu_backward(const Tensor& y, const Tensor& gy);

/// 2x2/stride-2 max pooling; requires even spatial dims. argmax records the
/// winning corner (0..3, first-found tie-break) for the backward pass.
Tensor maxpool2x2_forward(const Tensor& x, std::vector<std::uint8_t>* argmax);
Tensor maxpool2x2_backward(const Tensor& gy, const std::vector<std::uint8_t>& argmax, int in_h,
                           int in_w);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, int c_a, Tensor* ga, Tensor* gb);

/// Replicates a (N, C, 1, 1) feature over h x w.
Tensor broadcast_spatial(const Tensor& g, int h, int w);
/// Adjoint of broadcast_spatial: sums over the spatial extent.
Tensor broadcast_spatial_backward(const Tensor& gy);

/// Batched bilinear resample of every (n, c) plane (half-pixel centers).
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

} // namespace hdre::nn
