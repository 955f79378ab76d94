#pragma once

#include "hdre/tensor.hpp"

namespace hdre::nn {

struct LossResult {
    double value = 0.0;
    Tensor grad;
};

/// Mean over all elements; gradient 2*(pred - target)/count.
LossResult mse_loss(const Tensor& pred, const Tensor& target);

} // namespace hdre::nn
