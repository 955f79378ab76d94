#pragma once

#include <cstdint>
#include <vector>

#include "hdre/network.hpp"
#include "hdre/tensor.hpp"

namespace hdre::nn {

struct AdamConfig {
    double alpha = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment buffers are matched to parameters by position, so the parameter
/// list must come from the same traversal every step.
struct AdamState {
    AdamConfig cfg;
    std::int64_t t = 0;
    std::vector<Tensor> m, v;
};

void adam_step(const std::vector<Param>& params, AdamState& state);

} // namespace hdre::nn
