#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hdre/image.hpp"
#include "hdre/ops.hpp"
#include "hdre/rng.hpp"
#include "hdre/tensor.hpp"

namespace hdre::nn {

struct ArchitectureConfig {
    bool use_global_encoder = true;
    float width_scale = 1.0f;
};

// base * width_scale; must land on an integer >= 1
int scaled_channels(int base, float width_scale);

struct Conv {
    Tensor w, b;   // w: (out,in,k,k), b: (1,out,1,1)
    Tensor gw, gb;
    int stride = 1;
    int pad = 1;

    void init(int in_ch, int out_ch, int k, int stride_, int pad_, util::Rng& rng);
    Tensor forward(const Tensor& x) const;
    // x must be the same tensor passed to forward
    Tensor backward(const Tensor& x, const Tensor& gy);
};

struct TConv {
    Tensor w, b;   // w: (in,out,4,4)
    Tensor gw, gb;

    void init(int in_ch, int out_ch, util::Rng& rng);
    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& gy);
};

struct BatchNorm {
    Tensor scale, shift, running_mean, running_var;
    Tensor gscale, gshift;
    BnCache cache;

    void init(int channels);
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);
};

// conv3x3 + BN + ReLU; retains only the normalized activations and its output
struct ConvBlock {
    Conv conv;
    BatchNorm bn;
    Tensor out; // post-relu, kept in train mode

    void init(int in_ch, int out_ch, int k, int pad, util::Rng& rng);
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& x, const Tensor& gy);
    void release();
};

struct EncoderStage {
    ConvBlock block1, block2;
    std::vector<std::uint8_t> pool_argmax;
    int pre_pool_h = 0, pre_pool_w = 0;
};

struct DecoderStage {
    TConv up;
    BatchNorm up_bn;
    ConvBlock block1, block2;
    Tensor up_act; // post-relu transposed-conv activation
    Tensor cat;    // [up_act, skip] along channels
};

struct Param {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

struct BufferRef {
    std::string name;
    Tensor* value;
};

class Network {
public:
    Network(const ArchitectureConfig& cfg, std::uint64_t seed);

    // global_src, when given, feeds the global branch instead of x (pre-padding image)
    Tensor forward(const Tensor& x, bool train, const Tensor* global_src = nullptr);
    void backward(const Tensor& gy); // fills every parameter gradient
    void release_caches();

    std::vector<Param> parameters();
    std::vector<BufferRef> buffers();
    std::size_t parameter_count();

    const ArchitectureConfig& config() const { return cfg_; }
    const Tensor& global_feature() const { return global_feature_; }

private:
    ArchitectureConfig cfg_;
    EncoderStage enc_[4];
    ConvBlock bott1_, bott2_;
    ConvBlock glob_[5];
    std::vector<std::uint8_t> glob_argmax_[5];
    int glob_pre_h_[5] = {0, 0, 0, 0, 0};
    int glob_pre_w_[5] = {0, 0, 0, 0, 0};
    ConvBlock glob_final_;
    DecoderStage dec_[4];
    Conv out_conv_;

    // retained forward tensors (train mode)
    Tensor x_in_;
    Tensor pooled_[4];
    Tensor glob_in_;
    Tensor glob_pooled_[5];
    Tensor bott_cat_;
    Tensor out_act_; // post-relu network output
    Tensor global_feature_;
    bool trained_forward_ = false;
};

// reflect-pads to a multiple of 16, runs eval forward, crops, quantizes
img::LdrImage enhance_image(Network& net, const img::LdrImage& img);

Tensor ldr_to_tensor(const img::LdrImage& img);
img::LdrImage tensor_to_ldr(const Tensor& t, int n = 0);

} // namespace hdre::nn
