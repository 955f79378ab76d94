#include "hdre/network.hpp"

#include <cassert>
#include <cmath>
#include <cstring>

#include "hdre/errors.hpp"

namespace hdre::nn {
namespace {

#ifndef NDEBUG
void check_finite(const Tensor& t) { assert(t.all_finite()); }
#else
void check_finite(const Tensor&) {}
#endif

void add_inplace(Tensor& a, const Tensor& b) {
    assert(a.size() == b.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

int mirror101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

} // namespace

int scaled_channels(int base, float width_scale) {
    const double v = static_cast<double>(base) * width_scale;
    const double r = std::round(v);
    if (!(width_scale > 0.0f) || std::abs(v - r) > 1e-6 || r < 1.0)
        throw ConfigError("width_scale must give integer channel counts >= 1");
    return static_cast<int>(r);
}

void Conv::init(int in_ch, int out_ch, int k, int stride_, int pad_, util::Rng& rng) {
    stride = stride_;
    pad = pad_;
    w = Tensor(out_ch, in_ch, k, k);
    b = Tensor(1, out_ch, 1, 1);
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
    for (float& v : w.data) v = static_cast<float>(rng.normal(0.0, std_dev));
}

Tensor Conv::forward(const Tensor& x) const { return conv2d_forward(x, w, b, stride, pad); }

Tensor Conv::backward(const Tensor& x, const Tensor& gy) {
    Tensor gx;
    conv2d_backward(x, w, stride, pad, gy, &gx, &gw, &gb);
    return gx;
}

void TConv::init(int in_ch, int out_ch, util::Rng& rng) {
    w = Tensor(in_ch, out_ch, 4, 4);
    b = Tensor(1, out_ch, 1, 1);
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_ch) * 16.0));
    for (float& v : w.data) v = static_cast<float>(rng.normal(0.0, std_dev));
}

Tensor TConv::forward(const Tensor& x) const { return tconv2d_forward(x, w, b); }

Tensor TConv::backward(const Tensor& x, const Tensor& gy) {
    Tensor gx;
    tconv2d_backward(x, w, gy, &gx, &gw, &gb);
    return gx;
}

void BatchNorm::init(int channels) {
    scale = Tensor(1, channels, 1, 1);
    shift = Tensor(1, channels, 1, 1);
    running_mean = Tensor(1, channels, 1, 1);
    running_var = Tensor(1, channels, 1, 1);
    scale.fill(1.0f);
    running_var.fill(1.0f);
}

Tensor BatchNorm::forward(const Tensor& x, bool train) {
    return batchnorm_forward(x, scale, shift, running_mean, running_var, train,
                             train ? &cache : nullptr);
}

Tensor BatchNorm::backward(const Tensor& gy) {
    return batchnorm_backward(cache, scale, gy, &gscale, &gshift);
}

void ConvBlock::init(int in_ch, int out_ch, int k, int pad, util::Rng& rng) {
    conv.init(in_ch, out_ch, k, 1, pad, rng);
    bn.init(out_ch);
}

Tensor ConvBlock::forward(const Tensor& x, bool train) {
    Tensor t = conv.forward(x);
    check_finite(t);
    t = bn.forward(t, train);
    check_finite(t);
    out = relu_forward(t);
    return out;
}

Tensor ConvBlock::backward(const Tensor& x, const Tensor& gy) {
    Tensor g = relu_backward(out, gy);
    g = bn.backward(g);
    return conv.backward(x, g);
}

void ConvBlock::release() {
    out = Tensor();
    bn.cache.xhat = Tensor();
    bn.cache.inv_std.clear();
}

Network::Network(const ArchitectureConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    const int s32 = scaled_channels(32, cfg.width_scale);
    const int s64 = scaled_channels(64, cfg.width_scale);
    const int s128 = scaled_channels(128, cfg.width_scale);
    const int s256 = scaled_channels(256, cfg.width_scale);
    const int s512 = scaled_channels(512, cfg.width_scale);
    const int g64 = scaled_channels(64, cfg.width_scale);

    util::Rng rng(seed);
    const int plan[5] = {s32, s64, s128, s256, s512};
    int in_ch = 3;
    for (int i = 0; i < 4; ++i) {
        enc_[i].block1.init(in_ch, plan[i], 3, 1, rng);
        enc_[i].block2.init(plan[i], plan[i], 3, 1, rng);
        in_ch = plan[i];
    }
    bott1_.init(s256, s512, 3, 1, rng);
    bott2_.init(s512, s512, 3, 1, rng);

    if (cfg.use_global_encoder) {
        int gin = 3;
        for (int i = 0; i < 5; ++i) {
            glob_[i].init(gin, g64, 3, 1, rng);
            gin = g64;
        }
        glob_final_.init(g64, g64, 4, 0, rng);
    }

    const int dec_in[4] = {cfg.use_global_encoder ? s512 + g64 : s512, s256, s128, s64};
    const int dec_out[4] = {s256, s128, s64, s32};
    for (int i = 0; i < 4; ++i) {
        dec_[i].up.init(dec_in[i], dec_out[i], rng);
        dec_[i].up_bn.init(dec_out[i]);
        dec_[i].block1.init(2 * dec_out[i], dec_out[i], 3, 1, rng);
        dec_[i].block2.init(dec_out[i], dec_out[i], 3, 1, rng);
    }
    out_conv_.init(s32, 3, 3, 1, 1, rng);
}

Tensor Network::forward(const Tensor& x, bool train, const Tensor* global_src) {
    if (x.c() != 3) throw InputError("network input must have 3 channels");
    if (x.h() % 16 != 0 || x.w() % 16 != 0)
        throw InputError("network input spatial dims must be multiples of 16");

    trained_forward_ = train;
    if (train) x_in_ = x;

    Tensor t = enc_[0].block1.forward(x, train);
    for (int i = 0; i < 4; ++i) {
        if (i > 0) t = enc_[i].block1.forward(pooled_[i - 1], train);
        t = enc_[i].block2.forward(t, train);
        enc_[i].pre_pool_h = t.h();
        enc_[i].pre_pool_w = t.w();
        pooled_[i] = maxpool2x2_forward(t, train ? &enc_[i].pool_argmax : nullptr);
    }

    t = bott1_.forward(pooled_[3], train);
    t = bott2_.forward(t, train);

    if (cfg_.use_global_encoder) {
        Tensor g = resize_bilinear(global_src ? *global_src : x, 128, 128);
        if (train) glob_in_ = g;
        for (int i = 0; i < 5; ++i) {
            g = glob_[i].forward(i == 0 ? (train ? glob_in_ : g) : glob_pooled_[i - 1], train);
            glob_pre_h_[i] = g.h();
            glob_pre_w_[i] = g.w();
            glob_pooled_[i] = maxpool2x2_forward(g, train ? &glob_argmax_[i] : nullptr);
        }
        global_feature_ = glob_final_.forward(glob_pooled_[4], train);
        Tensor gb = broadcast_spatial(global_feature_, t.h(), t.w());
        t = concat_channels(t, gb);
        if (train) bott_cat_ = t;
    }

    for (int i = 0; i < 4; ++i) {
        Tensor u = dec_[i].up.forward(t);
        check_finite(u);
        u = dec_[i].up_bn.forward(u, train);
        dec_[i].up_act = relu_forward(u);
        dec_[i].cat = concat_channels(dec_[i].up_act, enc_[3 - i].block2.out);
        t = dec_[i].block1.forward(dec_[i].cat, train);
        t = dec_[i].block2.forward(t, train);
    }

    t = out_conv_.forward(t);
    check_finite(t);
    Tensor y = relu_forward(t);
    if (train) out_act_ = y;
    return y;
}

void Network::backward(const Tensor& gy) {
    if (!trained_forward_) throw Error("network backward requires a train-mode forward");

    Tensor g = relu_backward(out_act_, gy);
    g = out_conv_.backward(dec_[3].block2.out, g);

    Tensor skip_grad[4];
    for (int i = 3; i >= 0; --i) {
        g = dec_[i].block2.backward(dec_[i].block1.out, g);
        g = dec_[i].block1.backward(dec_[i].cat, g);
        Tensor g_act;
        split_channels(g, dec_[i].up_act.c(), &g_act, &skip_grad[3 - i]);
        g = relu_backward(dec_[i].up_act, g_act);
        g = dec_[i].up_bn.backward(g);
        const Tensor& up_in = i == 0 ? (cfg_.use_global_encoder ? bott_cat_ : bott2_.out)
                                     : dec_[i - 1].block2.out;
        g = dec_[i].up.backward(up_in, g);
    }

    if (cfg_.use_global_encoder) {
        Tensor g_main, g_glob;
        split_channels(g, bott2_.out.c(), &g_main, &g_glob);
        g = std::move(g_main);

        Tensor gg = broadcast_spatial_backward(g_glob);
        gg = glob_final_.backward(glob_pooled_[4], gg);
        for (int i = 4; i >= 0; --i) {
            gg = maxpool2x2_backward(gg, glob_argmax_[i], glob_pre_h_[i], glob_pre_w_[i]);
            gg = glob_[i].backward(i == 0 ? glob_in_ : glob_pooled_[i - 1], gg);
        }
        // gradient into the resized global input is not propagated further
    }

    g = bott2_.backward(bott1_.out, g);
    g = bott1_.backward(pooled_[3], g);

    for (int i = 3; i >= 0; --i) {
        g = maxpool2x2_backward(g, enc_[i].pool_argmax, enc_[i].pre_pool_h, enc_[i].pre_pool_w);
        add_inplace(g, skip_grad[i]);
        g = enc_[i].block2.backward(enc_[i].block1.out, g);
        g = enc_[i].block1.backward(i == 0 ? x_in_ : pooled_[i - 1], g);
    }
}

void Network::release_caches() {
    x_in_ = Tensor();
    glob_in_ = Tensor();
    bott_cat_ = Tensor();
    out_act_ = Tensor();
    for (int i = 0; i < 4; ++i) {
        pooled_[i] = Tensor();
        enc_[i].block1.release();
        enc_[i].block2.release();
        enc_[i].pool_argmax.clear();
        dec_[i].block1.release();
        dec_[i].block2.release();
        dec_[i].up_act = Tensor();
        dec_[i].cat = Tensor();
        dec_[i].up_bn.cache.xhat = Tensor();
        dec_[i].up_bn.cache.inv_std.clear();
    }
    bott1_.release();
    bott2_.release();
    for (int i = 0; i < 5; ++i) {
        glob_[i].release();
        glob_pooled_[i] = Tensor();
        glob_argmax_[i].clear();
    }
    glob_final_.release();
    trained_forward_ = false;
}

namespace {

void add_conv(std::vector<Param>& out, const std::string& name, Conv& c) {
    out.push_back({name + ".w", &c.w, &c.gw});
    out.push_back({name + ".b", &c.b, &c.gb});
}

void add_bn(std::vector<Param>& out, const std::string& name, BatchNorm& bn) {
    out.push_back({name + ".bn.scale", &bn.scale, &bn.gscale});
    out.push_back({name + ".bn.shift", &bn.shift, &bn.gshift});
}

void add_block(std::vector<Param>& out, const std::string& name, ConvBlock& b) {
    add_conv(out, name, b.conv);
    add_bn(out, name, b.bn);
}

} // namespace

std::vector<Param> Network::parameters() {
    std::vector<Param> out;
    for (int i = 0; i < 4; ++i) {
        const std::string p = "enc" + std::to_string(i + 1);
        add_block(out, p + ".conv1", enc_[i].block1);
        add_block(out, p + ".conv2", enc_[i].block2);
    }
    add_block(out, "bottleneck.conv1", bott1_);
    add_block(out, "bottleneck.conv2", bott2_);
    if (cfg_.use_global_encoder) {
        for (int i = 0; i < 5; ++i)
            add_block(out, "global.conv" + std::to_string(i + 1), glob_[i]);
        add_block(out, "global.final", glob_final_);
    }
    for (int i = 0; i < 4; ++i) {
        const std::string p = "dec" + std::to_string(i + 1);
        out.push_back({p + ".up.w", &dec_[i].up.w, &dec_[i].up.gw});
        out.push_back({p + ".up.b", &dec_[i].up.b, &dec_[i].up.gb});
        add_bn(out, p + ".up", dec_[i].up_bn);
        add_block(out, p + ".conv1", dec_[i].block1);
        add_block(out, p + ".conv2", dec_[i].block2);
    }
    add_conv(out, "output", out_conv_);
    return out;
}

std::vector<BufferRef> Network::buffers() {
    std::vector<BufferRef> out;
    auto add = [&](const std::string& name, BatchNorm& bn) {
        out.push_back({name + ".bn.mean", &bn.running_mean});
        out.push_back({name + ".bn.var", &bn.running_var});
    };
    for (int i = 0; i < 4; ++i) {
        const std::string p = "enc" + std::to_string(i + 1);
        add(p + ".conv1", enc_[i].block1.bn);
        add(p + ".conv2", enc_[i].block2.bn);
    }
    add("bottleneck.conv1", bott1_.bn);
    add("bottleneck.conv2", bott2_.bn);
    if (cfg_.use_global_encoder) {
        for (int i = 0; i < 5; ++i) add("global.conv" + std::to_string(i + 1), glob_[i].bn);
        add("global.final", glob_final_.bn);
    }
    for (int i = 0; i < 4; ++i) {
        const std::string p = "dec" + std::to_string(i + 1);
        add(p + ".up", dec_[i].up_bn);
        add(p + ".conv1", dec_[i].block1.bn);
        add(p + ".conv2", dec_[i].block2.bn);
    }
    return out;
}

std::size_t Network::parameter_count() {
    std::size_t n = 0;
    for (const Param& p : parameters()) n += p.value->size();
    return n;
}

Tensor ldr_to_tensor(const img::LdrImage& img) {
    img::validate(img);
    Tensor t(1, 3, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* px = img.pixel(x, y);
            for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = img::code_to_float(px[c]);
        }
    return t;
}

img::LdrImage tensor_to_ldr(const Tensor& t, int n) {
    img::LdrImage img;
    img.width = t.w();
    img.height = t.h();
    img.data.resize(static_cast<std::size_t>(t.w()) * t.h() * 3);
    for (int y = 0; y < t.h(); ++y)
        for (int x = 0; x < t.w(); ++x)
            for (int c = 0; c < 3; ++c)
                img.data[(static_cast<std::size_t>(y) * t.w() + x) * 3 + c] =
                    img::float_to_code(t.at(n, c, y, x));
    return img;
}

img::LdrImage enhance_image(Network& net, const img::LdrImage& img) {
    img::validate(img);
    if (img.width < 16 || img.height < 16) throw InputError("image must be at least 16x16");

    Tensor x = ldr_to_tensor(img);
    Tensor gsrc;
    if (net.config().use_global_encoder) gsrc = resize_bilinear(x, 128, 128);

    const int pad_h = (16 - img.height % 16) % 16;
    const int pad_w = (16 - img.width % 16) % 16;
    const int top = pad_h / 2;
    const int left = pad_w / 2;

    Tensor xp = x;
    if (pad_h || pad_w) {
        xp = Tensor(1, 3, img.height + pad_h, img.width + pad_w);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < xp.h(); ++y) {
                const int sy = mirror101(y - top, img.height);
                for (int xcol = 0; xcol < xp.w(); ++xcol)
                    xp.at(0, c, y, xcol) = x.at(0, c, sy, mirror101(xcol - left, img.width));
            }
    }

    Tensor y = net.forward(xp, false, net.config().use_global_encoder ? &gsrc : nullptr);
    net.release_caches();

    img::LdrImage out;
    out.width = img.width;
    out.height = img.height;
    out.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    for (int yy = 0; yy < img.height; ++yy)
        for (int xx = 0; xx < img.width; ++xx)
            for (int c = 0; c < 3; ++c)
                out.data[(static_cast<std::size_t>(yy) * img.width + xx) * 3 + c] =
                    img::float_to_code(y.at(0, c, yy + top, xx + left));
    return out;
}

} // namespace hdre::nn
