#include "hdre/ops.hpp"

#include <cmath>
#include <cstddef>

#include "hdre/errors.hpp"
#include "hdre/parallel.hpp"

namespace hdre::nn {
namespace {

// Fixed-order eight-lane dot product; vectorizes without reassociation.
float dot_rows(const float* a, const float* b, int n) {
    float s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        s4 += a[i + 4] * b[i + 4];
        s5 += a[i + 5] * b[i + 5];
        s6 += a[i + 6] * b[i + 6];
        s7 += a[i + 7] * b[i + 7];
    }
    float s = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

struct TapRange {
    int lo, hi; // output coordinates with in-bounds input taps
};

TapRange conv_range(int k, int stride, int pad, int in_size, int out_size) {
    // input index = out*stride - pad + k must lie in [0, in_size)
    int lo = 0;
    if (pad - k > 0) lo = (pad - k + stride - 1) / stride;
    int hi = (in_size - 1 + pad - k) / stride + 1;
    if (hi > out_size) hi = out_size;
    return {lo, hi};
}

void check_conv_args(const Tensor& x, const Tensor& w, int stride, int pad) {
    if (w.h() != w.w()) throw ConfigError("conv2d: kernel must be square");
    if (x.c() != w.c()) throw ConfigError("conv2d: channel mismatch");
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    if (pad != 0 && pad != 1) throw ConfigError("conv2d: pad must be 0 or 1");
    const int k = w.h();
    if ((x.h() + 2 * pad - k) % stride != 0 || (x.w() + 2 * pad - k) % stride != 0)
        throw ConfigError("conv2d: non-integral output size");
    if (x.h() + 2 * pad < k || x.w() + 2 * pad < k)
        throw ConfigError("conv2d: input smaller than kernel");
}

} // namespace

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    check_conv_args(x, w, stride, pad);
    const int k = w.h();
    const int out_c = w.n();
    const int out_h = (x.h() + 2 * pad - k) / stride + 1;
    const int out_w = (x.w() + 2 * pad - k) / stride + 1;
    const int in_w = x.w();

    Tensor y(x.n(), out_c, out_h, out_w);
    util::parallel_for(static_cast<std::int64_t>(x.n()) * out_c, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const int n = static_cast<int>(idx / out_c);
            const int oc = static_cast<int>(idx % out_c);
            float* yplane = y.plane(n, oc);
            const float bias = b.data.empty() ? 0.0f : b.data[static_cast<std::size_t>(oc)];
            for (int i = 0; i < out_h * out_w; ++i) yplane[i] = bias;

            for (int ic = 0; ic < x.c(); ++ic) {
                const float* xplane = x.plane(n, ic);
                for (int kh = 0; kh < k; ++kh) {
                    const TapRange rh = conv_range(kh, stride, pad, x.h(), out_h);
                    for (int kw = 0; kw < k; ++kw) {
                        const float wv = w.at(oc, ic, kh, kw);
                        if (wv == 0.0f) continue;
                        const TapRange rw = conv_range(kw, stride, pad, in_w, out_w);
                        for (int oh = rh.lo; oh < rh.hi; ++oh) {
                            const float* xrow = xplane + static_cast<std::size_t>(oh * stride - pad + kh) * in_w;
                            float* yrow = yplane + static_cast<std::size_t>(oh) * out_w;
                            if (stride == 1) {
                                const float* xs = xrow + (kw - pad);
                                for (int ow = rw.lo; ow < rw.hi; ++ow) yrow[ow] += wv * xs[ow];
                            } else {
                                for (int ow = rw.lo; ow < rw.hi; ++ow)
                                    yrow[ow] += wv * xrow[ow * stride - pad + kw];
                            }
                        }
                    }
                }
            }
        }
    });
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, int stride, int pad, const Tensor& gy,
                     Tensor* gx, Tensor* gw, Tensor* gb) {
    check_conv_args(x, w, stride, pad);
    const int k = w.h();
    const int out_c = w.n();
    const int out_h = gy.h();
    const int out_w = gy.w();
    const int in_w = x.w();

    if (gx) {
        *gx = Tensor::zeros_like(x);
        util::parallel_for(static_cast<std::int64_t>(x.n()) * x.c(), [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t idx = lo; idx < hi; ++idx) {
                const int n = static_cast<int>(idx / x.c());
                const int ic = static_cast<int>(idx % x.c());
                float* gxplane = gx->plane(n, ic);
                for (int oc = 0; oc < out_c; ++oc) {
                    const float* gyplane = gy.plane(n, oc);
                    for (int kh = 0; kh < k; ++kh) {
                        const TapRange rh = conv_range(kh, stride, pad, x.h(), out_h);
                        for (int kw = 0; kw < k; ++kw) {
                            const float wv = w.at(oc, ic, kh, kw);
                            if (wv == 0.0f) continue;
                            const TapRange rw = conv_range(kw, stride, pad, in_w, out_w);
                            for (int oh = rh.lo; oh < rh.hi; ++oh) {
                                float* gxrow =
                                    gxplane + static_cast<std::size_t>(oh * stride - pad + kh) * in_w;
                                const float* gyrow = gyplane + static_cast<std::size_t>(oh) * out_w;
                                if (stride == 1) {
                                    float* gs = gxrow + (kw - pad);
                                    for (int ow = rw.lo; ow < rw.hi; ++ow) gs[ow] += wv * gyrow[ow];
                                } else {
                                    for (int ow = rw.lo; ow < rw.hi; ++ow)
                                        gxrow[ow * stride - pad + kw] += wv * gyrow[ow];
                                }
                            }
                        }
                    }
                }
            }
        });
    }

    if (gw) {
        *gw = Tensor::zeros_like(w);
        util::parallel_for(out_c, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t oc = lo; oc < hi; ++oc) {
                for (int ic = 0; ic < x.c(); ++ic) {
                    for (int kh = 0; kh < k; ++kh) {
                        const TapRange rh = conv_range(kh, stride, pad, x.h(), out_h);
                        for (int kw = 0; kw < k; ++kw) {
                            const TapRange rw = conv_range(kw, stride, pad, in_w, out_w);
                            double acc = 0.0;
                            for (int n = 0; n < x.n(); ++n) {
                                const float* xplane = x.plane(n, ic);
                                const float* gyplane = gy.plane(n, static_cast<int>(oc));
                                for (int oh = rh.lo; oh < rh.hi; ++oh) {
                                    const float* xrow =
                                        xplane + static_cast<std::size_t>(oh * stride - pad + kh) * in_w;
                                    const float* gyrow = gyplane + static_cast<std::size_t>(oh) * out_w;
                                    if (stride == 1) {
                                        acc += dot_rows(gyrow + rw.lo, xrow + (kw - pad) + rw.lo,
                                                        rw.hi - rw.lo);
                                    } else {
                                        float part = 0.0f;
                                        for (int ow = rw.lo; ow < rw.hi; ++ow)
                                            part += gyrow[ow] * xrow[ow * stride - pad + kw];
                                        acc += part;
                                    }
                                }
                            }
                            gw->at(static_cast<int>(oc), ic, kh, kw) = static_cast<float>(acc);
                        }
                    }
                }
            }
        });
    }

    if (gb) {
        *gb = Tensor(1, out_c, 1, 1);
        util::parallel_for(out_c, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t oc = lo; oc < hi; ++oc) {
                double acc = 0.0;
                for (int n = 0; n < gy.n(); ++n) {
                    const float* gyplane = gy.plane(n, static_cast<int>(oc));
                    for (int i = 0; i < out_h * out_w; ++i) acc += gyplane[i];
                }
                gb->data[static_cast<std::size_t>(oc)] = static_cast<float>(acc);
            }
        });
    }
}

namespace {

// Valid input rows/cols for a given 4-tap offset in the 2x-upsampler:
// output index = 2*in - 1 + k must lie in [0, 2*in_size).
inline int tconv_lo(int k) { return k == 0 ? 1 : 0; }
inline int tconv_hi(int k, int in_size) { return k == 3 ? in_size - 1 : in_size; }

void check_tconv_args(const Tensor& x, const Tensor& w) {
    if (w.h() != 4 || w.w() != 4) throw ConfigError("tconv2d: kernel must be 4x4");
    if (x.c() != w.n()) throw ConfigError("tconv2d: channel mismatch");
}

} // namespace

Tensor tconv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_tconv_args(x, w);
    const int out_c = w.c();
    const int out_h = 2 * x.h();
    const int out_w = 2 * x.w();
    const int in_w = x.w();

    Tensor y(x.n(), out_c, out_h, out_w);
    util::parallel_for(static_cast<std::int64_t>(x.n()) * out_c, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const int n = static_cast<int>(idx / out_c);
            const int oc = static_cast<int>(idx % out_c);
            float* yplane = y.plane(n, oc);
            const float bias = b.data.empty() ? 0.0f : b.data[static_cast<std::size_t>(oc)];
            for (int i = 0; i < out_h * out_w; ++i) yplane[i] = bias;

            for (int ic = 0; ic < x.c(); ++ic) {
                const float* xplane = x.plane(n, ic);
                for (int kh = 0; kh < 4; ++kh) {
                    for (int kw = 0; kw < 4; ++kw) {
                        const float wv = w.at(ic, oc, kh, kw);
                        if (wv == 0.0f) continue;
                        for (int ih = tconv_lo(kh); ih < tconv_hi(kh, x.h()); ++ih) {
                            const float* xrow = xplane + static_cast<std::size_t>(ih) * in_w;
                            float* yrow = yplane + static_cast<std::size_t>(2 * ih - 1 + kh) * out_w;
                            const int off = kw - 1;
                            for (int iw = tconv_lo(kw); iw < tconv_hi(kw, in_w); ++iw)
                                yrow[2 * iw + off] += wv * xrow[iw];
                        }
                    }
                }
            }
        }
    });
    return y;
}

void tconv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gy, Tensor* gx, Tensor* gw,
                      Tensor* gb) {
    check_tconv_args(x, w);
    const int out_c = w.c();
    const int out_w = gy.w();
    const int in_w = x.w();

    if (gx) {
        *gx = Tensor::zeros_like(x);
        util::parallel_for(static_cast<std::int64_t>(x.n()) * x.c(), [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t idx = lo; idx < hi; ++idx) {
                const int n = static_cast<int>(idx / x.c());
                const int ic = static_cast<int>(idx % x.c());
                float* gxplane = gx->plane(n, ic);
                for (int oc = 0; oc < out_c; ++oc) {
                    const float* gyplane = gy.plane(n, oc);
                    for (int kh = 0; kh < 4; ++kh) {
                        for (int kw = 0; kw < 4; ++kw) {
                            const float wv = w.at(ic, oc, kh, kw);
                            if (wv == 0.0f) continue;
                            const int off = kw - 1;
                            for (int ih = tconv_lo(kh); ih < tconv_hi(kh, x.h()); ++ih) {
                                float* gxrow = gxplane + static_cast<std::size_t>(ih) * in_w;
                                const float* gyrow =
                                    gyplane + static_cast<std::size_t>(2 * ih - 1 + kh) * out_w;
                                for (int iw = tconv_lo(kw); iw < tconv_hi(kw, in_w); ++iw)
                                    gxrow[iw] += wv * gyrow[2 * iw + off];
                            }
                        }
                    }
                }
            }
        });
    }

    if (gw) {
        *gw = Tensor::zeros_like(w);
        util::parallel_for(x.c(), [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t ic = lo; ic < hi; ++ic) {
                for (int oc = 0; oc < out_c; ++oc) {
                    for (int kh = 0; kh < 4; ++kh) {
                        for (int kw = 0; kw < 4; ++kw) {
                            const int off = kw - 1;
                            double acc = 0.0;
                            for (int n = 0; n < x.n(); ++n) {
                                const float* xplane = x.plane(n, static_cast<int>(ic));
                                const float* gyplane = gy.plane(n, oc);
                                for (int ih = tconv_lo(kh); ih < tconv_hi(kh, x.h()); ++ih) {
                                    const float* xrow = xplane + static_cast<std::size_t>(ih) * in_w;
                                    const float* gyrow =
                                        gyplane + static_cast<std::size_t>(2 * ih - 1 + kh) * out_w;
                                    float p0 = 0, p1 = 0, p2 = 0, p3 = 0;
                                    int iw = tconv_lo(kw);
                                    const int end = tconv_hi(kw, in_w);
                                    for (; iw + 4 <= end; iw += 4) {
                                        p0 += xrow[iw] * gyrow[2 * iw + off];
                                        p1 += xrow[iw + 1] * gyrow[2 * iw + 2 + off];
                                        p2 += xrow[iw + 2] * gyrow[2 * iw + 4 + off];
                                        p3 += xrow[iw + 3] * gyrow[2 * iw + 6 + off];
                                    }
                                    float part = (p0 + p1) + (p2 + p3);
                                    for (; iw < end; ++iw) part += xrow[iw] * gyrow[2 * iw + off];
                                    acc += part;
                                }
                            }
                            gw->at(static_cast<int>(ic), oc, kh, kw) = static_cast<float>(acc);
                        }
                    }
                }
            }
        });
    }

    if (gb) {
        *gb = Tensor(1, out_c, 1, 1);
        util::parallel_for(out_c, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t oc = lo; oc < hi; ++oc) {
                double acc = 0.0;
                for (int n = 0; n < gy.n(); ++n) {
                    const float* gyplane = gy.plane(n, static_cast<int>(oc));
                    for (int i = 0; i < gy.h() * gy.w(); ++i) acc += gyplane[i];
                }
                gb->data[static_cast<std::size_t>(oc)] = static_cast<float>(acc);
            }
        });
    }
}

Tensor batchnorm_forward(const Tensor& x, const Tensor& scale, const Tensor& shift,
                         Tensor& running_mean, Tensor& running_var, bool train, BnCache* cache) {
    const int channels = x.c();
    if (scale.size() != static_cast<std::size_t>(channels) ||
        shift.size() != static_cast<std::size_t>(channels))
        throw ConfigError("batchnorm: parameter length does not match channels");

    Tensor y = Tensor::zeros_like(x);
    const int plane = x.h() * x.w();
    const std::int64_t count = static_cast<std::int64_t>(x.n()) * plane;

    if (train && cache) {
        cache->xhat = Tensor::zeros_like(x);
        cache->inv_std.assign(static_cast<std::size_t>(channels), 0.0f);
    }

    util::parallel_for(channels, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t c64 = lo; c64 < hi; ++c64) {
            const int c = static_cast<int>(c64);
            double mean, inv_std;
            if (train) {
                double acc = 0.0;
                for (int n = 0; n < x.n(); ++n) {
                    const float* p = x.plane(n, c);
                    for (int i = 0; i < plane; ++i) acc += p[i];
                }
                mean = acc / static_cast<double>(count);
                double vacc = 0.0;
                for (int n = 0; n < x.n(); ++n) {
                    const float* p = x.plane(n, c);
                    for (int i = 0; i < plane; ++i) {
                        const double d = p[i] - mean;
                        vacc += d * d;
                    }
                }
                const double var = vacc / static_cast<double>(count);
                inv_std = 1.0 / std::sqrt(var + kBnEpsilon);
                running_mean.data[static_cast<std::size_t>(c)] = static_cast<float>(
                    kBnMomentum * running_mean.data[static_cast<std::size_t>(c)] +
                    (1.0 - kBnMomentum) * mean);
                running_var.data[static_cast<std::size_t>(c)] = static_cast<float>(
                    kBnMomentum * running_var.data[static_cast<std::size_t>(c)] +
                    (1.0 - kBnMomentum) * var);
            } else {
                mean = running_mean.data[static_cast<std::size_t>(c)];
                inv_std = 1.0 / std::sqrt(
                                    static_cast<double>(running_var.data[static_cast<std::size_t>(c)]) +
                                    kBnEpsilon);
            }

            const float fmean = static_cast<float>(mean);
            const float fistd = static_cast<float>(inv_std);
            const float g = scale.data[static_cast<std::size_t>(c)];
            const float s = shift.data[static_cast<std::size_t>(c)];
            for (int n = 0; n < x.n(); ++n) {
                const float* p = x.plane(n, c);
                float* q = y.plane(n, c);
                float* xh = train && cache ? cache->xhat.plane(n, c) : nullptr;
                for (int i = 0; i < plane; ++i) {
                    const float norm = (p[i] - fmean) * fistd;
                    if (xh) xh[i] = norm;
                    q[i] = g * norm + s;
                }
            }
            if (train && cache) cache->inv_std[static_cast<std::size_t>(c)] = fistd;
        }
    });
    return y;
}

Tensor batchnorm_backward(const BnCache& cache, const Tensor& scale, const Tensor& gy,
                          Tensor* gscale, Tensor* gshift) {
    const Tensor& xhat = cache.xhat;
    const int channels = xhat.c();
    const int plane = xhat.h() * xhat.w();
    const double count = static_cast<double>(xhat.n()) * plane;

    Tensor gx = Tensor::zeros_like(xhat);
    if (gscale) *gscale = Tensor(1, channels, 1, 1);
    if (gshift) *gshift = Tensor(1, channels, 1, 1);

    util::parallel_for(channels, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t c64 = lo; c64 < hi; ++c64) {
            const int c = static_cast<int>(c64);
            double s1 = 0.0, s2 = 0.0;
            for (int n = 0; n < xhat.n(); ++n) {
                const float* gp = gy.plane(n, c);
                const float* xp = xhat.plane(n, c);
                for (int i = 0; i < plane; ++i) {
                    s1 += gp[i];
                    s2 += static_cast<double>(gp[i]) * xp[i];
                }
            }
            if (gscale) gscale->data[static_cast<std::size_t>(c)] = static_cast<float>(s2);
            if (gshift) gshift->data[static_cast<std::size_t>(c)] = static_cast<float>(s1);

            const float mean_g = static_cast<float>(s1 / count);
            const float mean_gx = static_cast<float>(s2 / count);
            const float coef = scale.data[static_cast<std::size_t>(c)] *
                               cache.inv_std[static_cast<std::size_t>(c)];
            for (int n = 0; n < xhat.n(); ++n) {
                const float* gp = gy.plane(n, c);
                const float* xp = xhat.plane(n, c);
                float* out = gx.plane(n, c);
                for (int i = 0; i < plane; ++i)
                    out[i] = coef * (gp[i] - mean_g - xp[i] * mean_gx);
            }
        }
    });
    return gx;
}

Tensor relu_forward(const Tensor& x) {
    Tensor y = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] > 0.0f ? x.data[i] : 0.0f;
    return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& gy) {
    Tensor gx = Tensor::zeros_like(y);
    for (std::size_t i = 0; i < y.data.size(); ++i) gx.data[i] = y.data[i] > 0.0f ? gy.data[i] : 0.0f;
    return gx;
}

Tensor maxpool2x2_forward(const Tensor& x, std::vector<std::uint8_t>* argmax) {
    if (x.h() % 2 != 0 || x.w() % 2 != 0)
        throw ConfigError("maxpool2x2: spatial dims must be even");
    const int out_h = x.h() / 2;
    const int out_w = x.w() / 2;
    Tensor y(x.n(), x.c(), out_h, out_w);
    if (argmax) argmax->assign(y.size(), 0);

    util::parallel_for(static_cast<std::int64_t>(x.n()) * x.c(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const int n = static_cast<int>(idx / x.c());
            const int c = static_cast<int>(idx % x.c());
            const float* xplane = x.plane(n, c);
            float* yplane = y.plane(n, c);
            std::uint8_t* am =
                argmax ? argmax->data() + static_cast<std::size_t>(idx) * out_h * out_w : nullptr;
            for (int oh = 0; oh < out_h; ++oh) {
                const float* r0 = xplane + static_cast<std::size_t>(2 * oh) * x.w();
                const float* r1 = r0 + x.w();
                for (int ow = 0; ow < out_w; ++ow) {
                    const float cand[4] = {r0[2 * ow], r0[2 * ow + 1], r1[2 * ow], r1[2 * ow + 1]};
                    int best = 0;
                    for (int i = 1; i < 4; ++i)
                        if (cand[i] > cand[best]) best = i; // first-found tie-break
                    yplane[static_cast<std::size_t>(oh) * out_w + ow] = cand[best];
                    if (am) am[static_cast<std::size_t>(oh) * out_w + ow] = static_cast<std::uint8_t>(best);
                }
            }
        }
    });
    return y;
}

Tensor maxpool2x2_backward(const Tensor& gy, const std::vector<std::uint8_t>& argmax, int in_h,
                           int in_w) {
    Tensor gx(gy.n(), gy.c(), in_h, in_w);
    const int out_h = gy.h();
    const int out_w = gy.w();
    util::parallel_for(static_cast<std::int64_t>(gy.n()) * gy.c(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const int n = static_cast<int>(idx / gy.c());
            const int c = static_cast<int>(idx % gy.c());
            const float* gyplane = gy.plane(n, c);
            float* gxplane = gx.plane(n, c);
            const std::uint8_t* am = argmax.data() + static_cast<std::size_t>(idx) * out_h * out_w;
            for (int oh = 0; oh < out_h; ++oh) {
                for (int ow = 0; ow < out_w; ++ow) {
                    const int which = am[static_cast<std::size_t>(oh) * out_w + ow];
                    const int iy = 2 * oh + (which >> 1);
                    const int ix = 2 * ow + (which & 1);
                    gxplane[static_cast<std::size_t>(iy) * in_w + ix] +=
                        gyplane[static_cast<std::size_t>(oh) * out_w + ow];
                }
            }
        }
    });
    return gx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
        throw ConfigError("concat_channels: batch/spatial dims must match");
    Tensor y(a.n(), a.c() + b.c(), a.h(), a.w());
    const std::size_t plane = static_cast<std::size_t>(a.h()) * a.w();
    for (int n = 0; n < a.n(); ++n) {
        for (int c = 0; c < a.c(); ++c)
            std::copy(a.plane(n, c), a.plane(n, c) + plane, y.plane(n, c));
        for (int c = 0; c < b.c(); ++c)
            std::copy(b.plane(n, c), b.plane(n, c) + plane, y.plane(n, a.c() + c));
    }
    return y;
}

void split_channels(const Tensor& g, int c_a, Tensor* ga, Tensor* gb) {
    const std::size_t plane = static_cast<std::size_t>(g.h()) * g.w();
    if (ga) *ga = Tensor(g.n(), c_a, g.h(), g.w());
    if (gb) *gb = Tensor(g.n(), g.c() - c_a, g.h(), g.w());
    for (int n = 0; n < g.n(); ++n) {
        if (ga)
            for (int c = 0; c < c_a; ++c)
                std::copy(g.plane(n, c), g.plane(n, c) + plane, ga->plane(n, c));
        if (gb)
            for (int c = c_a; c < g.c(); ++c)
                std::copy(g.plane(n, c), g.plane(n, c) + plane, gb->plane(n, c - c_a));
    }
}

Tensor broadcast_spatial(const Tensor& g, int h, int w) {
    if (g.h() != 1 || g.w() != 1) throw ConfigError("broadcast_spatial: input must be 1x1 spatially");
    Tensor y(g.n(), g.c(), h, w);
    for (int n = 0; n < g.n(); ++n)
        for (int c = 0; c < g.c(); ++c) {
            const float v = g.at(n, c, 0, 0);
            float* p = y.plane(n, c);
            for (int i = 0; i < h * w; ++i) p[i] = v;
        }
    return y;
}

Tensor broadcast_spatial_backward(const Tensor& gy) {
    Tensor gx(gy.n(), gy.c(), 1, 1);
    for (int n = 0; n < gy.n(); ++n)
        for (int c = 0; c < gy.c(); ++c) {
            double acc = 0.0;
            const float* p = gy.plane(n, c);
            for (int i = 0; i < gy.h() * gy.w(); ++i) acc += p[i];
            gx.at(n, c, 0, 0) = static_cast<float>(acc);
        }
    return gx;
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ConfigError("resize_bilinear: output size must be >= 1");
    if (out_h == x.h() && out_w == x.w()) return x;

    std::vector<int> xlo(static_cast<std::size_t>(out_w)), xhi(static_cast<std::size_t>(out_w));
    std::vector<float> xf(static_cast<std::size_t>(out_w));
    std::vector<int> ylo(static_cast<std::size_t>(out_h)), yhi(static_cast<std::size_t>(out_h));
    std::vector<float> yf(static_cast<std::size_t>(out_h));
    auto fill_taps = [](int in, int out, std::vector<int>& lo, std::vector<int>& hi,
                        std::vector<float>& fr) {
        const double scale = static_cast<double>(in) / out;
        for (int o = 0; o < out; ++o) {
            double src = (o + 0.5) * scale - 0.5;
            if (src < 0.0) src = 0.0;
            if (src > in - 1) src = in - 1;
            const int l = static_cast<int>(std::floor(src));
            lo[static_cast<std::size_t>(o)] = l;
            hi[static_cast<std::size_t>(o)] = l + 1 < in ? l + 1 : l;
            fr[static_cast<std::size_t>(o)] = static_cast<float>(src - l);
        }
    };
    fill_taps(x.w(), out_w, xlo, xhi, xf);
    fill_taps(x.h(), out_h, ylo, yhi, yf);

    Tensor y(x.n(), x.c(), out_h, out_w);
    util::parallel_for(static_cast<std::int64_t>(x.n()) * x.c(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const int n = static_cast<int>(idx / x.c());
            const int c = static_cast<int>(idx % x.c());
            const float* src = x.plane(n, c);
            float* dst = y.plane(n, c);
            for (int oy = 0; oy < out_h; ++oy) {
                const float* r0 = src + static_cast<std::size_t>(ylo[static_cast<std::size_t>(oy)]) * x.w();
                const float* r1 = src + static_cast<std::size_t>(yhi[static_cast<std::size_t>(oy)]) * x.w();
                const float fy = yf[static_cast<std::size_t>(oy)];
                for (int ox = 0; ox < out_w; ++ox) {
                    const int a = xlo[static_cast<std::size_t>(ox)];
                    const int bcol = xhi[static_cast<std::size_t>(ox)];
                    const float fx = xf[static_cast<std::size_t>(ox)];
                    const float top = r0[a] + fx * (r0[bcol] - r0[a]);
                    const float bot = r1[a] + fx * (r1[bcol] - r1[a]);
                    dst[static_cast<std::size_t>(oy) * out_w + ox] = top + fy * (bot - top);
                }
            }
        }
    });
    return y;
}

} // namespace hdre::nn
