#!/usr/bin/env python3
"""Independent TMQI computation used to pin the values in test_metrics.cpp.

Transcribes the published Yeganeh & Wang (IEEE TIP 2013) reference metric
with this project's conventions: Rec. 709 gray on both sides, the HDR
luminance min-max stretched onto [0, 2^32 - 1].

Usage: tmqi_oracle.py <dir>   # reads {i}_ref.hdr / {i}_test.png for i in 0..4
"""

import re
import sys

import numpy as np
from PIL import Image
from scipy.stats import beta as beta_dist
from scipy.stats import norm as norm_dist

LUMA = np.array([0.2126, 0.7152, 0.0722])


def read_hdr(path):
    """Minimal Radiance reader for the flat RGBE files the test dump writes."""
    data = open(path, "rb").read()
    pos = 0

    def line():
        nonlocal pos
        end = data.index(b"\n", pos)
        out = data[pos:end]
        pos = end + 1
        return out

    if line() != b"#?RADIANCE":
        raise ValueError("not a radiance file")
    fmt_ok = False
    while True:
        l = line()
        if not l:
            break
        if l.startswith(b"FORMAT="):
            fmt_ok = l[7:] == b"32-bit_rle_rgbe"
    if not fmt_ok:
        raise ValueError("missing FORMAT")
    m = re.fullmatch(r"-Y (\d+) \+X (\d+)", line().decode())
    if not m:
        raise ValueError("unsupported orientation")
    h, w = int(m.group(1)), int(m.group(2))
    rgbe = np.frombuffer(data, np.uint8, count=w * h * 4, offset=pos)
    rgbe = rgbe.reshape(h, w, 4).astype(np.float64)
    scale = np.where(rgbe[..., 3] > 0, np.exp2(rgbe[..., 3] - 136.0), 0.0)
    rgb = (rgbe[..., :3] + 0.5) * scale[..., None]
    return rgb.astype(np.float32).astype(np.float64)


def gaussian_window():
    d = np.arange(11.0) - 5.0
    k = np.exp(-(d * d) / (2.0 * 1.5 * 1.5))
    return k / k.sum()


def filt_valid(a, k):
    horiz = sum(k[i] * a[:, i : i + a.shape[1] - 10] for i in range(11))
    return sum(k[i] * horiz[i : i + a.shape[0] - 10, :] for i in range(11))


def down2(a):
    p = np.pad(a, ((1, 0), (1, 0)), mode="edge")
    m = 0.25 * (p[:-1, :-1] + p[:-1, 1:] + p[1:, :-1] + p[1:, 1:])
    return m[0::2, 0::2]


def csf(f):
    return 100.0 * 2.6 * (0.0192 + 0.114 * f) * np.exp(-((0.114 * f) ** 1.1))


def structural_level(ref, test, f, k):
    mu1 = filt_valid(ref, k)
    mu2 = filt_valid(test, k)
    s1 = np.sqrt(np.maximum(filt_valid(ref * ref, k) - mu1 * mu1, 0.0))
    s2 = np.sqrt(np.maximum(filt_valid(test * test, k) - mu2 * mu2, 0.0))
    s12 = filt_valid(ref * test, k) - mu1 * mu2
    u = 128.0 / (1.4 * csf(f))
    p1 = norm_dist.cdf(s1, loc=u, scale=u / 3.0)
    p2 = norm_dist.cdf(s2, loc=u, scale=u / 3.0)
    smap = ((2.0 * p1 * p2 + 0.01) / (p1 * p1 + p2 * p2 + 0.01)) * (
        (s12 + 10.0) / (s1 * s2 + 10.0)
    )
    return float(np.mean(smap))


def structural_fidelity(ref, test):
    weights = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333]
    k = gaussian_window()
    s = 1.0
    for lvl, w in enumerate(weights):
        sl = structural_level(ref, test, 32.0 / 2.0 ** (lvl + 1), k)
        s *= np.clip(sl, 0.0, 1.0) ** w
        if lvl + 1 < len(weights):
            ref, test = down2(ref), down2(test)
    return s


def mean_block_std(a):
    bh = -(-a.shape[0] // 11)
    bw = -(-a.shape[1] // 11)
    padded = np.zeros((bh * 11, bw * 11))
    padded[: a.shape[0], : a.shape[1]] = a
    blocks = padded.reshape(bh, 11, bw, 11).transpose(0, 2, 1, 3).reshape(-1, 121)
    return float(np.mean(np.std(blocks, axis=1, ddof=1)))


def naturalness(ldr):
    pb = norm_dist.pdf(np.mean(ldr), 115.94, 27.99) / norm_dist.pdf(115.94, 115.94, 27.99)
    x = mean_block_std(ldr) / 64.29
    mode = (4.4 - 1.0) / (4.4 + 10.1 - 2.0)
    pc = beta_dist.pdf(x, 4.4, 10.1) / beta_dist.pdf(mode, 4.4, 10.1)
    return float(np.clip(pb * pc, 0.0, 1.0))


def tmqi(hdr_rgb, ldr_rgb):
    ref = hdr_rgb @ LUMA
    lo, hi = ref.min(), ref.max()
    ref = (ref - lo) * (4294967295.0 / (hi - lo)) if hi > lo else np.zeros_like(ref)
    ldr = ldr_rgb.astype(np.float64) @ LUMA
    if ref.shape != ldr.shape:
        raise ValueError("dimension mismatch; the sanity set is same-size by construction")
    s = float(np.clip(structural_fidelity(ref, ldr), 0.0, 1.0))
    n = naturalness(ldr)
    q = 0.8012 * s**0.3046 + (1.0 - 0.8012) * n**0.7088
    return q, s, n


def main():
    if len(sys.argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    for i in range(5):
        hdr = read_hdr(f"{sys.argv[1]}/{i}_ref.hdr")
        ldr = np.asarray(Image.open(f"{sys.argv[1]}/{i}_test.png").convert("RGB"))
        q, s, n = tmqi(hdr, ldr)
        print(f"{i} q={q:.12f} s={s:.12f} n={n:.12f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
