#!/usr/bin/env python3
"""Writes the 3-image evaluation fixture and its expected metric values.

The expected values come from a NumPy implementation that shares no code
with the C++ library. Run from this directory: python3 make_eval_fixture.py
"""
import csv
import math
import pathlib

import numpy as np
from PIL import Image
from scipy import ndimage

EPS = np.finfo(np.float64).eps
HERE = pathlib.Path(__file__).resolve().parent / "eval3"


def make_pairs():
    rng = np.random.default_rng(20240917)
    pairs = {}
    # blob on a noisy prediction
    g = np.zeros((24, 32), np.uint8)
    yy, xx = np.mgrid[:24, :32]
    g[(yy - 10) ** 2 + (xx - 18) ** 2 <= 30] = 1
    p = np.clip(0.8 * ndimage.gaussian_filter(g.astype(float), 1.2) + 0.15 * rng.random(g.shape), 0, 1)
    pairs["a_blob"] = (g, p)
    # thin scratch, partly missed
    g = np.zeros((30, 30), np.uint8)
    for c in range(4, 26):
        g[6 + c // 2, c] = 1
        g[7 + c // 2, c] = 1
    p = 0.1 * rng.random(g.shape)
    p[g == 1] = rng.uniform(0.3, 1.0, int(g.sum()))
    p[20:24, 2:6] = 0.7
    pairs["b_scratch"] = (g, p)
    # two patches, random prediction
    g = np.zeros((20, 28), np.uint8)
    g[3:8, 4:10] = 1
    g[12:17, 18:25] = 1
    p = rng.random(g.shape)
    pairs["c_random"] = (g, p)
    return pairs


def mae(p, g):
    return float(np.abs(p - g).mean())


def curves(p, g):
    prec, rec = [], []
    gb = g.astype(bool)
    for i in range(256):
        pos = p >= i / 255.0
        tp = np.sum(pos & gb)
        fp = np.sum(pos & ~gb)
        fn = np.sum(~pos & gb)
        prec.append(1.0 if tp + fp == 0 else tp / (tp + fp))
        rec.append(tp / (tp + fn))
    prec, rec = np.array(prec, float), np.array(rec, float)
    den = 0.3 * prec + rec
    f = np.where(den == 0, 0.0, 1.3 * prec * rec / np.where(den == 0, 1, den))
    return f


def weighted_f(p, g):
    E = np.abs(p - g)
    fg = np.argwhere(g == 1)
    Et = E.copy()
    D = np.zeros_like(E)
    for r, c in np.argwhere(g == 0):
        d2 = (fg[:, 0] - r) ** 2 + (fg[:, 1] - c) ** 2
        near = fg[d2 == d2.min()]
        Et[r, c] = E[near[:, 0], near[:, 1]].mean()
        D[r, c] = math.sqrt(d2.min())
    ax = np.arange(-3, 4)
    k = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / 50.0)
    k /= k.sum()
    EA = ndimage.correlate(Et, k, mode="constant", cval=0.0)
    gb = g == 1
    MIN = np.where(gb & (EA < E), EA, E)
    B = np.where(gb, 1.0, 2 - np.exp(math.log(0.5) / 5 * D))
    Ew = MIN * B
    tpw = gb.sum() - Ew[gb].sum()
    fpw = Ew[~gb].sum()
    R = 1 - Ew[gb].mean()
    P = tpw / (EPS + tpw + fpw)
    return float(2 * R * P / (EPS + R + P))


def s_object(v):
    m = v.mean()
    sd = v.std(ddof=1) if v.size > 1 else 0.0
    return 2 * m / (m * m + 1 + sd + EPS)


def s_ssim(x, y):
    n = x.size
    if n == 0:
        return 0.0
    mx, my = x.mean(), y.mean()
    vx = ((x - mx) ** 2).sum() / (n - 1 + EPS)
    vy = ((y - my) ** 2).sum() / (n - 1 + EPS)
    cxy = ((x - mx) * (y - my)).sum() / (n - 1 + EPS)
    a = 4 * mx * my * cxy
    b = (mx * mx + my * my) * (vx + vy)
    if a != 0:
        return a / (b + EPS)
    return 1.0 if b == 0 else 0.0


def s_measure(p, g):
    H, W = g.shape
    gb = g == 1
    u = gb.mean()
    so = u * s_object(p[gb]) + (1 - u) * s_object(1 - p[~gb])
    rows, cols = np.nonzero(gb)
    Y = int(math.floor((rows + 1).mean() + 0.5))
    X = int(math.floor((cols + 1).mean() + 0.5))
    region = 0.0
    for rs in (slice(0, Y), slice(Y, H)):
        for cs in (slice(0, X), slice(X, W)):
            pp, gg = p[rs, cs].ravel(), g[rs, cs].ravel().astype(float)
            region += pp.size / (H * W) * s_ssim(pp, gg)
    return float(max(0.0, 0.5 * so + 0.5 * region))


def e_measure(p, g):
    a = p - p.mean()
    b = g - g.mean()
    xi = 2 * a * b / (a * a + b * b + 1e-12)
    return float(((1 + xi) ** 2 / 4).mean())


def main():
    (HERE / "pred").mkdir(parents=True, exist_ok=True)
    (HERE / "gt").mkdir(parents=True, exist_ok=True)
    rows, fcurves = [], []
    for name, (g, p) in make_pairs().items():
        q = np.clip(np.floor(p * 255 + 0.5), 0, 255).astype(np.uint8)
        Image.fromarray(q, "L").save(HERE / "pred" / f"{name}.png")
        Image.fromarray((g * 255).astype(np.uint8), "L").save(HERE / "gt" / f"{name}.png")
        pv = q.astype(np.float64) / 255.0
        gv = g.astype(np.float64)
        f = curves(pv, g)
        fcurves.append(f)
        rows.append((name, mae(pv, gv), weighted_f(pv, g), s_measure(pv, g), e_measure(pv, gv), f.max()))
    mean = [float(np.mean([r[i] for r in rows])) for i in range(1, 5)]
    with open(HERE / "expected.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "mae", "f_w", "s_m", "e_m", "max_f"])
        for r in rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
        w.writerow(["mean"] + [repr(v) for v in mean] + [repr(float(np.mean(fcurves, axis=0).max()))])


if __name__ == "__main__":
    main()
