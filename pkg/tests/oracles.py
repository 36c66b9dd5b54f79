"""Slow, independent reference implementations used as test oracles."""
from __future__ import annotations

import math
from collections import deque

import numpy as np


def hot_px(b1, b3):
    return b1 - 0.5 * b3


def vbr_px(b1, b2, b3):
    hi = max(b1, b2, b3)
    if hi <= 0:
        return 0.0
    return min(b1, b2, b3) / hi


def ndvi_px(b3, b4):
    den = b4 + b3
    if den == 0:
        return 0.0
    return (b4 - b3) / den


def rough_px(b1, b2, b3, t1=0.13, t2=0.7, t3=0.07):
    return hot_px(b1, b3) > t1 and vbr_px(b1, b2, b3) > t2 and b3 > t3


def water_px(b3, b4, t4=0.15, t5=0.2, t6=0.2, t7=0.15):
    nd = ndvi_px(b3, b4)
    return (nd < t4 and b4 < t5) or (nd < t6 and b4 < t7)


def chi_square_sum(m, n):
    total = 0.0
    for a, b in zip(m, n):
        if a + b != 0:
            total += (a - b) ** 2 / (a + b)
    return total


def fill_hole_fixpoint(image, outlet=None):
    """Reconstruction by erosion iterated to a fixpoint.

    Start from the image maximum inside and the image itself on the border;
    repeatedly take the 3x3 minimum and clamp from below by the image.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    f = np.full_like(image, image.max())
    border = np.zeros((h, w), bool)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    if outlet is not None:
        border |= outlet
    f[border] = image[border]
    while True:
        p = np.pad(f, 1, constant_values=np.inf)
        m = np.min([p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] for dy in (-1, 0, 1) for dx in (-1, 0, 1)], axis=0)
        nxt = np.maximum(m, image)
        if np.array_equal(nxt, f):
            return f
        f = nxt


def flood_fill_labels(mask):
    """Partition of the set pixels into 8-connected components, as frozensets."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    seen = np.zeros_like(mask)
    parts = []
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            comp = set()
            q = deque([(r, c)])
            seen[r, c] = True
            while q:
                y, x = q.popleft()
                comp.add((y, x))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        yy, xx = y + dy, x + dx
                        if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not seen[yy, xx]:
                            seen[yy, xx] = True
                            q.append((yy, xx))
            parts.append(frozenset(comp))
    return set(parts)


def guided_filter_naive(guide, src, radius, eps, valid=None):
    """Per-window least squares, then per-pixel averaging of window models.

    Windows are cropped at the border and restricted to valid pixels.
    """
    guide = np.asarray(guide, dtype=np.float64)
    if guide.ndim == 2:
        guide = guide[..., None]
    src = np.asarray(src, dtype=np.float64)
    h, w, c = guide.shape
    if valid is None:
        valid = np.ones((h, w), bool)
    a = np.zeros((h, w, c))
    b = np.zeros((h, w))
    has = np.zeros((h, w), bool)
    for y in range(h):
        for x in range(w):
            ys = slice(max(y - radius, 0), min(y + radius, h - 1) + 1)
            xs = slice(max(x - radius, 0), min(x + radius, w - 1) + 1)
            sel = valid[ys, xs]
            if not sel.any():
                continue
            gi = guide[ys, xs][sel]
            pi = src[ys, xs][sel]
            mu = gi.mean(axis=0)
            pm = pi.mean()
            d = gi - mu
            cov = d.T @ d / len(pi)
            cross = d.T @ (pi - pm) / len(pi)
            a[y, x] = np.linalg.solve(cov + eps * np.eye(c), cross)
            b[y, x] = pm - a[y, x] @ mu
            has[y, x] = True
    q = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            if not valid[y, x]:
                continue
            ys = slice(max(y - radius, 0), min(y + radius, h - 1) + 1)
            xs = slice(max(x - radius, 0), min(x + radius, w - 1) + 1)
            sel = has[ys, xs]
            q[y, x] = (a[ys, xs][sel] @ guide[y, x]).mean() + b[ys, xs][sel].mean()
    return q


def mean_of_window_means(src, radius, valid=None):
    """Limit of the guided filter as epsilon grows: average of window means."""
    src = np.asarray(src, dtype=np.float64)
    h, w = src.shape
    if valid is None:
        valid = np.ones((h, w), bool)
    means = np.full((h, w), np.nan)
    for y in range(h):
        for x in range(w):
            ys = slice(max(y - radius, 0), min(y + radius, h - 1) + 1)
            xs = slice(max(x - radius, 0), min(x + radius, w - 1) + 1)
            sel = valid[ys, xs]
            if sel.any():
                means[y, x] = src[ys, xs][sel].mean()
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            if valid[y, x]:
                ys = slice(max(y - radius, 0), min(y + radius, h - 1) + 1)
                xs = slice(max(x - radius, 0), min(x + radius, w - 1) + 1)
                out[y, x] = np.nanmean(means[ys, xs])
    return out


def lbp_code_direct(gray, x, y, p=8, r=3.0):
    """Circular LBP with bilinear sampling written straight from the definition."""
    gray = np.asarray(gray, dtype=np.float64)
    gc = gray[y, x]
    code = 0
    for k in range(p):
        sx = x + r * math.cos(2 * math.pi * k / p)
        sy = y - r * math.sin(2 * math.pi * k / p)
        sx, sy = round(sx, 9), round(sy, 9)
        x0, y0 = math.floor(sx), math.floor(sy)
        fx, fy = sx - x0, sy - y0
        val = 0.0
        for yy, wy in ((y0, 1 - fy), (y0 + 1, fy)):
            for xx, wx in ((x0, 1 - fx), (x0 + 1, fx)):
                if wx * wy:
                    val += wx * wy * (gray[yy, xx] - gc)
        if val >= 0:
            code |= 1 << k
    return code


def min_rotation(code, p=8):
    best = code
    for i in range(1, p):
        rot = ((code >> i) | (code << (p - i))) & ((1 << p) - 1)
        best = min(best, rot)
    return best


def overlap_similarity(cloud, shadow, rows, cols, dy, dx):
    """Translated footprint share landing on shadow, over in-bounds non-cloud pixels."""
    h, w = cloud.shape
    hit = tot = 0
    for r, c in zip(rows, cols):
        rr, cc = r + dy, c + dx
        if 0 <= rr < h and 0 <= cc < w and not cloud[rr, cc]:
            tot += 1
            hit += bool(shadow[rr, cc])
    return hit / tot if tot else 0.0
