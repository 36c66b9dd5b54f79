"""Guided filter with border-cropped windows, and cloud-mask refinement.

The filter runs in O(1) per pixel via cumulative-sum box filters.  Windows
are cropped at the image border and invalid pixels carry zero weight, so
``|w|`` is always the number of valid pixels actually inside a window.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import InputError
from .raster import Scene
from .spectral import SpectralIndices, ThresholdConfig


def box_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum of ``a`` over the (2r+1)^2 window at each pixel, cropped at borders.

    Works on the two leading axes; trailing axes are carried along.
    """
    h, w = a.shape[:2]
    out = a
    for axis, n in ((0, h), (1, w)):
        c = np.cumsum(out, axis=axis)
        zero = np.zeros_like(np.take(c, [0], axis=axis))
        c = np.concatenate([zero, c], axis=axis)
        idx = np.arange(n)
        hi = np.minimum(idx + radius, n - 1) + 1
        lo = np.maximum(idx - radius, 0)
        out = np.take(c, hi, axis=axis) - np.take(c, lo, axis=axis)
    return out


def _solve_sym3(s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Solve batched symmetric 3x3 systems ``s @ x = v`` by the adjugate."""
    a, b, c = s[..., 0, 0], s[..., 0, 1], s[..., 0, 2]
    d, e, f = s[..., 1, 1], s[..., 1, 2], s[..., 2, 2]
    i00 = d * f - e * e
    i01 = c * e - b * f
    i02 = b * e - c * d
    i11 = a * f - c * c
    i12 = b * c - a * e
    i22 = a * d - b * b
    det = a * i00 + b * i01 + c * i02
    x0 = i00 * v[..., 0] + i01 * v[..., 1] + i02 * v[..., 2]
    x1 = i01 * v[..., 0] + i11 * v[..., 1] + i12 * v[..., 2]
    x2 = i02 * v[..., 0] + i12 * v[..., 1] + i22 * v[..., 2]
    return np.stack([x0, x1, x2], axis=-1) / det[..., None]


def guided_filter(
    guide: np.ndarray,
    src: np.ndarray,
    radius: int,
    epsilon: float,
    valid: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Filter ``src`` under the local linear model of ``guide``.

    ``guide`` is ``(H, W)`` or ``(H, W, C)``.  For a colour guide the per-window
    coefficients solve the epsilon-regularized least squares with the full
    channel covariance.  Output is 0 at invalid pixels.
    """
    guide = np.asarray(guide, dtype=np.float64)
    src = np.asarray(src, dtype=np.float64)
    if guide.ndim == 2:
        guide = guide[..., None]
    if guide.shape[:2] != src.shape:
        raise InputError(f"dimension mismatch: guide {guide.shape[:2]} vs input {src.shape}")
    if radius < 1:
        raise InputError(f"radius must be >= 1, got {radius}")
    if not epsilon > 0:
        raise InputError(f"epsilon must be > 0, got {epsilon}")
    if valid is None:
        valid = np.ones(src.shape, dtype=bool)
    if not valid.any():
        return np.zeros_like(src)
    n_ch = guide.shape[2]

    # The filter is shift-equivariant in both images; recentring keeps the
    # variance differences well conditioned and makes constants exact.
    p_ref = src[valid][0]
    i_ref = guide[valid].mean(axis=0)
    v = valid.astype(np.float64)
    p = np.where(valid, src - p_ref, 0.0)
    g = np.where(valid[..., None], guide - i_ref, 0.0)

    n = box_sum(v, radius)
    ok = n > 0
    nn = np.where(ok, n, 1.0)
    mean_i = box_sum(g, radius) / nn[..., None]
    mean_p = box_sum(p, radius) / nn
    cov_ip = box_sum(g * p[..., None], radius) / nn[..., None] - mean_i * mean_p[..., None]

    if n_ch == 1:
        var_i = box_sum(g * g, radius)[..., 0] / nn - mean_i[..., 0] ** 2
        a = (cov_ip[..., 0] / (var_i + epsilon))[..., None]
    else:
        outer = g[..., :, None] * g[..., None, :]
        cov_ii = box_sum(outer, radius) / nn[..., None, None]
        cov_ii = cov_ii - mean_i[..., :, None] * mean_i[..., None, :]
        cov_ii = cov_ii + epsilon * np.eye(n_ch)
        if n_ch == 3:
            a = _solve_sym3(cov_ii, cov_ip)
        else:
            a = np.linalg.solve(cov_ii, cov_ip[..., None])[..., 0]
    b = mean_p - np.sum(a * mean_i, axis=-1)
    a = np.where(ok[..., None], a, 0.0)
    b = np.where(ok, b, 0.0)

    m = box_sum(ok.astype(np.float64), radius)
    mm = np.where(m > 0, m, 1.0)
    q = (np.sum(box_sum(a, radius) * g, axis=-1) + box_sum(b, radius)) / mm
    return np.where(valid, q + p_ref, 0.0)


def rgb_guide(scene: Scene) -> np.ndarray:
    """Red, green, blue composite as an ``(H, W, 3)`` guide."""
    return np.stack([scene.b3, scene.b2, scene.b1], axis=-1)


def nrg_guide(scene: Scene) -> np.ndarray:
    """NIR, red, green composite as an ``(H, W, 3)`` guide."""
    return np.stack([scene.b4, scene.b3, scene.b2], axis=-1)


def refine_cloud_mask(
    scene: Scene,
    rough: np.ndarray,
    water: np.ndarray,
    cfg: ThresholdConfig = ThresholdConfig(),
    indices: Optional[SpectralIndices] = None,
    filtered: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Grow the rough cloud mask into thin cloud around the core regions.

    A pixel joins when the guided-filter output of the rough mask exceeds
    ``t8`` and either HOT exceeds ``t9`` or the pixel is water.  Rough-mask
    pixels are always kept.
    """
    idx = indices or SpectralIndices(scene)
    if filtered is None:
        filtered = guided_filter(
            rgb_guide(scene), rough.astype(np.float64), cfg.guided_radius, cfg.guided_epsilon, scene.valid
        )
    with np.errstate(invalid="ignore"):
        grown = (filtered > cfg.t8) & ((idx.hot > cfg.t9) | water)
    return (grown | rough) & scene.valid
