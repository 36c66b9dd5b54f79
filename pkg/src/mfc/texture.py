"""Rotation-invariant LBP(8,3) texture histograms and template matching."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError, InputError
from .spectral import ThresholdConfig

P = 8
R = 3


def _ror(code: int, i: int, bits: int = P) -> int:
    mask = (1 << bits) - 1
    return ((code >> i) | (code << (bits - i))) & mask


def lbp_ri(code: int) -> int:
    """Smallest value among the 8 circular rotations of an 8-bit code."""
    if not 0 <= code < 1 << P:
        raise ValueError(f"code must be in [0, {(1 << P) - 1}], got {code}")
    return min(_ror(code, i) for i in range(P))


RI_LUT = np.array([lbp_ri(c) for c in range(1 << P)], dtype=np.int64)
CANONICAL = np.unique(RI_LUT)
N_BINS = len(CANONICAL)
BIN_LUT = np.searchsorted(CANONICAL, RI_LUT)


@dataclass(frozen=True)
class _Sample:
    """Sampling offsets and bilinear weights for one neighbour."""

    ys: tuple
    xs: tuple
    weights: tuple
    # when the two mixed weights coincide they are summed together so that
    # 90-degree rotated inputs see bit-identical arithmetic
    symmetric: bool


def _split(v: float) -> tuple[tuple[int, int], float]:
    a = round(abs(v), 12)
    base = int(np.floor(a))
    f = a - base
    s = 1 if v >= 0 else -1
    return (s * base, s * (base + 1)), f


def _samples(p: int = P, r: float = R) -> list[_Sample]:
    out = []
    for k in range(p):
        theta = 2.0 * np.pi * k / p
        (x0, x1), fx = _split(r * np.cos(theta))
        (y0, y1), fy = _split(-r * np.sin(theta))
        if fx == 0 and fy == 0:
            out.append(_Sample((y0,), (x0,), (1.0,), False))
            continue
        ys = (y0, y0, y1, y1)
        xs = (x0, x1, x0, x1)
        w = ((1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy)
        out.append(_Sample(ys, xs, w, fx == fy))
    return out


SAMPLES = _samples()


def _sample_diff(gray: np.ndarray, s: _Sample, y, x) -> np.ndarray:
    """Interpolated ``g_p - g_c`` for centres at ``(y, x)``."""
    gc = gray[y, x]
    d = [gray[y + dy, x + dx] - gc for dy, dx in zip(s.ys, s.xs)]
    if len(d) == 1:
        return d[0]
    w = s.weights
    if s.symmetric:
        return (w[0] * d[0] + w[3] * d[3]) + w[1] * (d[1] + d[2])
    return w[0] * d[0] + w[1] * d[1] + w[2] * d[2] + w[3] * d[3]


def lbp_code(gray: np.ndarray, x: int, y: int) -> int:
    """LBP(8,3) code at column ``x``, row ``y`` (at least 3 px from the border)."""
    gray = np.asarray(gray, dtype=np.float64)
    h, w = gray.shape
    if not (R <= x < w - R and R <= y < h - R):
        raise ValueError(f"pixel ({x}, {y}) is within {R} px of the border")
    code = 0
    for p, s in enumerate(SAMPLES):
        if _sample_diff(gray, s, y, x) >= 0:
            code |= 1 << p
    return code


def lbp_image(gray: np.ndarray) -> np.ndarray:
    """LBP(8,3) code per pixel; -1 within 3 px of the border."""
    gray = np.asarray(gray, dtype=np.float64)
    h, w = gray.shape
    codes = np.full((h, w), -1, dtype=np.int64)
    if h <= 2 * R or w <= 2 * R:
        return codes
    yy, xx = np.mgrid[R : h - R, R : w - R]
    inner = np.zeros(yy.shape, dtype=np.int64)
    for p, s in enumerate(SAMPLES):
        inner |= (_sample_diff(gray, s, yy, xx) >= 0).astype(np.int64) << p
    codes[R : h - R, R : w - R] = inner
    return codes


def lbp_ri_image(gray: np.ndarray) -> np.ndarray:
    """Canonical-bin index (0..35) per pixel; -1 within 3 px of the border."""
    codes = lbp_image(gray)
    return np.where(codes >= 0, BIN_LUT[np.maximum(codes, 0)], -1)


def histogram_from_bins(bins: np.ndarray, region: Optional[np.ndarray] = None) -> np.ndarray:
    sel = bins >= 0
    if region is not None:
        sel &= region
    counts = np.bincount(bins[sel], minlength=N_BINS).astype(np.float64)
    total = counts.sum()
    if total == 0:
        raise InputError("empty texture window: no interior pixels")
    return counts / total


def lbp_histogram(
    gray: np.ndarray,
    region: Optional[np.ndarray] = None,
    window: Optional[tuple[slice, slice]] = None,
    bins: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Normalized 36-bin histogram of canonical LBP codes.

    ``window`` is a ``(row_slice, col_slice)`` box; ``region`` an optional
    boolean mask further restricting which pixels are counted.  Codes are
    sampled from the whole image, so window pixels near the window edge use
    context from outside it.  Pass precomputed ``bins`` to avoid recoding.
    """
    if bins is None:
        bins = lbp_ri_image(gray)
    if window is not None:
        bins = bins[window]
        if region is not None:
            region = region[window]
    return histogram_from_bins(bins, region)


def chi_square(h1, h2) -> float:
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape:
        raise ValueError(f"histogram shapes differ: {h1.shape} vs {h2.shape}")
    s = h1 + h2
    d = h1 - h2
    nz = s != 0
    return float(np.sum(d[nz] ** 2 / s[nz]))


def to_gray8(mean_vis: np.ndarray, valid: Optional[np.ndarray] = None) -> np.ndarray:
    """Map mean visible reflectance linearly from [0, p99.9] onto 0..255."""
    mean_vis = np.asarray(mean_vis, dtype=np.float64)
    if valid is None:
        valid = np.isfinite(mean_vis)
    if not valid.any():
        return np.zeros(mean_vis.shape, dtype=np.uint8)
    top = np.percentile(mean_vis[valid], 99.9)
    if not top > 0:
        return np.zeros(mean_vis.shape, dtype=np.uint8)
    scaled = np.where(valid, mean_vis, 0.0) * (255.0 / top)
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def texture_window(bbox: tuple[slice, slice], shape: tuple[int, int], min_side: int = 32) -> tuple[slice, slice]:
    """Expand a bounding box symmetrically until each side is >= ``min_side``, clamped."""
    out = []
    for sl, n in zip(bbox, shape):
        lo, hi = sl.start, sl.stop
        deficit = min_side - (hi - lo)
        if deficit > 0:
            lo -= deficit // 2
            hi += deficit - deficit // 2
            if lo < 0:
                hi, lo = hi - lo, 0
            if hi > n:
                lo, hi = max(0, lo - (hi - n)), n
        out.append(slice(lo, hi))
    return tuple(out)


# ------------------------------------------------------------- templates


@dataclass(frozen=True)
class TextureTemplateSet:
    """Two cloud and two non-cloud 36-bin reference histograms, by name."""

    cloud: dict
    noncloud: dict

    def __post_init__(self):
        for group, d in (("cloud", self.cloud), ("noncloud", self.noncloud)):
            if len(d) != 2:
                raise ConfigError(f"need exactly 2 {group} templates, got {len(d)}")
            for name, h in d.items():
                h = np.asarray(h, dtype=np.float64)
                if h.shape != (N_BINS,):
                    raise ConfigError(f"template {name!r}: expected {N_BINS} bins, got {h.shape}")
                if np.any(h < 0) or abs(h.sum() - 1.0) > 1e-9:
                    raise ConfigError(f"template {name!r} is not a normalized histogram")

    def distances(self, hist) -> tuple[float, float]:
        """Minimum chi-square distance to the cloud and non-cloud templates."""
        d_c = min(chi_square(hist, h) for h in self.cloud.values())
        d_n = min(chi_square(hist, h) for h in self.noncloud.values())
        return d_c, d_n


def texture_is_noncloud(d_c: float, d_n: float, cfg: ThresholdConfig = ThresholdConfig()) -> bool:
    """Conservative decision: non-cloud only on a clear margin or a near-exact match."""
    if d_n + cfg.t15 < d_c:
        return True
    similar = abs(d_c - d_n) <= cfg.t17 and max(d_c, d_n) <= cfg.t16
    return similar and d_n < cfg.t18


def scale_bbox(bbox: tuple[slice, slice], scale: float, shape: tuple[int, int]) -> tuple[slice, slice]:
    """Map a box between grids whose pixel sizes differ by ``scale`` (target per source)."""
    if scale == 1:
        return bbox
    out = []
    for sl, n in zip(bbox, shape):
        lo = int(np.floor(sl.start * scale))
        hi = int(np.ceil(sl.stop * scale))
        out.append(slice(min(max(lo, 0), n - 1), min(max(hi, lo + 1), n)))
    return tuple(out)


def window_histogram(gray: np.ndarray, window: tuple[slice, slice]) -> np.ndarray:
    """LBP histogram of ``window``, coding only a crop padded by the radius.

    Identical to slicing the whole-image code map, at the cost of the window.
    """
    h, w = gray.shape
    rs, cs = window
    r0, r1 = max(rs.start - R, 0), min(rs.stop + R, h)
    c0, c1 = max(cs.start - R, 0), min(cs.stop + R, w)
    bins = lbp_ri_image(gray[r0:r1, c0:c1])
    return histogram_from_bins(bins[rs.start - r0 : rs.stop - r0, cs.start - c0 : cs.stop - c0])


def classify_object_texture(
    gray: np.ndarray,
    bbox: tuple[slice, slice],
    templates: TextureTemplateSet,
    cfg: ThresholdConfig = ThresholdConfig(),
    scale: float = 1.0,
) -> str:
    """Return ``"cloud"`` or ``"noncloud"`` for the object with bounding box ``bbox``.

    ``scale`` converts ``bbox`` from mask pixels to ``gray`` pixels when the
    texture image is held at a different resolution from the mask.
    """
    box = scale_bbox(bbox, scale, gray.shape)
    win = texture_window(box, gray.shape, cfg.texture_min_window)
    try:
        hist = window_histogram(gray, win)
    except InputError:
        return "cloud"
    d_c, d_n = templates.distances(hist)
    return "noncloud" if texture_is_noncloud(d_c, d_n, cfg) else "cloud"


def train_templates(patches: Iterable[tuple[np.ndarray, str]]) -> TextureTemplateSet:
    """Average the LBP histograms of labelled gray patches per class.

    Class labels are ``"cloud:<name>"`` or ``"noncloud:<name>"``; two classes
    of each kind are required.
    """
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for gray, label in patches:
        h = lbp_histogram(gray)
        sums[label] = sums.get(label, 0) + h
        counts[label] = counts.get(label, 0) + 1
    groups: dict[str, dict] = {"cloud": {}, "noncloud": {}}
    for label, total in sums.items():
        kind, _, name = label.partition(":")
        if kind not in groups or not name:
            raise InputError(f"class label {label!r} must look like 'cloud:<name>' or 'noncloud:<name>'")
        mean = total / counts[label]
        groups[kind][name] = mean / mean.sum()
    for kind, d in groups.items():
        if len(d) != 2:
            raise InputError(f"missing class: need 2 {kind} classes, got {sorted(d)}")
    return TextureTemplateSet(groups["cloud"], groups["noncloud"])


def save_templates(templates: TextureTemplateSet, path) -> None:
    lines = ["# LBP(8,3) rotation-invariant templates: <kind>:<name> then 36 bin values"]
    for kind, d in (("cloud", templates.cloud), ("noncloud", templates.noncloud)):
        for name, h in d.items():
            lines.append(f"{kind}:{name} " + " ".join(f"{v:.17g}" for v in h))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_templates(text: str, source: str) -> TextureTemplateSet:
    groups: dict[str, dict] = {"cloud": {}, "noncloud": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *vals = line.split()
        kind, _, name = head.partition(":")
        if kind not in groups or not name:
            raise ConfigError(f"{source}:{lineno}: bad template name {head!r}")
        try:
            h = np.array([float(v) for v in vals])
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
        if h.shape != (N_BINS,):
            raise ConfigError(f"{source}:{lineno}: expected {N_BINS} values, got {h.size}")
        groups[kind][name] = h / h.sum()
    return TextureTemplateSet(groups["cloud"], groups["noncloud"])


def load_templates(path=None) -> TextureTemplateSet:
    """Load a template file; ``None`` loads the bundled default set."""
    if path is None:
        text = resources.files("mfc").joinpath("data/default_templates.txt").read_text("utf-8")
        return _parse_templates(text, "default_templates.txt")
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"template file not found: {path}")
    return _parse_templates(path.read_text("utf-8"), str(path))
