"""Synthetic scenes and texture patches with known ground truth.

Scenes are dark vegetation with bright gray clouds whose shadows are placed
by the same projection the matcher inverts.  They back the test suite, the
experiment scripts and the bundled texture templates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .raster import Scene, ViewSunGeometry
from .shadow import ShadowMatchParams, predict_shadow_offset

VEGETATION = np.array([0.04, 0.07, 0.05, 0.30])
CLOUD = np.array([0.46, 0.45, 0.44, 0.50])
WATER = np.array([0.05, 0.05, 0.03, 0.02])
ROAD = np.array([0.32, 0.31, 0.30, 0.30])
SNOW = np.array([0.62, 0.63, 0.62, 0.55])
# multiplicative darkening inside a cloud shadow
SHADOW_GAIN = np.array([0.55, 0.55, 0.5, 0.35])


@dataclass
class SyntheticScene:
    scene: Scene
    cloud: np.ndarray
    shadow: np.ndarray
    heights: list = field(default_factory=list)
    offsets: list = field(default_factory=list)
    # cloud k (1-based, in placement order) per pixel, 0 elsewhere
    cloud_ids: Optional[np.ndarray] = None


def smooth_noise(rng: np.random.Generator, shape, sigma: float, amplitude: float) -> np.ndarray:
    """Gaussian-smoothed noise rescaled to peak magnitude ``amplitude``."""
    f = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    peak = np.abs(f).max()
    return f * (amplitude / peak) if peak > 0 else f


def blob_opacity(shape, center, radius, rng, edge=3.0, wobble=0.15) -> np.ndarray:
    """Opacity in [0, 1] of a roundish blob with a soft edge ``edge`` px wide."""
    yy, xx = np.indices(shape, dtype=np.float64)
    dy, dx = yy - center[0], xx - center[1]
    dist = np.hypot(dy, dx)
    theta = np.arctan2(dy, dx)
    phases = rng.uniform(0, 2 * np.pi, 3)
    r = radius * (
        1.0
        + wobble * (0.6 * np.sin(2 * theta + phases[0]) + 0.3 * np.sin(3 * theta + phases[1]) + 0.1 * np.sin(5 * theta + phases[2]))
    )
    return np.clip((r - dist) / edge + 0.5, 0.0, 1.0)


def random_geometry(rng: np.random.Generator, sun_zenith=(20.0, 60.0), view_zenith=(0.0, 30.0)) -> ViewSunGeometry:
    return ViewSunGeometry(
        sun_zenith=float(rng.uniform(*sun_zenith)),
        sun_azimuth=float(rng.uniform(0.0, 360.0)),
        view_zenith=float(rng.uniform(*view_zenith)),
        view_azimuth=float(rng.uniform(0.0, 360.0)),
    )


def pixels_per_meter(geometry: ViewSunGeometry, pixel_size: float) -> float:
    dx, dy = predict_shadow_offset(1.0, geometry, pixel_size)
    return math.hypot(dx, dy)


def make_scene(
    seed: int,
    shape: tuple[int, int] = (240, 240),
    n_clouds: int = 2,
    radius: tuple[float, float] = (14.0, 24.0),
    geometry: Optional[ViewSunGeometry] = None,
    pixel_size: float = 16.0,
    shift: tuple[float, float] = (25.0, 70.0),
    params: ShadowMatchParams = ShadowMatchParams(),
    water: bool = False,
    road: bool = False,
    snow: bool = False,
    nodata_border: int = 0,
) -> SyntheticScene:
    """Vegetation scene with ``n_clouds`` clouds and their shadows.

    Cloud heights are drawn from the matcher's sweep grid so that the shadow
    displacement falls within ``shift`` pixels.  Geometries whose displacement
    per sweep step is under one pixel are redrawn (height is then
    unidentifiable from the image).
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    grid = params.heights()
    while True:
        g = geometry or random_geometry(rng)
        ppm = pixels_per_meter(g, pixel_size)
        if geometry is not None or ppm * params.h_step >= 1.0:
            break
    usable = grid[(grid * ppm >= shift[0]) & (grid * ppm <= shift[1])]
    if usable.size == 0:
        usable = grid[[np.argmin(np.abs(grid * ppm - np.mean(shift)))]]

    bands = VEGETATION[:, None, None] + np.stack(
        [smooth_noise(rng, shape, 4.0, a) for a in (0.008, 0.01, 0.008, 0.02)]
    )
    feature = np.zeros(shape, dtype=bool)
    if water:
        wmask = blob_opacity(shape, (h * 0.75, w * 0.2), min(h, w) * 0.12, rng, edge=1.0) > 0.5
        bands = np.where(wmask[None], WATER[:, None, None], bands)
        feature |= wmask
    if road:
        rmask = np.zeros(shape, dtype=bool)
        r0 = int(h * 0.15)
        rmask[r0 : r0 + 2, int(w * 0.1) : int(w * 0.6)] = True
        bands = np.where(rmask[None], ROAD[:, None, None], bands)
        feature |= rmask
    if snow:
        smask = blob_opacity(shape, (h * 0.2, w * 0.8), min(h, w) * 0.07, rng, edge=1.0) > 0.5
        speckle = rng.uniform(-0.12, 0.12, shape)
        bands = np.where(smask[None], SNOW[:, None, None] + speckle[None], bands)
        feature |= smask

    alpha = np.zeros(shape)
    shadow = np.zeros(shape, dtype=bool)
    ids = np.zeros(shape, dtype=np.int32)
    heights, offsets = [], []
    placed = 0
    for _ in range(200):
        if placed == n_clouds:
            break
        rad = rng.uniform(*radius)
        hgt = float(rng.choice(usable))
        dx, dy = predict_shadow_offset(hgt, g, pixel_size)
        ox, oy = int(math.floor(dx + 0.5)), int(math.floor(dy + 0.5))
        margin = rad * 1.4 + 4
        lo_r = max(margin, margin - oy)
        hi_r = min(h - margin, h - margin - oy)
        lo_c = max(margin, margin - ox)
        hi_c = min(w - margin, w - margin - ox)
        if lo_r >= hi_r or lo_c >= hi_c:
            continue
        cy, cx = rng.uniform(lo_r, hi_r), rng.uniform(lo_c, hi_c)
        a = blob_opacity(shape, (cy, cx), rad, rng)
        body = a >= 0.5
        moved = ndimage.shift(body, (oy, ox), order=0, mode="constant", cval=False)
        # keep clouds, shadows and ground features from overlapping one another
        taken = ndimage.binary_dilation((alpha > 0) | shadow | feature, iterations=3)
        if np.any((a > 0) & taken) or np.any(moved & taken):
            continue
        alpha = np.maximum(alpha, a)
        shadow |= moved
        ids[body] = placed + 1
        heights.append(hgt)
        offsets.append((oy, ox))
        placed += 1

    bands = np.where(shadow[None], bands * SHADOW_GAIN[:, None, None], bands)
    texture = np.stack([smooth_noise(rng, shape, 3.0, 0.03)] * 3 + [smooth_noise(rng, shape, 3.0, 0.03)])
    cloud_refl = CLOUD[:, None, None] + texture
    bands = bands * (1 - alpha[None]) + cloud_refl * alpha[None]
    cloud = alpha >= 0.5
    shadow &= ~cloud

    valid = np.ones(shape, dtype=bool)
    if nodata_border:
        valid[:nodata_border] = False
        valid[:, :nodata_border] = False
    scene = Scene(bands, valid, pixel_size=pixel_size, geometry=g)
    return SyntheticScene(scene, cloud & valid, shadow & valid, heights, offsets, np.where(cloud & valid, ids, 0))


# ---------------------------------------------------------------- textures

TEXTURE_CLASSES = ("cloud:soft_edge", "cloud:cirrocumulus", "noncloud:snow", "noncloud:urban")


def _quantize(refl: np.ndarray, top: float = 0.5) -> np.ndarray:
    return np.clip(np.rint(refl * (255.0 / top)), 0, 255).astype(np.uint8)


def texture_patch(rng: np.random.Generator, label: str, size: int = 100) -> np.ndarray:
    """One 8-bit gray patch of the given texture class."""
    shape = (size, size)
    veg = VEGETATION[:3].mean() + smooth_noise(rng, shape, 4.0, 0.008)
    cloud_vis = CLOUD[:3].mean()
    if label == "cloud:soft_edge":
        c = rng.uniform(-0.2, 1.2, 2) * size
        a = blob_opacity(shape, c, rng.uniform(0.5, 0.9) * size, rng, edge=rng.uniform(2, 6))
        inner = cloud_vis + smooth_noise(rng, shape, 3.0, 0.03)
        refl = veg * (1 - a) + inner * a
    elif label == "cloud:cirrocumulus":
        cells = smooth_noise(rng, shape, 2.5, 1.0)
        a = np.clip(0.5 + 0.9 * cells, 0.0, 1.0)
        refl = veg * (1 - a) + (cloud_vis + smooth_noise(rng, shape, 1.5, 0.02)) * a
    elif label == "noncloud:snow":
        ridges = smooth_noise(rng, shape, 8.0, 0.08)
        refl = SNOW[:3].mean() + ridges + rng.uniform(-0.12, 0.12, shape)
    elif label == "noncloud:urban":
        refl = np.full(shape, 0.12)
        for _ in range(40):
            r0, c0 = rng.integers(0, size, 2)
            hh, ww = rng.integers(3, 14, 2)
            refl[r0 : r0 + hh, c0 : c0 + ww] = rng.uniform(0.15, 0.5)
        refl = refl + rng.uniform(-0.02, 0.02, shape)
    else:
        raise ValueError(f"unknown texture class {label!r}")
    return _quantize(refl)


def texture_patches(seed: int = 0, per_class: int = 21, size: int = 100) -> list[tuple[np.ndarray, str]]:
    """Labelled training patches, ``per_class`` of each of the four classes."""
    rng = np.random.default_rng(seed)
    return [(texture_patch(rng, label, size), label) for label in TEXTURE_CLASSES for _ in range(per_class)]
