"""Cloud-shadow extraction: candidates, cloud-to-shadow matching, correction,
guided refinement, object filtering and postprocessing."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, InputError
from .guided import guided_filter, nrg_guide
from .objects import (
    ObjectTable,
    dilate,
    fill_hole,
    fill_mask_holes,
    label_components,
    remove_small_objects,
)
from .raster import Scene, ViewSunGeometry
from .spectral import SpectralIndices, ThresholdConfig


@dataclass(frozen=True)
class ShadowMatchParams:
    """Height sweep, matching and correction constants for the shadow stage."""

    h_min: float = 200.0
    h_max: float = 12000.0
    h_step: float = 250.0
    similarity_threshold: float = 0.3
    r_shadow: float = 0.3
    r_cloudshadow: float = 0.3
    # water-object exclusion: plain fraction, and fraction for elongated objects
    water_fraction: float = 0.75
    water_fraction_elongated: float = 0.5
    water_lwr: float = 5.4

    def __post_init__(self):
        if not 0 < self.h_min < self.h_max:
            raise ConfigError(f"need 0 < h_min < h_max, got {self.h_min}, {self.h_max}")
        if not self.h_step > 0:
            raise ConfigError(f"h_step must be > 0, got {self.h_step}")
        for name in (
            "similarity_threshold",
            "r_shadow",
            "r_cloudshadow",
            "water_fraction",
            "water_fraction_elongated",
        ):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")

    def heights(self) -> np.ndarray:
        """Sweep grid from ``h_min`` to ``h_max`` inclusive."""
        n = int(math.floor((self.h_max - self.h_min) / self.h_step + 1e-9))
        grid = self.h_min + self.h_step * np.arange(n + 1)
        if grid[-1] < self.h_max - 1e-9:
            grid = np.append(grid, self.h_max)
        return grid


# ---------------------------------------------------------------- candidates


def rough_shadow_mask(
    scene: Scene,
    water: np.ndarray,
    cfg: ThresholdConfig = ThresholdConfig(),
    indices: Optional[SpectralIndices] = None,
) -> np.ndarray:
    """Dark pits: NIR fill-hole depth on land, mean-visible depth on water."""
    idx = indices or SpectralIndices(scene)
    outlet = ~scene.valid
    nir = scene.b4
    vis = np.where(scene.valid, idx.mean_visible, 0.0)
    land_depth = fill_hole(nir, outlet) - nir
    water_depth = fill_hole(vis, outlet) - vis
    land = scene.valid & ~water
    return (land & (land_depth > cfg.t19)) | (scene.valid & water & (water_depth > cfg.t20))


def exclude_water_objects(shadow: np.ndarray, water: np.ndarray, params: ShadowMatchParams = ShadowMatchParams()) -> np.ndarray:
    """Remove shadow objects that are mostly water, or elongated and half water."""
    table = label_components(shadow)
    if table.count == 0:
        return np.zeros_like(shadow, dtype=bool)
    wet = np.bincount(table.labels.ravel(), weights=water.ravel(), minlength=table.count + 1)[1:]
    frac_water = wet / table.area
    remove = (frac_water > params.water_fraction) | (
        (frac_water > params.water_fraction_elongated) & (table.lwr > params.water_lwr)
    )
    return table.mask_of(~remove)


# ---------------------------------------------------------------- matching


def predict_shadow_offset(height: float, geometry: ViewSunGeometry, pixel_size: float) -> tuple[float, float]:
    """Image offset ``(dx, dy)`` in pixels from a cloud to its shadow.

    x grows east (columns), y grows south (rows), azimuths are clockwise from
    north.  The shadow lies away from the sun; the cloud image is displaced
    away from the sensor by parallax, which is subtracted.
    """
    ts = math.tan(math.radians(geometry.sun_zenith))
    tv = math.tan(math.radians(geometry.view_zenith))
    ps = math.radians(geometry.sun_azimuth)
    pv = math.radians(geometry.view_azimuth)
    dx = height * (ts * -math.sin(ps) - tv * -math.sin(pv))
    dy = height * (ts * math.cos(ps) - tv * math.cos(pv))
    return dx / pixel_size, dy / pixel_size


@dataclass(frozen=True)
class ObjectMatch:
    """Best height found for one cloud object."""

    object_index: int
    height: float
    similarity: float
    offset: tuple[int, int]
    matched: bool


def _round(v: float) -> int:
    return int(math.floor(v + 0.5))


def _best_run(sims: np.ndarray) -> int:
    """Centre of the first run of maximal similarity along the sweep."""
    best = sims.max()
    start = int(np.argmax(sims == best))
    stop = start
    while stop + 1 < len(sims) and sims[stop + 1] == best:
        stop += 1
    return (start + stop) // 2


def _match_one(i, table, cloud, shadow, offsets, heights, threshold) -> ObjectMatch:
    h, w = cloud.shape
    rows, cols = table.pixels(i)
    cache: dict[tuple[int, int], float] = {}
    sims = np.empty(len(heights))
    for k, off in enumerate(offsets):
        if off not in cache:
            dy, dx = off
            rr, cc = rows + dy, cols + dx
            inb = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            rr, cc = rr[inb], cc[inb]
            free = ~cloud[rr, cc]
            denom = np.count_nonzero(free)
            cache[off] = np.count_nonzero(shadow[rr[free], cc[free]]) / denom if denom else 0.0
        sims[k] = cache[off]
    j = _best_run(sims)
    return ObjectMatch(i, float(heights[j]), float(sims[j]), offsets[j], bool(sims[j] > threshold))


def match_objects(
    cloud: np.ndarray,
    shadow: np.ndarray,
    geometry: Optional[ViewSunGeometry],
    pixel_size: float,
    params: ShadowMatchParams = ShadowMatchParams(),
    workers: int = 1,
) -> tuple[ObjectTable, list[ObjectMatch]]:
    """Sweep cloud heights for every cloud object, largest object first."""
    if geometry is None:
        raise InputError("missing geometry: shadow matching needs sun/view angles")
    if cloud.shape != shadow.shape:
        raise InputError(f"dimension mismatch: {cloud.shape} vs {shadow.shape}")
    table = label_components(cloud)
    heights = params.heights()
    offsets = []
    for hgt in heights:
        dx, dy = predict_shadow_offset(hgt, geometry, pixel_size)
        offsets.append((_round(dy), _round(dx)))
    order = sorted(range(table.count), key=lambda i: (-table.area[i], i))

    def job(i):
        return _match_one(i, table, cloud, shadow, offsets, heights, params.similarity_threshold)

    if workers > 1 and len(order) > 1:
        with ThreadPoolExecutor(workers) as pool:
            matches = list(pool.map(job, order))
    else:
        matches = [job(i) for i in order]
    return table, matches


def match_cloud_shadows(
    cloud: np.ndarray,
    shadow: np.ndarray,
    geometry: Optional[ViewSunGeometry],
    pixel_size: float,
    params: ShadowMatchParams = ShadowMatchParams(),
    workers: int = 1,
) -> np.ndarray:
    """Stamp each matched cloud footprint at its best shadow offset."""
    cloud = np.asarray(cloud, dtype=bool)
    shadow = np.asarray(shadow, dtype=bool)
    table, matches = match_objects(cloud, shadow, geometry, pixel_size, params, workers)
    h, w = cloud.shape
    out = np.zeros_like(cloud)
    for m in matches:
        if not m.matched:
            continue
        rows, cols = table.pixels(m.object_index)
        rr, cc = rows + m.offset[0], cols + m.offset[1]
        inb = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        out[rr[inb], cc[inb]] = True
    return out & ~cloud


def correct_cloud_shadows(
    matched: np.ndarray,
    shadow_layer: np.ndarray,
    params: ShadowMatchParams = ShadowMatchParams(),
) -> np.ndarray:
    """Adopt whole shadow-layer objects that substantially overlap a matched shadow."""
    matched = np.asarray(matched, dtype=bool)
    m_tab = label_components(matched)
    s_tab = label_components(shadow_layer)
    if m_tab.count == 0 or s_tab.count == 0:
        return matched.copy()
    both = (m_tab.labels > 0) & (s_tab.labels > 0)
    pairs = m_tab.labels[both].astype(np.int64) * (s_tab.count + 1) + s_tab.labels[both]
    keys, overlap = np.unique(pairs, return_counts=True)
    m_id, s_id = np.divmod(keys, s_tab.count + 1)
    ok = (overlap / s_tab.area[s_id - 1] > params.r_shadow) & (
        overlap / m_tab.area[m_id - 1] > params.r_cloudshadow
    )
    adopt = np.zeros(s_tab.count, dtype=bool)
    adopt[s_id[ok] - 1] = True
    return matched | s_tab.mask_of(adopt)


# ---------------------------------------------------------------- refinement


def shadow_object_noncloud(table: ObjectTable, cfg: ThresholdConfig = ThresholdConfig()) -> np.ndarray:
    """Per-object flag for shadow objects to discard by area and shape."""
    first = (table.area > cfg.t23) | (table.frac > cfg.t22)
    second = (table.lwr > cfg.t24) | ((table.area < cfg.t25) & (table.lwr > cfg.t26))
    return first | second


def refine_and_filter_shadow(
    rough_csm: np.ndarray,
    scene: Scene,
    cfg: ThresholdConfig = ThresholdConfig(),
    water: Optional[np.ndarray] = None,
    filtered: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Guided-filter growth of the cloud-shadow mask, then object filtering.

    Growth is limited to land pixels darker in NIR than the land quantile
    ``shadow_nir_quantile``; water is handled by the candidate stage.
    """
    rough_csm = np.asarray(rough_csm, dtype=bool) & scene.valid
    land = scene.valid if water is None else scene.valid & ~water
    if filtered is None:
        filtered = guided_filter(
            nrg_guide(scene), rough_csm.astype(np.float64), cfg.guided_radius, cfg.guided_epsilon, scene.valid
        )
    if land.any():
        nir_cut = np.percentile(scene.b4[land], cfg.shadow_nir_quantile)
        grown = (filtered > cfg.t21) & (scene.b4 < nir_cut) & land
    else:
        grown = np.zeros_like(rough_csm)
    refined = grown | rough_csm
    table = label_components(refined)
    if table.count == 0:
        return refined
    return table.mask_of(~shadow_object_noncloud(table, cfg))


def postprocess_shadow(mask: np.ndarray, cfg: ThresholdConfig = ThresholdConfig()) -> np.ndarray:
    """Fill holes, drop objects under ``shadow_min_pixels``, dilate by one pixel."""
    filled = fill_mask_holes(mask, cfg.hole_neighbors)
    kept = remove_small_objects(filled, cfg.shadow_min_pixels)
    return dilate(kept, 1)
