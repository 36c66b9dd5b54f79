"""Per-pixel spectral indices, the rough cloud mask and the water mask."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from functools import cached_property

import numpy as np

from .errors import ConfigError
from .raster import Scene


@dataclass(frozen=True)
class ThresholdConfig:
    """Detection thresholds t1..t26 plus the guided-filter constants.

    Defaults are the recommended fixed settings; they are meant to be used
    without per-scene tuning.
    """

    # rough cloud mask: HOT, VBR, red reflectance
    t1: float = 0.13
    t2: float = 0.7
    t3: float = 0.07
    # water: (NDVI, NIR) clear-water and turbid-water clauses
    t4: float = 0.15
    t5: float = 0.2
    t6: float = 0.2
    t7: float = 0.15
    # guided refinement: segment level, HOT on land
    t8: float = 0.12
    t9: float = 0.08
    # cloud object filter: area exemption, FRAC, LWR, small-area LWR
    t10: float = 4e4
    t11: float = 1.56
    t12: float = 6.3
    t13: float = 4e3
    t14: float = 5.4
    # texture decision
    t15: float = 0.02
    t16: float = 0.10
    t17: float = 0.02
    t18: float = 0.03
    # shadow candidates (land, water) and shadow refinement
    t19: float = 0.06
    t20: float = 0.01
    t21: float = 0.27
    # shadow object filter: FRAC, area, LWR, small area, small-area LWR
    t22: float = 1.56
    t23: float = 4e4
    t24: float = 6.3
    t25: float = 400.0
    t26: float = 5.4
    guided_radius: int = 60
    guided_epsilon: float = 1e-6
    # postprocessing and texture-window constants
    hole_neighbors: int = 5
    cloud_min_pixels: int = 5
    shadow_min_pixels: int = 7
    texture_min_window: int = 32
    shadow_nir_quantile: float = 17.5

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ConfigError(f"{f.name} must be finite, got {v}")
        if not 0 < self.t2 <= 1:
            raise ConfigError(f"t2 must lie in (0, 1], got {self.t2}")
        if self.guided_radius < 1 or int(self.guided_radius) != self.guided_radius:
            raise ConfigError(f"guided_radius must be an integer >= 1, got {self.guided_radius}")
        if not self.guided_epsilon > 0:
            raise ConfigError(f"guided_epsilon must be > 0, got {self.guided_epsilon}")
        if not 0 <= self.shadow_nir_quantile <= 100:
            raise ConfigError("shadow_nir_quantile must lie in [0, 100]")
        for name in ("cloud_min_pixels", "shadow_min_pixels", "texture_min_window"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def segment(self) -> float:
        return self.t8

    @property
    def hot_refine(self) -> float:
        return self.t9


def hot(scene: Scene) -> np.ndarray:
    """Haze optimized transform ``B1 - 0.5 * B3``; NaN at invalid pixels."""
    return np.where(scene.valid, scene.b1 - 0.5 * scene.b3, np.nan)


def vbr(scene: Scene) -> np.ndarray:
    """Visible band ratio min/max over B1..B3; 0 where the max is not positive."""
    vis = scene.bands[:3]
    hi = vis.max(axis=0)
    lo = vis.min(axis=0)
    out = np.divide(lo, hi, out=np.zeros_like(hi), where=hi > 0)
    return np.where(scene.valid, out, np.nan)


def ndvi(scene: Scene) -> np.ndarray:
    """``(B4 - B3) / (B4 + B3)``; 0 where the denominator vanishes."""
    num = scene.b4 - scene.b3
    den = scene.b4 + scene.b3
    out = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
    return np.where(scene.valid, out, np.nan)


def mean_visible(scene: Scene) -> np.ndarray:
    return np.where(scene.valid, (scene.b1 + scene.b2 + scene.b3) / 3.0, np.nan)


def rough_cloud_mask(scene: Scene, cfg: ThresholdConfig = ThresholdConfig(), indices=None) -> np.ndarray:
    idx = indices or SpectralIndices(scene)
    with np.errstate(invalid="ignore"):
        return (idx.hot > cfg.t1) & (idx.vbr > cfg.t2) & (scene.b3 > cfg.t3) & scene.valid


def water_mask(scene: Scene, cfg: ThresholdConfig = ThresholdConfig(), indices=None) -> np.ndarray:
    idx = indices or SpectralIndices(scene)
    nd, nir = idx.ndvi, scene.b4
    with np.errstate(invalid="ignore"):
        clear = (nd < cfg.t4) & (nir < cfg.t5)
        turbid = (nd < cfg.t6) & (nir < cfg.t7)
    return (clear | turbid) & scene.valid


class SpectralIndices:
    """Per-scene cache so each index is computed once per pipeline run."""

    def __init__(self, scene: Scene):
        self.scene = scene

    @cached_property
    def hot(self) -> np.ndarray:
        return hot(self.scene)

    @cached_property
    def vbr(self) -> np.ndarray:
        return vbr(self.scene)

    @cached_property
    def ndvi(self) -> np.ndarray:
        return ndvi(self.scene)

    @cached_property
    def mean_visible(self) -> np.ndarray:
        return mean_visible(self.scene)
