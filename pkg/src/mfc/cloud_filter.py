"""Removal of non-cloud bright objects and cloud-mask postprocessing."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from .objects import ObjectTable, fill_mask_holes, label_components, remove_small_objects
from .spectral import ThresholdConfig
from .texture import TextureTemplateSet, classify_object_texture, to_gray8
from .raster import Scene


def geometric_noncloud(table: ObjectTable, cfg: ThresholdConfig = ThresholdConfig()) -> np.ndarray:
    """Per-object flag for shapes too elongated or convoluted to be cloud.

    Objects larger than ``t10`` are exempt.
    """
    small = table.area < cfg.t13
    odd = (table.frac > cfg.t11) | (table.lwr > cfg.t12) | (small & (table.lwr > cfg.t14))
    return odd & ~(table.area > cfg.t10)


def filter_cloud_objects(
    refined: np.ndarray,
    scene: Scene,
    templates: Optional[TextureTemplateSet],
    cfg: ThresholdConfig = ThresholdConfig(),
    workers: int = 1,
    gray: Optional[np.ndarray] = None,
    scale: float = 1.0,
) -> np.ndarray:
    """Drop whole objects judged non-cloud by geometry, then by texture.

    ``gray`` is the 8-bit texture image (derived from ``scene`` when omitted)
    and ``scale`` its pixels per mask pixel.  ``templates=None`` skips the
    texture stage.
    """
    table = label_components(refined)
    if table.count == 0:
        return np.zeros_like(refined, dtype=bool)
    exempt = table.area > cfg.t10
    remove = geometric_noncloud(table, cfg)

    if templates is not None:
        pending = np.flatnonzero(~remove & ~exempt)
        if pending.size:
            if gray is None:
                gray = to_gray8((scene.b1 + scene.b2 + scene.b3) / 3.0, scene.valid)
                scale = 1.0

            def verdict(i):
                return classify_object_texture(gray, table.bboxes[i], templates, cfg, scale)

            if workers > 1:
                with ThreadPoolExecutor(workers) as pool:
                    verdicts = list(pool.map(verdict, pending))
            else:
                verdicts = [verdict(i) for i in pending]
            remove[pending] = np.array([v == "noncloud" for v in verdicts])
    return table.mask_of(~remove)


def postprocess_cloud(mask: np.ndarray, cfg: ThresholdConfig = ThresholdConfig()) -> np.ndarray:
    """Fill single-sweep holes, then drop objects under ``cloud_min_pixels``."""
    filled = fill_mask_holes(mask, cfg.hole_neighbors)
    return remove_small_objects(filled, cfg.cloud_min_pixels)
