"""End-to-end cloud / shadow masking, cloud fraction and mask evaluation."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cloud_filter import filter_cloud_objects, postprocess_cloud
from .errors import ConfigError, InputError
from .guided import refine_cloud_mask
from .raster import Label, MaskLayer, Scene, downsample, mask_from_binary, upsample_mask, write_mask
from .shadow import (
    ShadowMatchParams,
    correct_cloud_shadows,
    exclude_water_objects,
    match_cloud_shadows,
    postprocess_shadow,
    refine_and_filter_shadow,
    rough_shadow_mask,
)
from .spectral import SpectralIndices, ThresholdConfig, rough_cloud_mask, water_mask
from .texture import TextureTemplateSet, load_templates, to_gray8

log = logging.getLogger(__name__)

MODES = ("precise", "fast", "fraction-only")
DEFAULT_SUBSAMPLE = {"precise": 2, "fast": 6, "fraction-only": 6}


@dataclass(frozen=True)
class RunConfig:
    mode: str = "precise"
    subsample: Optional[int] = None
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    match: ShadowMatchParams = field(default_factory=ShadowMatchParams)
    template_path: Optional[str] = None
    use_texture: bool = True
    texture_subsample: int = 2
    workers: int = 1
    debug_dir: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.subsample is not None and (int(self.subsample) != self.subsample or self.subsample < 1):
            raise ConfigError(f"subsample must be an integer >= 1, got {self.subsample}")
        if int(self.texture_subsample) != self.texture_subsample or self.texture_subsample < 1:
            raise ConfigError(f"texture_subsample must be an integer >= 1, got {self.texture_subsample}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @property
    def factor(self) -> int:
        return int(self.subsample) if self.subsample is not None else DEFAULT_SUBSAMPLE[self.mode]

    @property
    def detect_shadows(self) -> bool:
        return self.mode == "precise"


@dataclass
class StageMasks:
    """Intermediate masks at processing resolution, in pipeline order."""

    valid: np.ndarray
    masks: dict = field(default_factory=dict)

    def add(self, name: str, mask: np.ndarray) -> np.ndarray:
        self.masks[name] = np.asarray(mask, dtype=bool)
        return mask


def _templates(config: RunConfig, templates) -> Optional[TextureTemplateSet]:
    if not config.use_texture:
        return None
    if templates is not None:
        return templates
    return load_templates(config.template_path)


def texture_gray(scene: Scene, subsample: int) -> np.ndarray:
    """8-bit mean-visible image at the resolution the templates expect."""
    tex = downsample(scene, subsample)
    return to_gray8((tex.b1 + tex.b2 + tex.b3) / 3.0, tex.valid)


def detect(
    scene: Scene,
    config: RunConfig = RunConfig(),
    templates=None,
    gray: Optional[np.ndarray] = None,
    gray_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, StageMasks]:
    """Run the detection stages on an already-resampled scene.

    ``gray``/``gray_scale`` supply the texture image and its pixels per
    ``scene`` pixel; by default texture is read from ``scene`` itself.
    Returns the final cloud mask, the final shadow mask (cloud pixels
    excluded) and all intermediate stage masks.
    """
    cfg = config.thresholds
    stages = StageMasks(scene.valid)
    idx = SpectralIndices(scene)

    rough = stages.add("rough_cloud", rough_cloud_mask(scene, cfg, idx))
    water = stages.add("water", water_mask(scene, cfg, idx))
    refined = stages.add("refined_cloud", refine_cloud_mask(scene, rough, water, cfg, idx))
    tmpl = _templates(config, templates)
    kept = stages.add("filtered_cloud", filter_cloud_objects(refined, scene, tmpl, cfg, config.workers, gray, gray_scale))
    cloud = stages.add("cloud", postprocess_cloud(kept, cfg) & scene.valid)

    shadow = np.zeros_like(cloud)
    if config.detect_shadows:
        if scene.geometry is None:
            raise InputError("missing geometry: precise mode needs sun/view angles in the scene header")
        cand = stages.add("rough_shadow", rough_shadow_mask(scene, water, cfg, idx))
        layer = stages.add("shadow_layer", exclude_water_objects(cand, water, config.match))
        matched = stages.add(
            "matched_shadow",
            match_cloud_shadows(cloud, layer, scene.geometry, scene.pixel_size, config.match, config.workers),
        )
        corrected = stages.add("corrected_shadow", correct_cloud_shadows(matched, layer, config.match))
        filtered = stages.add("filtered_shadow", refine_and_filter_shadow(corrected, scene, cfg, water))
        shadow = stages.add("shadow", postprocess_shadow(filtered, cfg) & scene.valid & ~cloud)
    return cloud, shadow, stages


def merge_masks(cloud: np.ndarray, shadow: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Label raster with cloud over shadow over clear over no-value."""
    out = np.full(valid.shape, Label.CLEAR, dtype=np.uint8)
    out[shadow] = Label.SHADOW
    out[cloud] = Label.CLOUD
    out[~valid] = Label.NO_VALUE
    return out


def run_mfc(scene: Scene, config: RunConfig = RunConfig(), templates=None) -> MaskLayer:
    """Full-resolution cloud / shadow mask for ``scene``."""
    factor = config.factor
    if not scene.valid.any():
        return MaskLayer(np.zeros(scene.shape, dtype=np.uint8))
    work = downsample(scene, factor)
    log.info("processing %dx%d at subsample %d (%s)", work.height, work.width, factor, config.mode)
    gray = None
    if config.use_texture:
        gray = texture_gray(scene, config.texture_subsample)
    cloud, shadow, stages = detect(work, config, templates, gray, factor / config.texture_subsample)
    if config.debug_dir:
        dump_stages(stages, config.debug_dir)
    small = MaskLayer(merge_masks(cloud, shadow, work.valid))
    full = upsample_mask(small, factor, scene.shape).labels.copy()
    # every valid full-res pixel falls in a block with at least one valid pixel
    full[~scene.valid] = Label.NO_VALUE
    return MaskLayer(full)


def dump_stages(stages: StageMasks, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, (name, mask) in enumerate(stages.masks.items()):
        write_mask(MaskLayer(mask_from_binary(mask, stages.valid)), directory / f"{i:02d}_{name}.raw")


# ---------------------------------------------------------------- metrics


def cloud_fraction(mask: MaskLayer) -> float:
    """Cloud pixels over valid (non no-value) pixels."""
    labels = mask.labels
    valid = np.count_nonzero(labels != Label.NO_VALUE)
    if valid == 0:
        raise InputError("cloud fraction undefined: mask has no valid pixels")
    return np.count_nonzero(labels == Label.CLOUD) / valid


@dataclass(frozen=True)
class Confusion:
    """Two-class confusion counts for one target label."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def overall(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else math.nan

    @property
    def producers(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else math.nan

    @property
    def users(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else math.nan

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)


def confusion(pred: np.ndarray, ref: np.ndarray, label: Label, valid: np.ndarray) -> Confusion:
    p = (pred == label)[valid]
    r = (ref == label)[valid]
    return Confusion(
        tp=int(np.count_nonzero(p & r)),
        fp=int(np.count_nonzero(p & ~r)),
        fn=int(np.count_nonzero(~p & r)),
        tn=int(np.count_nonzero(~p & ~r)),
    )


@dataclass(frozen=True)
class SceneEval:
    scene_id: str
    cloud: Confusion
    shadow: Confusion
    fraction_ref: float
    fraction_pred: float


def evaluate(pred: MaskLayer, ref: MaskLayer, scene_id: str = "") -> SceneEval:
    """Per-pixel cloud and shadow agreement; no-value pixels in either mask are skipped."""
    if pred.shape != ref.shape:
        raise InputError(f"dimension mismatch: pred {pred.shape} vs ref {ref.shape}")
    valid = (pred.labels != Label.NO_VALUE) & (ref.labels != Label.NO_VALUE)
    if not valid.any():
        raise InputError(f"{scene_id or 'scene'}: no pixels valid in both masks")
    p, r = pred.labels, ref.labels
    fr = np.count_nonzero(r[valid] == Label.CLOUD) / np.count_nonzero(valid)
    fp = np.count_nonzero(p[valid] == Label.CLOUD) / np.count_nonzero(valid)
    return SceneEval(
        scene_id=scene_id,
        cloud=confusion(p, r, Label.CLOUD, valid),
        shadow=confusion(p, r, Label.SHADOW, valid),
        fraction_ref=fr,
        fraction_pred=fp,
    )


def fraction_errors(ref: Sequence[float], pred: Sequence[float]) -> tuple[float, float, int]:
    """Mean absolute and mean relative cloud-fraction error.

    Scenes whose reference fraction is 0 are left out of the relative error;
    their count is returned third.
    """
    ref = np.asarray(ref, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if ref.shape != pred.shape or ref.size == 0:
        raise InputError("fraction lists must be non-empty and equally long")
    err = np.abs(ref - pred)
    mae = float(err.mean())
    nz = ref > 0
    mre = float(np.mean(err[nz] / ref[nz])) if nz.any() else math.nan
    return mae, mre, int(np.count_nonzero(~nz))


@dataclass
class EvalReport:
    scenes: list = field(default_factory=list)

    def add(self, entry: SceneEval) -> None:
        self.scenes.append(entry)

    def mean_accuracy(self, target: str) -> tuple[float, float, float]:
        """Scene-averaged (OA, PA, UA); undefined per-scene values are skipped."""
        rows = [getattr(s, target) for s in self.scenes]
        out = []
        for k in ("overall", "producers", "users"):
            vals = [v for v in (getattr(c, k) for c in rows) if not math.isnan(v)]
            out.append(float(np.mean(vals)) if vals else math.nan)
        return tuple(out)

    def pooled(self, target: str) -> Confusion:
        total = Confusion(0, 0, 0, 0)
        for s in self.scenes:
            total = total + getattr(s, target)
        return total

    def fraction_errors(self) -> tuple[float, float, int]:
        return fraction_errors([s.fraction_ref for s in self.scenes], [s.fraction_pred for s in self.scenes])

    COLUMNS = (
        "scene", "cloud_oa", "cloud_pa", "cloud_ua", "shadow_oa", "shadow_pa", "shadow_ua",
        "frac_ref", "frac_pred", "cloud_tp", "cloud_fp", "cloud_fn", "cloud_tn",
        "shadow_tp", "shadow_fp", "shadow_fn", "shadow_tn",
    )

    def to_tsv(self) -> str:
        def f(v):
            return "nan" if isinstance(v, float) and math.isnan(v) else f"{v:.6f}"

        lines = ["\t".join(self.COLUMNS)]
        for s in self.scenes:
            c, h = s.cloud, s.shadow
            lines.append("\t".join([
                s.scene_id,
                f(c.overall), f(c.producers), f(c.users),
                f(h.overall), f(h.producers), f(h.users),
                f(s.fraction_ref), f(s.fraction_pred),
                *(str(v) for v in (c.tp, c.fp, c.fn, c.tn, h.tp, h.fp, h.fn, h.tn)),
            ]))
        if self.scenes:
            co, cp, cu = self.mean_accuracy("cloud")
            so, sp, su = self.mean_accuracy("shadow")
            c, h = self.pooled("cloud"), self.pooled("shadow")
            mae, mre, skipped = self.fraction_errors()
            lines.append("\t".join([
                "MEAN", f(co), f(cp), f(cu), f(so), f(sp), f(su),
                f(float(np.mean([s.fraction_ref for s in self.scenes]))),
                f(float(np.mean([s.fraction_pred for s in self.scenes]))),
                *(str(v) for v in (c.tp, c.fp, c.fn, c.tn, h.tp, h.fp, h.fn, h.tn)),
            ]))
            lines.append("\t".join([
                "POOLED", f(c.overall), f(c.producers), f(c.users),
                f(h.overall), f(h.producers), f(h.users), "", "",
                *(str(v) for v in (c.tp, c.fp, c.fn, c.tn, h.tp, h.fp, h.fn, h.tn)),
            ]))
            lines.append(f"# MAE\t{f(mae)}\tMRE\t{f(mre)}\tMRE_excluded_zero_ref\t{skipped}")
        return "\n".join(lines) + "\n"
