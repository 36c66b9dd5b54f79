"""Cloud and cloud-shadow masking for blue/green/red/NIR optical imagery."""
from .errors import ConfigError, InputError
from .pipeline import EvalReport, RunConfig, cloud_fraction, evaluate, run_mfc
from .raster import Label, MaskLayer, Scene, ViewSunGeometry, load_scene, read_mask, write_mask
from .shadow import ShadowMatchParams
from .spectral import ThresholdConfig

__all__ = [
    "ConfigError",
    "EvalReport",
    "InputError",
    "Label",
    "MaskLayer",
    "RunConfig",
    "Scene",
    "ShadowMatchParams",
    "ThresholdConfig",
    "ViewSunGeometry",
    "cloud_fraction",
    "evaluate",
    "load_scene",
    "read_mask",
    "run_mfc",
    "write_mask",
]
