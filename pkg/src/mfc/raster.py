"""Scene and mask data model, file I/O, and resolution changes.

Scenes are stored as a band-sequential binary file plus a UTF-8 ``key = value``
sidecar header.  Masks are single-channel 8-bit rasters; the raw form is a
byte file with a small sidecar header, and ``.png``/``.tif`` masks are read
and written through Pillow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError

N_BANDS = 4


class Label(IntEnum):
    """Mask label codes, identical to the serialized byte values."""

    NO_VALUE = 0
    CLEAR = 1
    SHADOW = 128
    CLOUD = 255


@dataclass(frozen=True)
class ViewSunGeometry:
    """Solar and sensor angles in degrees; azimuths clockwise from north."""

    sun_zenith: float
    sun_azimuth: float
    view_zenith: float = 0.0
    view_azimuth: float = 0.0

    def __post_init__(self):
        for name in ("sun_zenith", "view_zenith"):
            v = getattr(self, name)
            if not (0.0 <= v < 90.0):
                raise InputError(f"{name} must be in [0, 90), got {v}")
        for name in ("sun_azimuth", "view_azimuth"):
            v = getattr(self, name)
            if not (0.0 <= v < 360.0):
                raise InputError(f"{name} must be in [0, 360), got {v}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Scene:
    """Four co-registered TOA reflectance bands (blue, green, red, NIR).

    ``bands`` has shape ``(4, height, width)``.  Values at invalid pixels are
    zeroed on construction so that no stage can pick up no-data garbage.
    """

    bands: np.ndarray
    valid: np.ndarray
    pixel_size: float = 16.0
    geometry: Optional[ViewSunGeometry] = None

    def __post_init__(self):
        bands = np.asarray(self.bands, dtype=np.float64)
        if bands.ndim != 3 or bands.shape[0] != N_BANDS:
            raise InputError(f"band-count: expected {N_BANDS} bands, got shape {bands.shape}")
        valid = np.asarray(self.valid, dtype=bool)
        if valid.shape != bands.shape[1:]:
            raise InputError(
                f"dimension mismatch: valid {valid.shape} vs bands {bands.shape[1:]}"
            )
        valid = valid & np.all(np.isfinite(bands), axis=0)
        bands = np.where(valid[None], bands, 0.0)
        if not self.pixel_size > 0:
            raise InputError(f"pixel_size must be positive, got {self.pixel_size}")
        object.__setattr__(self, "bands", _frozen(bands))
        object.__setattr__(self, "valid", _frozen(valid))

    @classmethod
    def from_bands(cls, b1, b2, b3, b4, valid=None, **kw) -> "Scene":
        bands = np.stack([np.asarray(b, dtype=np.float64) for b in (b1, b2, b3, b4)])
        if valid is None:
            valid = np.ones(bands.shape[1:], dtype=bool)
        return cls(bands, valid, **kw)

    @property
    def shape(self) -> tuple[int, int]:
        return self.bands.shape[1], self.bands.shape[2]

    @property
    def height(self) -> int:
        return self.bands.shape[1]

    @property
    def width(self) -> int:
        return self.bands.shape[2]

    @property
    def b1(self) -> np.ndarray:
        return self.bands[0]

    @property
    def b2(self) -> np.ndarray:
        return self.bands[1]

    @property
    def b3(self) -> np.ndarray:
        return self.bands[2]

    @property
    def b4(self) -> np.ndarray:
        return self.bands[3]


@dataclass(frozen=True, eq=False)
class MaskLayer:
    """Label raster holding :class:`Label` codes as ``uint8``."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise InputError(f"mask must be 2-D, got shape {labels.shape}")
        codes = np.array([int(v) for v in Label], dtype=np.uint8)
        if not np.isin(labels, codes).all():
            bad = np.unique(labels[~np.isin(labels, codes)])
            raise InputError(f"mask contains non-label values {bad[:8].tolist()}")
        object.__setattr__(self, "labels", _frozen(labels.astype(np.uint8)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def __eq__(self, other):
        if not isinstance(other, MaskLayer):
            return NotImplemented
        return self.labels.shape == other.labels.shape and bool(
            np.array_equal(self.labels, other.labels)
        )

    def count(self, label: Label) -> int:
        return int(np.count_nonzero(self.labels == label))


# ---------------------------------------------------------------- headers


def read_header(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


def write_header(path: Path, items: dict) -> None:
    lines = [f"{k} = {v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _floats(text: str, n: int, key: str) -> list[float]:
    parts = text.replace(",", " ").split()
    if len(parts) == 1:
        parts = parts * n
    if len(parts) != n:
        raise InputError(f"header key {key!r}: expected {n} values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise InputError(f"header key {key!r}: {exc}") from None


def _header_path(path: Path) -> Path:
    path = Path(path)
    if path.suffix == ".hdr":
        return path
    candidate = path.with_suffix(".hdr")
    if candidate.exists():
        return candidate
    return Path(str(path) + ".hdr")


# ---------------------------------------------------------------- scenes


def load_scene(
    path,
    calibration: Optional[Sequence[tuple[float, float]]] = None,
) -> Scene:
    """Read a band-sequential scene from its header (or data file) path.

    ``calibration`` is a per-band sequence of ``(gain, offset)`` pairs that
    overrides the header's ``gain``/``offset`` keys.  Pixels equal to the
    header's ``nodata`` sentinel in any band (compared on raw DN) are invalid.
    """
    hdr_path = _header_path(Path(path))
    if not hdr_path.exists():
        raise InputError(f"scene header not found: {hdr_path}")
    hdr = read_header(hdr_path)
    try:
        width = int(hdr["width"])
        height = int(hdr["height"])
        n_bands = int(hdr.get("bands", N_BANDS))
    except KeyError as exc:
        raise InputError(f"{hdr_path}: missing header key {exc}") from None
    except ValueError as exc:
        raise InputError(f"{hdr_path}: {exc}") from None
    if n_bands != N_BANDS:
        raise InputError(f"band-count: expected {N_BANDS} bands, header says {n_bands}")
    if width <= 0 or height <= 0:
        raise InputError(f"{hdr_path}: non-positive dimensions {width}x{height}")

    dtype = np.dtype(hdr.get("dtype", "float32"))
    order = hdr.get("byte_order", "little").lower()
    dtype = dtype.newbyteorder("<" if order.startswith("l") else ">")
    data_path = hdr_path.parent / hdr.get("data_file", hdr_path.with_suffix(".bin").name)
    if not data_path.exists():
        raise InputError(f"scene data file not found: {data_path}")
    raw = np.fromfile(data_path, dtype=dtype)
    expected = N_BANDS * width * height
    if raw.size != expected:
        raise InputError(
            f"dimension mismatch: {data_path} holds {raw.size} samples, "
            f"header implies {expected}"
        )
    dn = raw.reshape(N_BANDS, height, width).astype(np.float64)

    valid = np.all(np.isfinite(dn), axis=0)
    if "nodata" in hdr and hdr["nodata"].lower() not in ("", "none"):
        nodata = float(hdr["nodata"])
        valid &= ~np.any(dn == nodata, axis=0)

    if calibration is None:
        gains = _floats(hdr.get("gain", "1"), N_BANDS, "gain")
        offsets = _floats(hdr.get("offset", "0"), N_BANDS, "offset")
    else:
        if len(calibration) != N_BANDS:
            raise InputError(f"calibration needs {N_BANDS} (gain, offset) pairs")
        gains = [float(g) for g, _ in calibration]
        offsets = [float(o) for _, o in calibration]
    refl = dn * np.asarray(gains)[:, None, None] + np.asarray(offsets)[:, None, None]

    geometry = None
    angle_keys = ("sun_zenith", "sun_azimuth", "view_zenith", "view_azimuth")
    if all(k in hdr for k in angle_keys[:2]):
        try:
            geometry = ViewSunGeometry(
                *(float(hdr.get(k, 0.0)) for k in angle_keys)
            )
        except ValueError as exc:
            raise InputError(f"{hdr_path}: {exc}") from None
    pixel_size = float(hdr.get("pixel_size", 16.0))
    return Scene(refl, valid, pixel_size=pixel_size, geometry=geometry)


def write_scene(scene: Scene, path, dtype: str = "float32", nodata: float = -9999.0) -> Path:
    """Write ``scene`` as ``<stem>.bin`` + ``<stem>.hdr``; returns the header path."""
    path = Path(path)
    hdr_path = path.with_suffix(".hdr")
    data_path = path.with_suffix(".bin")
    data = np.where(scene.valid[None], scene.bands, nodata).astype(np.dtype(dtype).newbyteorder("<"))
    data.tofile(data_path)
    items = {
        "width": scene.width,
        "height": scene.height,
        "bands": N_BANDS,
        "dtype": np.dtype(dtype).name,
        "byte_order": "little",
        "interleave": "bsq",
        "band_order": "blue green red nir",
        "data_file": data_path.name,
        "nodata": repr(float(nodata)),
        "gain": "1 1 1 1",
        "offset": "0 0 0 0",
        "pixel_size": repr(float(scene.pixel_size)),
    }
    g = scene.geometry
    if g is not None:
        items.update(
            sun_zenith=repr(g.sun_zenith),
            sun_azimuth=repr(g.sun_azimuth),
            view_zenith=repr(g.view_zenith),
            view_azimuth=repr(g.view_azimuth),
        )
    write_header(hdr_path, items)
    return hdr_path


# ---------------------------------------------------------------- masks

_IMAGE_SUFFIXES = {".png", ".tif", ".tiff"}


def write_mask(mask: MaskLayer, path) -> None:
    path = Path(path)
    if path.suffix.lower() in _IMAGE_SUFFIXES:
        from PIL import Image

        Image.fromarray(mask.labels, mode="L").save(path)
        return
    path.write_bytes(mask.labels.tobytes(order="C"))
    h, w = mask.shape
    write_header(Path(str(path) + ".hdr"), {"width": w, "height": h, "dtype": "uint8", "bands": 1})


def read_mask(path) -> MaskLayer:
    path = Path(path)
    if not path.exists():
        raise InputError(f"mask not found: {path}")
    if path.suffix.lower() in _IMAGE_SUFFIXES:
        from PIL import Image

        with Image.open(path) as im:
            arr = np.asarray(im)
        if arr.ndim != 2:
            raise InputError(f"{path}: mask must be single-channel, got shape {arr.shape}")
        return MaskLayer(arr.astype(np.uint8))
    hdr = read_header(Path(str(path) + ".hdr"))
    w, h = int(hdr["width"]), int(hdr["height"])
    data = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    if data.size != w * h:
        raise InputError(f"{path}: {data.size} bytes, header implies {w * h}")
    return MaskLayer(data.reshape(h, w))


def mask_from_binary(binary: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Encode a boolean stage mask as 255/1/0 bytes (set / clear / no-value)."""
    out = np.where(binary, np.uint8(Label.CLOUD), np.uint8(Label.CLEAR)).astype(np.uint8)
    out[~valid] = Label.NO_VALUE
    return out


# ---------------------------------------------------------------- resampling


def downsample(scene: Scene, factor: int) -> Scene:
    """Block-average valid reflectance over ``factor`` x ``factor`` blocks.

    Partial blocks at the right/bottom edges average whatever valid pixels
    they hold; a block is invalid only when none of its pixels are valid.
    """
    if int(factor) != factor or factor < 1:
        raise InputError(f"downsample factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return scene
    h, w = scene.shape
    hh, ww = math.ceil(h / factor), math.ceil(w / factor)
    pad = ((0, hh * factor - h), (0, ww * factor - w))
    v = np.pad(scene.valid, pad).astype(np.float64)
    counts = v.reshape(hh, factor, ww, factor).sum(axis=(1, 3))
    ok = counts > 0
    out = np.empty((4, hh, ww))
    for i in range(4):
        b = np.pad(scene.bands[i], pad).reshape(hh, factor, ww, factor)
        vb = v.reshape(hh, factor, ww, factor) > 0
        # averaging offsets from the block minimum keeps constant blocks exact
        ref = np.where(vb, b, np.inf).min(axis=(1, 3))
        ref = np.where(ok, ref, 0.0)
        dev = np.where(vb, b - ref[:, None, :, None], 0.0).sum(axis=(1, 3))
        out[i] = ref + np.divide(dev, counts, out=np.zeros_like(dev), where=ok)
    return Scene(
        out,
        ok,
        pixel_size=scene.pixel_size * factor,
        geometry=scene.geometry,
    )


def upsample_mask(mask: MaskLayer, factor: int, target_dims: tuple[int, int]) -> MaskLayer:
    """Nearest-neighbour label replication cropped to ``target_dims``."""
    if int(factor) != factor or factor < 1:
        raise InputError(f"upsample factor must be a positive integer, got {factor}")
    factor = int(factor)
    h, w = mask.shape
    th, tw = target_dims
    for t, d in ((th, h), (tw, w)):
        if not (factor * (d - 1) < t <= factor * d):
            raise InputError(
                f"dimension mismatch: target {target_dims} incompatible with "
                f"{mask.shape} at factor {factor}"
            )
    if factor == 1:
        return mask
    rows = np.arange(th) // factor
    cols = np.arange(tw) // factor
    return MaskLayer(mask.labels[np.ix_(rows, cols)])
