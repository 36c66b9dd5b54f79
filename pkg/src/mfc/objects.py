"""Connected components, per-object shape features and morphology.

All object work uses 8-connectivity.  Shape features follow the landscape
metric conventions: perimeter is the count of exposed pixel edges and the
fractal dimension index is ``2 ln(perimeter / 4) / ln(area)``.  Ellipse axes
come from the normalized second central moments with the 1/12 term of a
unit pixel, so a filled ``a x b`` rectangle has axis ratio exactly ``a / b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage
from skimage.morphology import reconstruction

EIGHT = np.ones((3, 3), dtype=bool)


def exposed_edges(labels: np.ndarray) -> np.ndarray:
    """Per-pixel count of 4-neighbours lying outside the pixel's own object."""
    padded = np.pad(labels, 1)
    core = padded[1:-1, 1:-1]
    count = np.zeros(labels.shape, dtype=np.int64)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nb = padded[1 + dy : padded.shape[0] - 1 + dy, 1 + dx : padded.shape[1] - 1 + dx]
        count += nb != core
    return np.where(labels > 0, count, 0)


def frac_index(perimeter, area):
    """Fractal dimension index; 1 for single pixels.

    Written as ``ln(p/4) / ln(sqrt(area))`` so that n x n squares give exactly 1.
    """
    perimeter = np.asarray(perimeter, dtype=np.float64)
    area = np.asarray(area, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(0.25 * perimeter) / np.log(np.sqrt(area))
    return np.where(area > 1, out, 1.0)


def ellipse_axes(mu_rr, mu_cc, mu_rc):
    """Major/minor axis lengths of the equal-second-moments ellipse.

    Inputs are central moments normalized by area, without the pixel term.
    The minor axis is floored at one pixel.
    """
    a = np.asarray(mu_rr) + 1.0 / 12.0
    c = np.asarray(mu_cc) + 1.0 / 12.0
    b = np.asarray(mu_rc)
    common = np.sqrt((a - c) ** 2 + 4.0 * b * b)
    lam_hi = 0.5 * (a + c + common)
    lam_lo = np.maximum(0.5 * (a + c - common), 0.0)
    major = 4.0 * np.sqrt(lam_hi)
    minor = np.maximum(4.0 * np.sqrt(lam_lo), 1.0)
    return major, minor


@dataclass(frozen=True, eq=False)
class ObjectTable:
    """8-connected objects of a binary mask with their shape features.

    Arrays are indexed by ``object_id - 1``; ``labels`` holds ids with 0 for
    background.
    """

    labels: np.ndarray
    area: np.ndarray
    perimeter: np.ndarray
    frac: np.ndarray
    lwr: np.ndarray
    length: np.ndarray
    width: np.ndarray
    bboxes: list = field(repr=False)
    _order: np.ndarray = field(repr=False)
    _starts: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return len(self.area)

    def __len__(self) -> int:
        return self.count

    def pixels(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Row and column indices of object ``i`` (0-based)."""
        flat = self._order[self._starts[i] : self._starts[i + 1]]
        return np.divmod(flat, self.labels.shape[1])

    def mask_of(self, keep: np.ndarray) -> np.ndarray:
        """Binary mask of the objects whose entry in ``keep`` is true."""
        lut = np.concatenate([[False], np.asarray(keep, dtype=bool)])
        return lut[self.labels]


def label_components(mask: np.ndarray) -> ObjectTable:
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=EIGHT)
    return table_from_labels(labels, n)


def table_from_labels(labels: np.ndarray, n: int) -> ObjectTable:
    flat = labels.ravel()
    area = np.bincount(flat, minlength=n + 1)[1:].astype(np.int64)
    perim = np.bincount(flat, weights=exposed_edges(labels).ravel(), minlength=n + 1)[1:]

    rows, cols = np.indices(labels.shape)
    r = rows.ravel().astype(np.float64)
    c = cols.ravel().astype(np.float64)
    safe = np.maximum(area, 1).astype(np.float64)

    def mean_of(x):
        return np.bincount(flat, weights=x, minlength=n + 1)[1:] / safe

    mr, mc = mean_of(r), mean_of(c)
    mrr = mean_of(r * r) - mr * mr
    mcc = mean_of(c * c) - mc * mc
    mrc = mean_of(r * c) - mr * mc
    # mean-of-squares cancellation can leave tiny negatives for thin objects
    mrr, mcc = np.maximum(mrr, 0.0), np.maximum(mcc, 0.0)
    major, minor = ellipse_axes(mrr, mcc, mrc)

    order = np.argsort(flat, kind="stable")
    starts = np.concatenate([[0], np.cumsum(np.bincount(flat, minlength=n + 1))])[1:]
    return ObjectTable(
        labels=labels,
        area=area,
        perimeter=perim.astype(np.int64),
        frac=frac_index(perim, area),
        lwr=major / minor,
        length=major,
        width=minor,
        bboxes=ndimage.find_objects(labels, max_label=n),
        _order=order,
        _starts=starts,
    )


def frac(obj: np.ndarray) -> float:
    """Fractal dimension index of a single-object binary mask."""
    obj = np.asarray(obj, dtype=bool)
    perimeter = exposed_edges(obj.astype(np.int32)).sum()
    return float(frac_index(perimeter, obj.sum()))


def lwr(obj: np.ndarray) -> float:
    """Length-to-width ratio of a single-object binary mask."""
    rr, cc = np.nonzero(np.asarray(obj, dtype=bool))
    if rr.size == 0:
        raise ValueError("empty object")
    rr = rr - rr.mean()
    cc = cc - cc.mean()
    major, minor = ellipse_axes(np.mean(rr * rr), np.mean(cc * cc), np.mean(rr * cc))
    return float(major / minor)


def fill_hole(image: np.ndarray, outlet: Optional[np.ndarray] = None) -> np.ndarray:
    """Fill regional minima not connected to the border.

    Morphological reconstruction by erosion from a marker equal to the image
    maximum except on the border.  ``outlet`` marks extra pixels (e.g. no-data)
    that behave like the border.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.size == 0:
        return image.copy()
    seed = np.full_like(image, image.max())
    seed[0, :], seed[-1, :] = image[0, :], image[-1, :]
    seed[:, 0], seed[:, -1] = image[:, 0], image[:, -1]
    if outlet is not None:
        seed[outlet] = image[outlet]
    return reconstruction(seed, image, method="erosion", footprint=EIGHT)


def neighbor_count(mask: np.ndarray) -> np.ndarray:
    """Number of set 8-neighbours per pixel; outside the image counts as unset."""
    k = EIGHT.astype(np.int32)
    k[1, 1] = 0
    return ndimage.convolve(np.asarray(mask, dtype=np.int32), k, mode="constant", cval=0)


def fill_mask_holes(mask: np.ndarray, min_neighbors: int = 5) -> np.ndarray:
    """One sweep: unset pixels with at least ``min_neighbors`` set neighbours become set."""
    mask = np.asarray(mask, dtype=bool)
    return mask | (neighbor_count(mask) >= min_neighbors)


def remove_small_objects(mask: np.ndarray, min_pixels: int) -> np.ndarray:
    """Clear 8-connected objects with fewer than ``min_pixels`` pixels."""
    if min_pixels < 1:
        raise ValueError(f"min_pixels must be >= 1, got {min_pixels}")
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=EIGHT)
    if n == 0:
        return mask.copy()
    area = np.bincount(labels.ravel(), minlength=n + 1)
    keep = area >= min_pixels
    keep[0] = False
    return keep[labels]


def dilate(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Dilation by the 8-neighbourhood, ``radius`` times."""
    mask = np.asarray(mask, dtype=bool)
    if radius < 1:
        return mask.copy()
    return ndimage.binary_dilation(mask, structure=EIGHT, iterations=radius)
