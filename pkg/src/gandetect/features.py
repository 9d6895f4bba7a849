"""Handcrafted detector features: co-occurrences and saturation statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .degrade import rgb_to_ycbcr
from .imagecore import ImageBuffer, InvalidInputError, round_half_away
from .residual import highpass_residual

RESIDUAL_T = 2
RESIDUAL_Q = 2.0
RGB_BINS = 8

FEATURE_LENGTHS = {"cooc-residual": 300, "cooc-rgb": 384, "saturation": 15}


@dataclass(frozen=True, eq=False)
class CooccurrenceMatrix:
    counts: np.ndarray
    offset: tuple[int, int]
    normalized: bool = False

    @property
    def bins(self) -> int:
        return self.counts.shape[0]

    def normalize(self) -> CooccurrenceMatrix:
        total = self.counts.sum()
        values = self.counts / total if total > 0 else np.zeros(self.counts.shape)
        return CooccurrenceMatrix(values, self.offset, True)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    extractor: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)):
            raise InvalidInputError(f"{self.extractor}: non-finite feature values")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def quantize(plane: np.ndarray, levels: int, low: float, high: float) -> np.ndarray:
    """Uniform bins over [low, high]; the top edge falls into the last bin."""
    if levels < 2:
        raise InvalidInputError("need at least 2 quantizer levels")
    if not low < high:
        raise InvalidInputError(f"degenerate quantizer range [{low}, {high}]")
    v = np.clip(np.asarray(plane, dtype=np.float64), low, high)
    idx = np.floor(levels * (v - low) / (high - low)).astype(np.int64)
    return np.minimum(idx, levels - 1)


def cooccurrence(plane, offset, quantizer, other=None) -> CooccurrenceMatrix:
    """Counts of (bin(p), bin(p + offset)) over pairs inside the raster.

    ``offset`` is (dx, dy). With ``other`` the second value of each pair is
    taken from that plane instead (cross-band co-occurrence).
    """
    plane = np.asarray(plane, dtype=np.float64)
    dx, dy = offset
    h, w = plane.shape
    if abs(dx) >= w or abs(dy) >= h:
        raise InvalidInputError(f"offset {offset} does not fit a {w}x{h} plane")
    levels, low, high = quantizer
    a = quantize(plane, levels, low, high)
    b = a if other is None else quantize(other, levels, low, high)
    if b.shape != a.shape:
        raise InvalidInputError("cross-band planes must share one size")
    return CooccurrenceMatrix(kernels.cooc_counts(a, b, int(dx), int(dy), int(levels)), (dx, dy))


def _need_color(img: ImageBuffer, name: str) -> None:
    if img.channels != 3:
        raise InvalidInputError(f"{name} needs a 3-channel image")


def residual_cooc_features(img: ImageBuffer) -> FeatureVector:
    """Y, Cb, Cr x {horizontal, vertical} residual x {(1,0), (0,1)} offsets, 5x5 each."""
    _need_color(img, "residual co-occurrence")
    ycc = rgb_to_ycbcr(img.data)
    T = RESIDUAL_T
    quant = (2 * T + 1, -T - 0.5, T + 0.5)
    parts = []
    for c in range(3):
        for direction in ("horizontal", "vertical"):
            r = highpass_residual(ycc[..., c], direction)
            q = np.clip(round_half_away(r / RESIDUAL_Q), -T, T)
            for off in ((1, 0), (0, 1)):
                parts.append(cooccurrence(q, off, quant).normalize().counts.ravel())
    return FeatureVector("cooc-residual", np.concatenate(parts))


def rgb_cross_cooc_features(img: ImageBuffer) -> FeatureVector:
    """Within-band (1,0) co-occurrences of R, G, B then (0,0) cross pairs RG, GB, RB."""
    _need_color(img, "RGB co-occurrence")
    quant = (RGB_BINS, 0.0, 255.0)
    d = img.data
    parts = [cooccurrence(d[..., c], (1, 0), quant) for c in range(3)]
    for a, b in ((0, 1), (1, 2), (0, 2)):
        parts.append(cooccurrence(d[..., a], (0, 0), quant, other=d[..., b]))
    return FeatureVector("cooc-rgb", np.concatenate([m.normalize().counts.ravel() for m in parts]))


def saturation_features(img: ImageBuffer) -> FeatureVector:
    """Per channel: fraction >= 250, fraction <= 5, min, max, p90 - p10 (all over 255)."""
    _need_color(img, "saturation features")
    out = []
    for c in range(3):
        v = img.data[..., c].ravel()
        p10, p90 = np.percentile(v, [10, 90])
        out += [np.mean(v >= 250), np.mean(v <= 5), v.min() / 255, v.max() / 255, (p90 - p10) / 255]
    return FeatureVector("saturation", np.array(out))


EXTRACTORS = {
    "cooc-residual": residual_cooc_features,
    "cooc-rgb": rgb_cross_cooc_features,
    "saturation": saturation_features,
}


def write_feature_csv(path, rows) -> None:
    """``rows`` is an iterable of (path, label, FeatureVector)."""
    rows = list(rows)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if not rows:
            return
        name, n = rows[0][2].extractor, len(rows[0][2])
        writer.writerow(["path", "label"] + [f"{name}_{i}" for i in range(n)])
        for p, label, fv in rows:
            if fv.extractor != name or len(fv) != n:
                raise InvalidInputError("all rows must come from one extractor")
            writer.writerow([p, label] + [repr(float(x)) for x in fv.values])
