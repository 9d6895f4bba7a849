"""Noise residuals and generator fingerprints."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .imagecore import ImageBuffer, InvalidInputError, luma_plane, save_image

THIRD_ORDER = np.array([1.0, -3.0, 3.0, -1.0])
MIN_FINGERPRINT_IMAGES = 8


def _plane(img) -> np.ndarray:
    if isinstance(img, ImageBuffer):
        if img.channels != 1:
            raise InvalidInputError("residuals need a 1-channel image")
        return img.plane
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError("residuals need a 2D plane")
    return arr


def highpass_residual(img, direction: str = "horizontal") -> np.ndarray:
    """Valid-mode convolution with [1, -3, 3, -1] along rows (or columns).

    ``out[y, x] = p[y, x+3] - 3 p[y, x+2] + 3 p[y, x+1] - p[y, x]``, so the
    horizontal output is (h, w - 3).
    """
    p = _plane(img)
    if p.shape[0] < 4 or p.shape[1] < 4:
        raise InvalidInputError("high-pass residual needs at least 4x4 pixels")
    if direction == "vertical":
        return highpass_residual(p.T).T
    if direction != "horizontal":
        raise InvalidInputError(f"unknown direction {direction!r}")
    return p[:, 3:] - 3.0 * p[:, 2:-1] + 3.0 * p[:, 1:-2] - p[:, :-3]


def denoise_residual(img) -> np.ndarray:
    """Image minus its 3x3 median (edge replication)."""
    p = _plane(img)
    if p.shape[0] < 3 or p.shape[1] < 3:
        raise InvalidInputError("denoise residual needs at least 3x3 pixels")
    return p - kernels.median3x3(p)


@dataclass(frozen=True, eq=False)
class Fingerprint:
    values: np.ndarray
    count: int
    source: str = ""

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def estimate_fingerprint(imgs, source: str = "") -> Fingerprint:
    """Zero-mean average of median residuals (luma for color inputs)."""
    imgs = list(imgs)
    if len(imgs) < MIN_FINGERPRINT_IMAGES:
        raise InvalidInputError(
            f"need at least {MIN_FINGERPRINT_IMAGES} images for a fingerprint, got {len(imgs)}"
        )
    acc = None
    for img in imgs:
        r = denoise_residual(luma_plane(img))
        if acc is None:
            acc = np.zeros_like(r)
        elif r.shape != acc.shape:
            raise InvalidInputError("fingerprint images must share one size")
        acc += r
    mean = acc / len(imgs)
    return Fingerprint(mean - mean.mean(), len(imgs), source)


def correlate(residual: np.ndarray, fp) -> float:
    """Normalized cross-correlation in [-1, 1]; 0 when either side is flat."""
    a = np.asarray(residual, dtype=np.float64)
    b = fp.values if isinstance(fp, Fingerprint) else np.asarray(fp, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"size mismatch {a.shape} vs {b.shape}")
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(np.vdot(a, b) / (na * nb), -1.0, 1.0))


def attribute(img: ImageBuffer, fps) -> tuple[int, float]:
    """Index and score of the best-correlated fingerprint (lowest index on ties)."""
    fps = list(fps)
    if not fps:
        raise InvalidInputError("attribute needs at least one fingerprint")
    r = denoise_residual(luma_plane(img))
    scores = [correlate(r, fp) for fp in fps]
    best = int(np.argmax(scores))
    return best, scores[best]


def export_fingerprint(fp: Fingerprint, path) -> None:
    """PGM after linear rescale to [0, 255], plus a ``.txt`` sidecar."""
    v = fp.values
    lo, hi = float(v.min()), float(v.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    save_image(ImageBuffer((v - lo) * scale), path)
    side = Path(path).with_suffix(".txt")
    side.write_text(
        f"count\t{fp.count}\nsource\t{fp.source}\noffset\t{lo!r}\nscale\t{scale!r}\n",
        encoding="utf-8",
    )
