"""Fourier analysis of single-channel images.

The 2D transform is a row-column radix-2 FFT (see :mod:`gandetect.kernels`);
only square power-of-two rasters are accepted, callers center-crop first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .imagecore import ImageBuffer, InvalidInputError, luma_plane

PEAK_WINDOW = 1  # half-width of the 3x3 peak window
ANNULUS = 5  # half-width of the 11x11 surrounding window


def is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Unnormalized DFT coefficients, DC at index (0, 0)."""

    coefficients: np.ndarray
    provenance: str = ""

    @property
    def size(self) -> int:
        return self.coefficients.shape[0]

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.coefficients) ** 2


@dataclass(frozen=True, eq=False)
class RadialProfile:
    bins: np.ndarray
    normalization: float
    counts: np.ndarray


def _check_square_pow2(shape) -> int:
    h, w = shape
    if h != w or not is_pow2(w):
        raise InvalidInputError(f"FFT needs a square power-of-two raster, got {w}x{h}")
    return w


def fft2_array(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """2D DFT of a square power-of-two array (1/N^2 applied on the inverse)."""
    n = _check_square_pow2(np.shape(x))
    out = kernels.fft_rows(np.asarray(x, dtype=np.complex128), inverse)
    out = kernels.fft_rows(out.T, inverse).T
    if inverse:
        out = out / (n * n)
    return np.ascontiguousarray(out)


def fft2d(img: ImageBuffer, provenance: str = "") -> Spectrum:
    if img.channels != 1:
        raise InvalidInputError("fft2d needs a 1-channel image")
    return Spectrum(fft2_array(img.plane), provenance)


def ifft2d(spec: Spectrum) -> np.ndarray:
    return fft2_array(spec.coefficients, inverse=True)


def fftshift(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    return np.roll(a, (n // 2, n // 2), axis=(0, 1))


def _display(mag: np.ndarray) -> ImageBuffer:
    v = fftshift(np.log1p(mag))
    lo, hi = v.min(), v.max()
    if hi == lo:
        return ImageBuffer(np.zeros_like(v))
    return ImageBuffer((v - lo) * (255.0 / (hi - lo)))


def log_magnitude(spec: Spectrum) -> ImageBuffer:
    """log(1 + |F|), DC centered, rescaled to [0, 255]."""
    return _display(np.abs(spec.coefficients))


def average_spectrum(imgs) -> ImageBuffer:
    imgs = list(imgs)
    if not imgs:
        raise InvalidInputError("average_spectrum needs at least one image")
    shape = (imgs[0].height, imgs[0].width)
    acc = np.zeros(shape)
    for img in imgs:
        if (img.height, img.width) != shape:
            raise InvalidInputError("all images must share one size")
        acc += np.abs(fft2_array(luma_plane(img)))
    return _display(acc / len(imgs))


def signed_freqs(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.where(k < n // 2, k, k - n)


def radius_bins(n: int) -> np.ndarray:
    """Integer radius of each frequency bin, folded into [0, n/2 - 1]."""
    f = signed_freqs(n)
    r = np.sqrt(f[:, None] ** 2 + f[None, :] ** 2)
    return np.minimum(np.floor(r).astype(np.intp), n // 2 - 1)


def azimuthal_average(spec: Spectrum) -> RadialProfile:
    """Mean power per integer-radius annulus, divided by the DC bin.

    Radii beyond n/2 (the corners) are folded into the last bin so that each
    frequency is counted exactly once.
    """
    n = spec.size
    r = radius_bins(n).ravel()
    counts = np.bincount(r, minlength=n // 2)
    sums = np.bincount(r, weights=spec.power.ravel(), minlength=n // 2)
    bins = sums / counts
    norm = bins[0] if bins[0] > 0 else 1.0
    return RadialProfile(bins / norm, float(norm), counts)


def peak_centers(n: int) -> list[tuple[int, int]]:
    grid = (0, n // 4, n // 2)
    return [(u, v) for u in grid for v in grid if (u, v) != (0, 0)]


def peak_ratios(power: np.ndarray) -> np.ndarray:
    """Mean power in a 3x3 window over the median of the surrounding 11x11 ring."""
    n = power.shape[0]
    off = np.arange(-ANNULUS, ANNULUS + 1)
    ring = (np.abs(off)[:, None] > PEAK_WINDOW) | (np.abs(off)[None, :] > PEAK_WINDOW)
    floor = 1e-12 * power.mean()
    out = []
    for u, v in peak_centers(n):
        win = power[np.ix_((u + off) % n, (v + off) % n)]
        peak = win[~ring].mean()
        if peak == 0:
            out.append(0.0)
            continue
        out.append(peak / max(np.median(win[ring]), floor))
    return np.array(out)


def spectral_features(img: ImageBuffer, kind: str) -> np.ndarray:
    """``radial``: n/2 profile bins; ``peak-grid``: 8 peak-to-neighborhood ratios."""
    if kind not in ("radial", "peak-grid"):
        raise InvalidInputError(f"unknown spectral feature kind {kind!r}")
    if img.channels != 1:
        raise InvalidInputError("spectral features need a 1-channel image")
    spec = fft2d(img)
    if kind == "radial":
        return azimuthal_average(spec).bins
    return peak_ratios(spec.power)
