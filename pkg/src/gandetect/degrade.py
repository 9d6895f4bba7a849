"""Degradations and augmentation policies.

Every operation maps [0, 255] buffers to [0, 255] buffers. Randomized
operations take an explicit :class:`~gandetect.rng.Rng`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .imagecore import ImageBuffer, InvalidInputError, hflip, round_half_away
from .rng import Rng

# ITU-T T.81 Annex K, tables K.1 and K.2
LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)

CHROMA_TABLE = np.array([
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
], dtype=np.int64)


def _dct_matrix(n=8):
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * x + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    m[0] /= math.sqrt(2.0)
    return m


DCT8 = _dct_matrix()


def quality_scale(quality: int) -> int:
    return 5000 // quality if quality < 50 else 200 - 2 * quality


def scaled_table(base: np.ndarray, quality: int) -> np.ndarray:
    """libjpeg-style quality scaling of a base quantization table."""
    if not 1 <= quality <= 100:
        raise InvalidInputError(f"JPEG quality must be in [1, 100], got {quality}")
    s = quality_scale(quality)
    return np.clip((base * s + 50) // 100, 1, 255)


def rgb_to_ycbcr(d: np.ndarray) -> np.ndarray:
    r, g, b = d[..., 0], d[..., 1], d[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return np.stack([y, cb, cr], axis=-1)


def ycbcr_to_rgb(d: np.ndarray) -> np.ndarray:
    y, cb, cr = d[..., 0], d[..., 1] - 128.0, d[..., 2] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-1)


def _pad_to(plane: np.ndarray, mh: int, mw: int) -> np.ndarray:
    h, w = plane.shape
    return np.pad(plane, ((0, -h % mh), (0, -w % mw)), mode="edge")


def _code_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    p = _pad_to(plane, 8, 8) - 128.0
    ph, pw = p.shape
    blocks = p.reshape(ph // 8, 8, pw // 8, 8).transpose(0, 2, 1, 3)
    coef = DCT8 @ blocks @ DCT8.T
    coef = round_half_away(coef / table) * table
    rec = DCT8.T @ coef @ DCT8
    rec = rec.transpose(0, 2, 1, 3).reshape(ph, pw) + 128.0
    return rec[:h, :w]


def jpeg_roundtrip(img: ImageBuffer, quality: int) -> ImageBuffer:
    """In-memory JPEG simulation: 4:2:0, Annex K tables, orthonormal 8x8 DCT."""
    luma_q = scaled_table(LUMA_TABLE, quality)
    if img.channels == 1:
        out = _code_plane(img.plane, luma_q)
        return ImageBuffer(np.clip(out, 0.0, 255.0))
    chroma_q = scaled_table(CHROMA_TABLE, quality)
    h, w = img.height, img.width
    ycc = rgb_to_ycbcr(img.data)
    y = _code_plane(ycc[..., 0], luma_q)
    chans = [y]
    for c in (1, 2):
        full = _pad_to(ycc[..., c], 2, 2)
        sub = full.reshape(full.shape[0] // 2, 2, full.shape[1] // 2, 2).mean(axis=(1, 3))
        rec = _code_plane(sub, chroma_q)
        chans.append(np.repeat(np.repeat(rec, 2, axis=0), 2, axis=1)[:h, :w])
    rgb = ycbcr_to_rgb(np.stack(chans, axis=-1))
    return ImageBuffer(np.clip(rgb, 0.0, 255.0))


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    r = math.ceil(3.0 * sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _filter_axis(arr: np.ndarray, k: np.ndarray, axis: int) -> np.ndarray:
    r = len(k) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (r, r)
    p = np.pad(arr, pad, mode="edge")
    n = arr.shape[axis]
    out = np.zeros_like(arr)
    for i, wgt in enumerate(k):
        out += wgt * np.take(p, np.arange(i, i + n), axis=axis)
    return out


def gaussian_blur(img: ImageBuffer, sigma: float) -> ImageBuffer:
    """Separable Gaussian blur, radius ceil(3 sigma), edge replication."""
    if not math.isfinite(sigma) or sigma < 0:
        raise InvalidInputError(f"sigma must be finite and >= 0, got {sigma}")
    if sigma == 0:
        return img
    k = gaussian_kernel1d(sigma)
    out = _filter_axis(_filter_axis(img.data, k, 0), k, 1)
    return ImageBuffer(np.clip(out, 0.0, 255.0))


def add_gaussian_noise(img: ImageBuffer, sigma: float, rng: Rng) -> ImageBuffer:
    if not math.isfinite(sigma) or sigma < 0:
        raise InvalidInputError(f"sigma must be finite and >= 0, got {sigma}")
    if sigma == 0:
        return img
    noise = rng.normal(sigma, size=img.data.shape)
    return ImageBuffer(np.clip(img.data + noise, 0.0, 255.0))


def cutout(img: ImageBuffer, frac: float, rng: Rng) -> ImageBuffer:
    """Fill a square of side round(frac * min(w, h)) with mid-gray."""
    short = min(img.width, img.height)
    if not 0 < frac < 1 or frac * short < 1:
        raise InvalidInputError(f"cut-out fraction {frac} too small for a {img.width}x{img.height} image")
    s = int(round_half_away(frac * short))
    y = int(rng.integers(0, img.height - s))
    x = int(rng.integers(0, img.width - s))
    out = img.data.copy()
    out[y:y + s, x:x + s, :] = 128.0
    return ImageBuffer(out)


def brightness_contrast(img: ImageBuffer, b: float, c: float) -> ImageBuffer:
    if not c > 0:
        raise InvalidInputError(f"contrast must be > 0, got {c}")
    if b == 0 and c == 1:
        return img
    return ImageBuffer(np.clip(c * (img.data - 128.0) + 128.0 + b, 0.0, 255.0))


@dataclass(frozen=True)
class AugmentPolicy:
    jpeg_prob: float = 0.0
    jpeg_quality_range: tuple[int, int] = (30, 100)
    blur_prob: float = 0.0
    blur_sigma_range: tuple[float, float] = (0.0, 3.0)
    noise_prob: float = 0.0
    noise_sigma_range: tuple[float, float] = (0.0, 5.0)
    flip_prob: float = 0.0
    cutout_prob: float = 0.0
    cutout_frac: float = 0.25
    brightness_range: tuple[float, float] = (0.0, 0.0)
    contrast_range: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name.endswith("_prob") and not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"{f.name} must be in [0, 1], got {v}")
            if f.name.endswith("_range"):
                v = tuple(v)
                object.__setattr__(self, f.name, v)
                if len(v) != 2 or v[0] > v[1]:
                    raise InvalidInputError(f"{f.name} must be an ordered pair, got {v}")
        lo, hi = self.jpeg_quality_range
        if not (1 <= lo <= hi <= 100 and int(lo) == lo and int(hi) == hi):
            raise InvalidInputError(f"jpeg_quality_range must be integers within [1, 100], got {self.jpeg_quality_range}")
        if not 0 < self.cutout_frac < 1:
            raise InvalidInputError("cutout_frac must be in (0, 1)")
        if self.blur_sigma_range[0] < 0 or self.noise_sigma_range[0] < 0:
            raise InvalidInputError("sigma ranges must be non-negative")
        if self.contrast_range[0] <= 0:
            raise InvalidInputError("contrast range must be positive")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> AugmentPolicy:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown augment fields: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


# blur + JPEG policy in the style of the ResNet50 detector it is named after
BLUR_JPEG = AugmentPolicy(jpeg_prob=0.5, jpeg_quality_range=(30, 100), blur_prob=0.5, blur_sigma_range=(0.0, 2.0))

STRONG = AugmentPolicy(
    jpeg_prob=0.5, jpeg_quality_range=(30, 100),
    blur_prob=0.5, blur_sigma_range=(0.0, 2.0),
    noise_prob=0.3, noise_sigma_range=(0.0, 4.0),
    flip_prob=0.5,
    cutout_prob=0.3, cutout_frac=0.25,
    brightness_range=(-20.0, 20.0), contrast_range=(0.8, 1.2),
)

PRESETS = {"none": None, "blur-jpeg": BLUR_JPEG, "strong": STRONG}


def _fires(rng: Rng, p: float) -> bool:
    # draw unconditionally so one stage's probability never shifts another's stream
    return bool(rng.uniform() < p)


def apply_policy(img: ImageBuffer, policy: AugmentPolicy, rng: Rng) -> ImageBuffer:
    """flip -> brightness/contrast -> cut-out -> noise -> blur -> JPEG."""
    r = rng.child("flip")
    if _fires(r, policy.flip_prob):
        img = hflip(img)
    r = rng.child("bc")
    # no probability field for this stage: it fires whenever its ranges are non-degenerate
    if policy.brightness_range != (0.0, 0.0) or policy.contrast_range != (1.0, 1.0):
        img = brightness_contrast(img, float(r.uniform(*policy.brightness_range)), float(r.uniform(*policy.contrast_range)))
    r = rng.child("cutout")
    if _fires(r, policy.cutout_prob):
        img = cutout(img, policy.cutout_frac, r)
    r = rng.child("noise")
    if _fires(r, policy.noise_prob):
        img = add_gaussian_noise(img, float(r.uniform(*policy.noise_sigma_range)), r)
    r = rng.child("blur")
    if _fires(r, policy.blur_prob):
        img = gaussian_blur(img, float(r.uniform(*policy.blur_sigma_range)))
    r = rng.child("jpeg")
    if _fires(r, policy.jpeg_prob):
        lo, hi = policy.jpeg_quality_range
        img = jpeg_roundtrip(img, int(r.integers(int(lo), int(hi))))
    return img


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    mse = float(np.mean((a.data - b.data) ** 2))
    return math.inf if mse == 0 else 10.0 * math.log10(255.0 ** 2 / mse)
