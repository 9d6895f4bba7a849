"""Synthetic benchmark data.

"Real" images are 1/f^alpha random fields. "Synthetic" images pass a
low-resolution field through a stack of x2 upsamplers, each followed by a
fixed 3x3 kernel that identifies the generator, and blend the result with
an independent full-resolution field. Zero-insertion upsampling replicates
the spectrum around the half-band frequencies; the post-kernel decides how
much of that replica survives.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imagecore import (
    DatasetManifest, ImageBuffer, InvalidInputError, ManifestEntry, resize_bilinear, round_half_away, to_bytes,
    write_manifest,
)
from .rng import Rng, hash_seed
from .spectral import fft2_array, is_pow2, signed_freqs

UPSAMPLERS = ("zero-insertion", "nearest", "bilinear")

# Bilinear interpolation after zero insertion; its four polyphase gains are equal,
# so alone it leaves no periodic trace. The named kernels perturb it.
INTERP = np.array([[0.25, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 0.25]])

KERNELS = {
    "interp": INTERP,
    "k-a": INTERP + np.array([[0.0, 0.0, 0.0], [0.0, 0.4, 0.0], [0.0, 0.0, 0.0]]),
    "k-b": INTERP + np.array([[0.1, 0.0, 0.1], [0.0, 0.0, 0.0], [0.1, 0.0, 0.1]]),
    "k-c": INTERP + np.array([[0.0, 0.2, 0.0], [0.0, 0.0, 0.0], [0.0, 0.2, 0.0]]),
    "k-d": INTERP + np.array([[0.0, 0.0, 0.0], [0.2, 0.0, 0.2], [0.0, 0.0, 0.0]]),
    "k-e": INTERP + np.array([[0.0, 0.05, 0.0], [0.0, 0.3, 0.0], [0.0, 0.05, 0.0]]),
}

MEAN = 128.0
STD = 40.0
TINT = 8.0


@dataclass(frozen=True)
class GeneratorConfig:
    tag: str
    base_side: int
    stages: int = 1
    upsampler: str = "zero-insertion"
    post_kernel: tuple = tuple(map(tuple, KERNELS["k-a"]))
    artifact_gain: float = 1.0

    def __post_init__(self):
        k = np.asarray(self.post_kernel, dtype=np.float64)
        if k.shape != (3, 3) or not np.all(np.isfinite(k)):
            raise InvalidInputError(f"{self.tag}: post_kernel must be a finite 3x3 matrix")
        object.__setattr__(self, "post_kernel", tuple(map(tuple, k.tolist())))
        if self.upsampler not in UPSAMPLERS:
            raise InvalidInputError(f"{self.tag}: unknown upsampler {self.upsampler!r}")
        if self.stages not in (1, 2):
            raise InvalidInputError(f"{self.tag}: stages must be 1 or 2")
        if self.base_side < 2 or not is_pow2(self.side):
            raise InvalidInputError(f"{self.tag}: output side {self.side} is not a power of two")
        if not 0.0 <= self.artifact_gain <= 1.0:
            raise InvalidInputError(f"{self.tag}: artifact_gain must be in [0, 1]")

    @property
    def side(self) -> int:
        return self.base_side * 2 ** self.stages

    @property
    def kernel(self) -> np.ndarray:
        return np.array(self.post_kernel)


@dataclass(frozen=True)
class SynthSpec:
    side: int = 64
    n_train: int = 1000
    n_test: int = 500
    alpha_range: tuple = (0.8, 1.6)
    train_generators: tuple = ()
    test_generators: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if not is_pow2(self.side):
            raise InvalidInputError(f"side {self.side} is not a power of two")
        if self.n_train < 1 or self.n_test < 1:
            raise InvalidInputError("counts must be >= 1")
        lo, hi = self.alpha_range
        if not 0.5 <= lo <= hi <= 2.0:
            raise InvalidInputError(f"alpha range {self.alpha_range} outside [0.5, 2]")
        object.__setattr__(self, "alpha_range", tuple(self.alpha_range))
        for name in ("train_generators", "test_generators"):
            gens = tuple(getattr(self, name))
            object.__setattr__(self, name, gens)
            if not gens:
                raise InvalidInputError(f"{name} must not be empty")
            for g in gens:
                if g.side != self.side:
                    raise InvalidInputError(f"generator {g.tag} emits {g.side}px, dataset side is {self.side}")
                if g.tag == "real":
                    raise InvalidInputError("generator tag 'real' is reserved")

    def generators(self, split: str) -> tuple:
        return self.train_generators if split == "train" else self.test_generators

    def count(self, split: str) -> int:
        return self.n_train if split == "train" else self.n_test


def default_generators(side: int = 64, gain: float = 0.8) -> tuple[tuple, tuple]:
    """Train generators ``gan-a`` to ``gan-d`` and the unseen test generator ``gan-e``.

    Each training kernel boosts one polyphase component, so between them the
    half-band replicas take both signs at every center and only their energy
    is shared. ``k-e`` boosts two components by different amounts, so its
    kernel shape and replica magnitudes match no training generator.
    """
    make = lambda k: GeneratorConfig(f"gan-{k[-1]}", side // 2, 1, "zero-insertion", KERNELS[k], gain)
    return tuple(make(k) for k in ("k-a", "k-b", "k-c", "k-d")), (make("k-e"),)


def default_spec(side=64, n_train=1000, n_test=500, gain=0.8, seed=0) -> SynthSpec:
    train, test = default_generators(side, gain)
    return SynthSpec(side, n_train, n_test, (0.8, 1.6), train, test, seed)


def power_law_field(rng: Rng, side: int, alpha: float) -> np.ndarray:
    """Zero-mean, unit-std field whose amplitude spectrum falls as 1/radius^alpha."""
    f = signed_freqs(side)
    r = np.sqrt(f[:, None] ** 2 + f[None, :] ** 2)
    amp = np.zeros_like(r)
    amp[r > 0] = r[r > 0] ** (-alpha)
    # spectrum of real white noise: i.i.d. complex Gaussian with Hermitian symmetry
    spec = fft2_array(rng.normal(1.0, (side, side))) * amp
    x = fft2_array(spec, inverse=True).real
    x -= x.mean()
    sd = x.std()
    return x / sd if sd > 0 else x


def _check_side_alpha(side, alpha):
    if not is_pow2(side) or side < 2:
        raise InvalidInputError(f"side {side} is not a power of two")
    if not 0.5 <= alpha <= 2.0:
        raise InvalidInputError(f"alpha {alpha} outside [0.5, 2]")


def _tinted(x: np.ndarray, rng: Rng) -> np.ndarray:
    tint = rng.uniform(-TINT, TINT, 3)
    return x[:, :, None] + tint[None, None, :]


def _normalize(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    return (x - x.mean()) / sd if sd > 0 else x - x.mean()


def gen_real(seed: int, side: int, alpha: float) -> ImageBuffer:
    _check_side_alpha(side, alpha)
    rng = Rng(seed)
    x = MEAN + STD * power_law_field(rng.child("field"), side, alpha)
    return ImageBuffer(np.clip(_tinted(x, rng.child("tint")), 0.0, 255.0))


def zero_insert(x: np.ndarray) -> np.ndarray:
    h, w = x.shape
    out = np.zeros((2 * h, 2 * w))
    out[::2, ::2] = x
    return out


def upsample(x: np.ndarray, method: str) -> np.ndarray:
    if method == "zero-insertion":
        return zero_insert(x)
    if method == "nearest":
        return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)
    return resize_bilinear(ImageBuffer(x), 2.0).plane


def convolve3x3(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """'Same' 2D circular convolution.

    The 1/f fields are periodic, so wrapping adds no seam; zero padding would
    darken a one-pixel frame that no upsampler produces.
    """
    h, w = x.shape
    p = np.pad(x, 1, mode="wrap")
    out = np.zeros_like(x)
    for i in range(3):
        for j in range(3):
            # convolution flips the kernel
            out += k[2 - i, 2 - j] * p[i:i + h, j:j + w]
    return out


def generate_planes(base: np.ndarray, config: GeneratorConfig, post_kernel: bool = True) -> np.ndarray:
    """Run each channel of an (h, w, c) array through the upsampling stack."""
    chans = []
    for c in range(base.shape[2]):
        x = base[:, :, c]
        for _ in range(config.stages):
            x = upsample(x, config.upsampler)
            if post_kernel:
                x = convolve3x3(x, config.kernel)
        chans.append(x)
    return np.stack(chans, axis=-1)


def gen_fake(seed: int, config: GeneratorConfig, alpha: float = 1.2) -> ImageBuffer:
    """One synthetic image; color is added last exactly as in :func:`gen_real`."""
    _check_side_alpha(config.base_side, alpha)
    rng = Rng(seed)
    # a nonzero mean, like post-ReLU feature maps, makes upsampling replicate DC
    base = MEAN + STD * power_law_field(rng.child("base"), config.base_side, alpha)
    generated = _normalize(generate_planes(base[:, :, None], config)[:, :, 0])
    background = power_law_field(rng.child("background"), config.side, alpha)
    g = config.artifact_gain
    mixed = MEAN + STD * _normalize(g * generated + (1.0 - g) * background)
    return ImageBuffer(np.clip(_tinted(mixed, rng.child("tint")), 0.0, 255.0))


def _image(args) -> ImageBuffer:
    split, label, index, seed, gen, alpha = args
    return gen_real(seed, gen, alpha) if label == 0 else gen_fake(seed, gen, alpha)


def _job(args):
    return to_bytes(_image(args))


def plan(spec: SynthSpec):
    """(relative path, label, source, seed, job args) for every image, in manifest order."""
    out = []
    for split in ("train", "test"):
        gens = spec.generators(split)
        for label, cls in ((0, "real"), (1, "fake")):
            for i in range(spec.count(split)):
                seed = hash_seed(spec.seed, split, cls, i)
                alpha = float(Rng(seed).child("alpha").uniform(*spec.alpha_range))
                if label == 0:
                    source, gen = "real", spec.side
                else:
                    g = gens[i % len(gens)]
                    source, gen = g.tag, g
                out.append((f"{split}/{cls}/{i:05d}.ppm", label, source, seed, (split, label, i, seed, gen, alpha)))
    return out


def gen_dataset(spec: SynthSpec, outdir, workers: int = 1) -> DatasetManifest:
    """Write every image plus ``manifest.tsv`` under ``outdir``."""
    outdir = Path(outdir)
    items = plan(spec)
    for split in ("train", "test"):
        for cls in ("real", "fake"):
            (outdir / split / cls).mkdir(parents=True, exist_ok=True)
    jobs = [it[4] for it in items]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            blobs = list(ex.map(_job, jobs, chunksize=32))
    else:
        blobs = [_job(j) for j in jobs]
    for (rel, *_), blob in zip(items, blobs):
        path = outdir / rel
        try:
            path.write_bytes(blob)
        except OSError as exc:
            raise OSError(f"{path}: {exc.strerror or exc}") from exc
    manifest = DatasetManifest(tuple(ManifestEntry(rel, lab, src, seed) for rel, lab, src, seed, _ in items), str(outdir))
    write_manifest(manifest, outdir / "manifest.tsv")
    return manifest


def gen_split(spec: SynthSpec, split: str):
    """(images, labels, sources) of one split in memory, quantized exactly as the files on disk."""
    if split not in ("train", "test"):
        raise InvalidInputError(f"split must be train or test, got {split!r}")
    items = [it for it in plan(spec) if it[4][0] == split]
    images = [ImageBuffer(round_half_away(_image(it[4]).data)) for it in items]
    return images, np.array([it[1] for it in items]), [it[2] for it in items]


def manifest_path(outdir) -> str:
    return os.path.join(str(outdir), "manifest.tsv")
