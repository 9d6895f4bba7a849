"""The detector roster: feature pipelines, test strategies, training and scoring.

Each detector scores one image at a time so a score never depends on how a
test set is batched or split across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .degrade import PRESETS, AugmentPolicy
from .features import EXTRACTORS
from .imagecore import ImageBuffer, InvalidInputError, center_crop, fit_to_side, luma_plane
from .learn.cnn import TinyCnnParams, cnn_forward, patch_score, train_on_images
from .learn.config import TrainConfig
from .learn.linear import LinearModel, train_linear
from .learn.modelio import read_model, write_model
from .residual import Fingerprint, correlate, denoise_residual, estimate_fingerprint
from .spectral import spectral_features

LINEAR = ("spec-radial", "spec-peaks", "cooc-residual", "cooc-rgb", "saturation", "fingerprint")
CNN = {"cnn-down": "down-first", "cnn-nodown": "no-down", "cnn-residual": "residual-first", "cnn-patch": "no-down"}
ROSTER = LINEAR + tuple(CNN)


def check_name(name: str) -> None:
    if name not in ROSTER:
        raise InvalidInputError(f"unknown detector {name!r}; choose from {', '.join(ROSTER)}")


def resolve_augment(value) -> AugmentPolicy | None:
    if value is None or isinstance(value, AugmentPolicy):
        return value
    if isinstance(value, str):
        if value not in PRESETS:
            raise InvalidInputError(f"unknown augment preset {value!r}")
        return PRESETS[value]
    return AugmentPolicy.from_dict(dict(value))


@dataclass(frozen=True)
class DetectorSpec:
    """A roster entry plus its per-detector options."""

    name: str
    augment: object = None
    patch: int = 32
    stride: int = 16
    train_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        check_name(self.name)
        object.__setattr__(self, "augment", resolve_augment(self.augment))
        if self.name == "cnn-patch" and (self.patch < 4 or self.stride < 1):
            raise InvalidInputError("cnn-patch needs patch >= 4 and stride >= 1")

    def train_config(self, base: TrainConfig) -> TrainConfig:
        cfg = replace(base, **self.train_overrides) if self.train_overrides else base
        if self.augment is not None:
            cfg = replace(cfg, augment=self.augment)
        if self.name == "cnn-patch":
            cfg = replace(cfg, side=self.patch)
        return cfg


def spectral_input(img: ImageBuffer, side: int) -> ImageBuffer:
    """Luma, center-cropped to ``side`` (upscaled first if smaller)."""
    return ImageBuffer(luma_plane(fit_to_side(img, side)))


def peak_input(img: ImageBuffer, side: int) -> ImageBuffer:
    """Luma, center-cropped to ``side`` or to the largest power of two that fits.

    The peak ratios do not depend on the raster size, so small images are
    cropped rather than resampled; resampling would add its own replicas.
    """
    n = side
    while n > min(img.width, img.height):
        n //= 2
    return ImageBuffer(luma_plane(center_crop(img, n, n)))


def fingerprint_features(img: ImageBuffer, fps, side: int) -> np.ndarray:
    r = denoise_residual(luma_plane(fit_to_side(img, side)))
    return np.array([correlate(r, fp) for fp in fps])


def linear_features(name: str, img: ImageBuffer, side: int, fps=()) -> np.ndarray:
    if name == "spec-radial":
        return spectral_features(spectral_input(img, side), "radial")
    if name == "spec-peaks":
        # ratios span orders of magnitude; the classifier sees log(1 + ratio)
        return np.log1p(spectral_features(peak_input(img, side), "peak-grid"))
    if name == "fingerprint":
        return fingerprint_features(img, fps, side)
    return EXTRACTORS[name](img).values


@dataclass(eq=False)
class TrainedDetector:
    name: str
    side: int
    linear: LinearModel | None = None
    cnn: TinyCnnParams | None = None
    fingerprints: list = field(default_factory=list)
    patch: int = 32
    stride: int = 16
    config: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        if self.linear is not None:
            return self.linear.final_loss
        return self.cnn.loss_history[-1] if self.cnn.loss_history else float("nan")

    def score_one(self, img: ImageBuffer) -> float:
        if self.linear is not None:
            x = linear_features(self.name, img, self.side, self.fingerprints)
            m = self.linear
            return float(np.dot(m.standardize(x), m.weights) + m.bias)
        if self.name == "cnn-patch":
            short = min(img.width, img.height)
            if short < self.patch:
                img = fit_to_side(img, self.patch)
            return patch_score(self.cnn, img, self.patch, self.stride, self.patch)
        return cnn_forward(self.cnn, fit_to_side(img, self.side), self.side)

    def score(self, images) -> np.ndarray:
        return np.array([self.score_one(img) for img in images], dtype=np.float64)

    # --- persistence ---

    def save(self, path) -> None:
        meta = {"detector": self.name, "side": self.side, "patch": self.patch, "stride": self.stride}
        if self.linear is not None:
            m = self.linear
            arrays = {"weights": m.weights, "bias": np.array([m.bias]), "mean": m.mean, "scale": m.scale}
            for i, fp in enumerate(self.fingerprints):
                arrays[f"fingerprint.{i}"] = fp.values
            meta["fingerprints"] = [{"source": fp.source, "count": fp.count} for fp in self.fingerprints]
            meta["final_loss"] = m.final_loss
            write_model(path, "linear", m.extractor, meta, arrays, self.config, m.final_loss)
        else:
            meta["loss_history"] = self.cnn.loss_history
            write_model(path, "cnn", self.cnn.variant, meta, self.cnn.arrays, self.config, self.final_loss)

    @classmethod
    def load(cls, path) -> TrainedDetector:
        kind, variant, meta, arrays = read_model(path)
        det = cls(meta["detector"], int(meta["side"]), patch=int(meta["patch"]), stride=int(meta["stride"]))
        if kind == "linear":
            det.linear = LinearModel(variant, arrays["weights"], float(arrays["bias"][0]), arrays["mean"],
                                     arrays["scale"], float(meta.get("final_loss", float("nan"))))
            det.fingerprints = [
                Fingerprint(arrays[f"fingerprint.{i}"], int(fp["count"]), fp["source"])
                for i, fp in enumerate(meta.get("fingerprints", []))
            ]
        else:
            det.cnn = TinyCnnParams(variant, dict(arrays), list(meta.get("loss_history", [])))
        return det


def train_detector(spec: DetectorSpec, images, labels, sources, base_cfg: TrainConfig, log=None) -> TrainedDetector:
    """Fit one roster entry on in-memory training images."""
    cfg = spec.train_config(base_cfg)
    labels = np.asarray(labels)
    config = {"detector": spec.name, "train": _cfg_dict(cfg), "patch": spec.patch, "stride": spec.stride}
    det = TrainedDetector(spec.name, cfg.side, patch=spec.patch, stride=spec.stride, config=config)
    if spec.name in CNN:
        det.cnn = train_on_images(images, labels, CNN[spec.name], cfg, random_crop=spec.name == "cnn-patch", log=log)
        return det
    if spec.name == "fingerprint":
        det.fingerprints = _fingerprints(images, labels, sources, cfg.side)
    x = np.stack([linear_features(spec.name, img, cfg.side, det.fingerprints) for img in images])
    extractor = spec.name
    det.linear = train_linear(x, labels, cfg, extractor=extractor)
    return det


def _fingerprints(images, labels, sources, side) -> list:
    groups = {}
    for img, lab, src in zip(images, labels, sources):
        groups.setdefault("real" if lab == 0 else src, []).append(fit_to_side(img, side))
    fps = [estimate_fingerprint(groups[k], k) for k in sorted(groups)]
    return fps


def _cfg_dict(cfg: TrainConfig) -> dict:
    return {
        "epochs": cfg.epochs, "batch": cfg.batch, "lr": cfg.lr, "momentum": cfg.momentum,
        "seed": cfg.seed, "side": cfg.side, "linear_iters": cfg.linear_iters,
        "augment": None if cfg.augment is None else cfg.augment.to_dict(),
    }
