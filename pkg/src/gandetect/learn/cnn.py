"""A three-layer CNN detector written directly against numpy.

Architecture (all convolutions 3x3, zero padding 1, ReLU after each)::

    [residual-first: fixed per-channel Laplacian, stride 1, no activation]
    conv1 3->16, stride 2 (down-first) or 1 (no-down, residual-first)
    conv2 16->32, stride 2
    conv3 32->64, stride 2
    global average pool -> affine 64->1 -> logit
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..degrade import apply_policy
from ..imagecore import (
    DatasetManifest, DegenerateDataError, ImageBuffer, InvalidInputError, extract_patches, fit_to_side, load_image,
)
from ..rng import Rng
from .config import TrainConfig

VARIANTS = ("down-first", "no-down", "residual-first")
LAPLACIAN = np.array([[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]])

# (name, in channels, out channels, stride or None for the variant-dependent first stride)
LAYERS = (("conv1", 3, 16, None), ("conv2", 16, 32, 2), ("conv3", 32, 64, 2))
TRAINABLE = ("conv1.w", "conv1.b", "conv2.w", "conv2.b", "conv3.w", "conv3.b", "fc.w", "fc.b")


def first_stride(variant: str) -> int:
    return 2 if variant == "down-first" else 1


@dataclass(eq=False)
class TinyCnnParams:
    variant: str
    arrays: dict = field(default_factory=dict)
    loss_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown CNN variant {self.variant!r}")

    def strides(self) -> list[int]:
        return [first_stride(self.variant) if s is None else s for _, _, _, s in LAYERS]

    def copy(self) -> TinyCnnParams:
        return TinyCnnParams(self.variant, {k: v.copy() for k, v in self.arrays.items()}, list(self.loss_history))

    def n_trainable(self) -> int:
        return sum(self.arrays[k].size for k in TRAINABLE)


def fixed_highpass() -> np.ndarray:
    w = np.zeros((3, 1, 3, 3))
    w[:, 0] = LAPLACIAN
    return w


def shapes(variant: str) -> dict:
    out = {}
    for name, cin, cout, _ in LAYERS:
        out[f"{name}.w"] = (cout, cin, 3, 3)
        out[f"{name}.b"] = (cout,)
    out["fc.w"] = (64,)
    out["fc.b"] = (1,)
    if variant == "residual-first":
        out["hp.w"] = (3, 1, 3, 3)
    return out


def zero_params(variant: str) -> TinyCnnParams:
    p = TinyCnnParams(variant, {k: np.zeros(s) for k, s in shapes(variant).items()})
    if variant == "residual-first":
        p.arrays["hp.w"] = fixed_highpass()
    return p


def init_params(variant: str, seed: int) -> TinyCnnParams:
    """He-uniform weights, zero biases."""
    p = zero_params(variant)
    rng = Rng(seed).child("init")
    for name, cin, cout, _ in LAYERS:
        lim = math.sqrt(6.0 / (cin * 9))
        p.arrays[f"{name}.w"] = rng.child(name).uniform(-lim, lim, (cout, cin, 3, 3))
    lim = math.sqrt(6.0 / 64)
    p.arrays["fc.w"] = rng.child("fc").uniform(-lim, lim, 64)
    return p


def _depthwise_highpass(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    n, c, h, wd = x.shape
    p = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros_like(x)
    for ky in range(3):
        for kx in range(3):
            out += w[:, 0, ky, kx][None, :, None, None] * p[:, :, ky:ky + h, kx:kx + wd]
    return out


def _conv_forward(x, w, b, stride):
    cols = kernels.im2col(x, stride)  # (N, Ho, Wo, C*9)
    n, ho, wo, k = cols.shape
    out = cols.reshape(-1, k) @ w.reshape(w.shape[0], -1).T + b
    return out.reshape(n, ho, wo, -1).transpose(0, 3, 1, 2), cols


def _conv_backward(dout, cols, w, x_shape, stride, need_dx=True):
    n, f, ho, wo = dout.shape
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (d2.T @ cols.reshape(d2.shape[0], -1)).reshape(w.shape)
    db = d2.sum(axis=0)
    dx = None
    if need_dx:
        dcols = (d2 @ w.reshape(f, -1)).reshape(n, ho, wo, -1)
        dx = kernels.col2im(dcols, x_shape, stride)
    return dw, db, dx


def to_input(imgs, side: int | None = None) -> np.ndarray:
    """Stack images as an (N, 3, H, W) array scaled to [0, 1]."""
    arrs = []
    for img in imgs:
        if img.channels != 3:
            raise InvalidInputError("CNN input must have 3 channels")
        if side is not None and (img.width != side or img.height != side):
            raise InvalidInputError(f"CNN input must be {side}x{side}, got {img.width}x{img.height}")
        arrs.append(img.data)
    return np.stack(arrs).transpose(0, 3, 1, 2) / 255.0


def forward_batch(params: TinyCnnParams, x: np.ndarray, keep: bool = False):
    """Logits for an (N, 3, H, W) batch; with ``keep`` also the backward cache."""
    a = params.arrays
    if params.variant == "residual-first":
        x = _depthwise_highpass(x, a["hp.w"])
    cache = []
    h = x
    for (name, _, _, _), stride in zip(LAYERS, params.strides()):
        z, cols = _conv_forward(h, a[f"{name}.w"], a[f"{name}.b"], stride)
        cache.append((h.shape, cols, z > 0, stride))
        h = np.maximum(z, 0.0)
    pooled = h.mean(axis=(2, 3))
    logits = pooled @ a["fc.w"] + a["fc.b"][0]
    if keep:
        return logits, (cache, pooled, h.shape)
    return logits


def backward_batch(params: TinyCnnParams, logits, cache, labels) -> tuple[dict, float]:
    """Gradients of the batch-mean BCE loss for the trainable parameters."""
    a = params.arrays
    layer_cache, pooled, last_shape = cache
    y = np.asarray(labels, dtype=np.float64)
    n = logits.shape[0]
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))
    dz = (1.0 / (1.0 + np.exp(-logits)) - y) / n
    grads = {"fc.w": pooled.T @ dz, "fc.b": np.array([dz.sum()])}
    _, c, hh, ww = last_shape
    dh = np.broadcast_to((dz[:, None] * a["fc.w"][None, :])[:, :, None, None] / (hh * ww), last_shape)
    for i in range(len(LAYERS) - 1, -1, -1):
        name = LAYERS[i][0]
        x_shape, cols, mask, stride = layer_cache[i]
        dzl = dh * mask
        dw, db, dx = _conv_backward(dzl, cols, a[f"{name}.w"], x_shape, stride, need_dx=i > 0)
        grads[f"{name}.w"] = dw
        grads[f"{name}.b"] = db
        dh = dx
    return grads, loss


def cnn_forward(params: TinyCnnParams, img: ImageBuffer, side: int | None = None) -> float:
    return float(forward_batch(params, to_input([img], side))[0])


def cnn_gradient(params: TinyCnnParams, img: ImageBuffer, label: int, side: int | None = None) -> dict:
    """Exact gradient of the BCE loss for one image; the fixed high-pass layer is not included."""
    logits, cache = forward_batch(params, to_input([img], side), keep=True)
    grads, _ = backward_batch(params, logits, cache, [label])
    return grads


def cnn_loss(params: TinyCnnParams, img: ImageBuffer, label: int) -> float:
    z = cnn_forward(params, img)
    return float(np.logaddexp(0.0, z) - label * z)


def score_batch(params: TinyCnnParams, imgs, side: int, chunk: int = 64) -> np.ndarray:
    out = [forward_batch(params, to_input(imgs[i:i + chunk], side)) for i in range(0, len(imgs), chunk)]
    return np.concatenate(out) if out else np.zeros(0)


def patch_score(params: TinyCnnParams, img: ImageBuffer, patch: int, stride: int, side: int | None = None) -> float:
    """Mean logit over the patches of ``img``; ``patch`` must equal the training side."""
    if side is not None and patch != side:
        raise InvalidInputError(f"patch {patch} differs from the training side {side}")
    patches = extract_patches(img, patch, stride)
    return float(np.mean(forward_batch(params, to_input(patches, patch))))


def _random_crop(img: ImageBuffer, side: int, rng: Rng) -> ImageBuffer:
    if img.width < side or img.height < side:
        return fit_to_side(img, side)
    y = int(rng.integers(0, img.height - side))
    x = int(rng.integers(0, img.width - side))
    return ImageBuffer(img.data[y:y + side, x:x + side])


def train_on_images(images, labels, variant: str, cfg: TrainConfig, random_crop: bool = False,
                    log=None) -> TinyCnnParams:
    """SGD with momentum on in-memory images.

    Augmentation and crops use streams keyed by (epoch, sample index), so the
    trajectory depends only on the data, the config and the seed.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if set(np.unique(labels)) != {0.0, 1.0}:
        raise DegenerateDataError("training needs both classes")
    params = init_params(variant, cfg.seed)
    velocity = {k: np.zeros_like(params.arrays[k]) for k in TRAINABLE}
    root = Rng(cfg.seed)
    n = len(images)
    fixed = None
    if cfg.augment is None and not random_crop:
        fixed = [fit_to_side(img, cfg.side) for img in images]
    for epoch in range(cfg.epochs):
        order = root.child("shuffle", epoch).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch):
            idx = order[start:start + cfg.batch]
            batch = []
            for i in idx:
                if fixed is not None:
                    batch.append(fixed[i])
                    continue
                img = images[i]
                r = root.child("sample", epoch, int(i))
                if cfg.augment is not None:
                    img = apply_policy(img, cfg.augment, r.child("augment"))
                if random_crop:
                    img = _random_crop(img, cfg.side, r.child("crop"))
                batch.append(fit_to_side(img, cfg.side))
            logits, cache = forward_batch(params, to_input(batch, cfg.side), keep=True)
            grads, loss = backward_batch(params, logits, cache, labels[idx])
            total += loss * len(idx)
            for k in TRAINABLE:
                velocity[k] = cfg.momentum * velocity[k] - cfg.lr * grads[k]
                params.arrays[k] = params.arrays[k] + velocity[k]
        params.loss_history.append(total / n)
        if log is not None:
            log(epoch, total / n)
    return params


def load_split_images(manifest: DatasetManifest):
    images = []
    for e in manifest.entries:
        path = manifest.resolve(e)
        try:
            images.append(load_image(path))
        except (OSError, ValueError) as exc:
            raise type(exc)(f"{path}: {exc}") from exc
    return images, manifest.labels()


def train_cnn(manifest: DatasetManifest, variant: str, cfg: TrainConfig, random_crop: bool = False,
              log=None) -> TinyCnnParams:
    manifest.check_trainable()
    images, labels = load_split_images(manifest)
    return train_on_images(images, labels, variant, cfg, random_crop=random_crop, log=log)
