"""Image buffers, PPM/PGM I/O, manifests and basic geometry."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InvalidInputError(ValueError):
    """An argument violates an operation's precondition."""


class DegenerateDataError(InvalidInputError):
    """The data cannot support the request, e.g. a split with one class only."""


class FormatError(ValueError):
    """A file does not follow the expected binary PPM/PGM layout."""


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Immutable raster of float64 samples in [0, 255], shape (height, width, channels)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise InvalidInputError(f"expected (H, W, 1|3) samples, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError("image must be at least 1x1")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def plane(self) -> np.ndarray:
        """The single channel of a 1-channel image as a 2D array."""
        if self.channels != 1:
            raise InvalidInputError("image has more than one channel")
        return self.data[:, :, 0]

    def samples(self) -> np.ndarray:
        """Row-major, channel-interleaved flat view."""
        return self.data.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        if buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif buf[pos:pos + 1].isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError("truncated header")
    return buf[start:pos], pos


def load_image(path) -> ImageBuffer:
    """Read a binary PGM (P5) or PPM (P6) file with maxval 255."""
    buf = Path(path).read_bytes()
    magic, pos = _read_token(buf, 0)
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported magic {magic!r}, expected P5 or P6")
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _read_token(buf, pos)
        if not tok.isdigit():
            raise FormatError(f"{path}: non-numeric {name} {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"{path}: empty raster {width}x{height}")
    if maxval != 255:
        raise FormatError(f"{path}: maxval {maxval} is not 255")
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace after header")
    pos += 1
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    payload = buf[pos:pos + need]
    if len(payload) < need:
        raise FormatError(f"{path}: truncated payload, {len(payload)} of {need} bytes")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return ImageBuffer(arr.astype(np.float64))


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_bytes(img: ImageBuffer) -> bytes:
    """Encode as P5/P6 bytes."""
    q = round_half_away(img.data)
    if q.min() < 0 or q.max() > 255:
        raise InvalidInputError("samples outside [0, 255]")
    magic = b"P6" if img.channels == 3 else b"P5"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    return header + q.astype(np.uint8).tobytes()


def save_image(img: ImageBuffer, path) -> None:
    """Write P5 for 1-channel and P6 for 3-channel buffers."""
    data = to_bytes(img)
    with open(path, "wb") as fh:
        fh.write(data)


def to_luma(img: ImageBuffer) -> ImageBuffer:
    """BT.601 luma, unclamped."""
    if img.channels != 3:
        raise InvalidInputError("to_luma needs a 3-channel image")
    d = img.data
    y = 0.299 * d[:, :, 0] + 0.587 * d[:, :, 1] + 0.114 * d[:, :, 2]
    return ImageBuffer(y)


def luma_plane(img: ImageBuffer) -> np.ndarray:
    """2D luma array for either channel count."""
    return img.plane if img.channels == 1 else to_luma(img).plane


def center_crop(img: ImageBuffer, w: int, h: int) -> ImageBuffer:
    if w < 1 or h < 1 or w > img.width or h > img.height:
        raise InvalidInputError(f"cannot crop {w}x{h} from {img.width}x{img.height}")
    x0 = (img.width - w) // 2
    y0 = (img.height - h) // 2
    return ImageBuffer(img.data[y0:y0 + h, x0:x0 + w])


def _resize_axis(arr: np.ndarray, n_out: int, scale: float, axis: int) -> np.ndarray:
    n_in = arr.shape[axis]
    src = (np.arange(n_out) + 0.5) / scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    shape = [1] * arr.ndim
    shape[axis] = n_out
    frac = frac.reshape(shape)
    a = np.take(arr, i0, axis=axis)
    b = np.take(arr, i1, axis=axis)
    return a + (b - a) * frac


def resize_bilinear(img: ImageBuffer, scale: float) -> ImageBuffer:
    """Bilinear resampling with the half-pixel convention."""
    if not math.isfinite(scale) or scale <= 0:
        raise InvalidInputError(f"scale must be finite and positive, got {scale}")
    if scale == 1.0:
        return img
    w_out = int(round_half_away(img.width * scale))
    h_out = int(round_half_away(img.height * scale))
    if w_out < 1 or h_out < 1:
        raise InvalidInputError(f"scale {scale} leaves an empty image")
    out = _resize_axis(img.data, h_out, scale, 0)
    out = _resize_axis(out, w_out, scale, 1)
    return ImageBuffer(out)


def _anchors(dim: int, patch: int, stride: int) -> list[int]:
    anchors = list(range(0, dim - patch + 1, stride))
    if anchors[-1] != dim - patch:
        anchors.append(dim - patch)
    return anchors


def extract_patches(img: ImageBuffer, patch: int, stride: int) -> list[ImageBuffer]:
    """Square patches in raster order; the last row/column is anchored to the image edge."""
    if stride < 1:
        raise InvalidInputError("stride must be >= 1")
    if patch < 1 or patch > min(img.width, img.height):
        raise InvalidInputError(f"patch {patch} does not fit a {img.width}x{img.height} image")
    return [
        ImageBuffer(img.data[y:y + patch, x:x + patch])
        for y in _anchors(img.height, patch, stride)
        for x in _anchors(img.width, patch, stride)
    ]


def fit_to_side(img: ImageBuffer, side: int) -> ImageBuffer:
    """Bring an image to side x side: upscale when too small, then center-crop."""
    short = min(img.width, img.height)
    if short < side:
        img = resize_bilinear(img, side / short)
    return center_crop(img, side, side)


def hflip(img: ImageBuffer) -> ImageBuffer:
    return ImageBuffer(img.data[:, ::-1])


# --- manifests ---------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    source: str
    seed: int | None = None

    @property
    def split(self) -> str:
        """First path component; gen_dataset lays files out as <split>/<class>/..."""
        return Path(self.path).parts[0]


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    root: str = "."

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise InvalidInputError("manifest paths must be unique")
        for e in self.entries:
            if e.label not in (0, 1):
                raise InvalidInputError(f"{e.path}: label must be 0 or 1")

    def __len__(self):
        return len(self.entries)

    def resolve(self, entry: ManifestEntry) -> str:
        return os.path.join(self.root, entry.path)

    def split(self, name: str) -> DatasetManifest:
        return DatasetManifest(tuple(e for e in self.entries if e.split == name), self.root)

    def splits(self) -> list[str]:
        return sorted({e.split for e in self.entries})

    def sources(self) -> list[str]:
        return sorted({e.source for e in self.entries})

    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=np.int64)

    def check_trainable(self) -> None:
        labels = {e.label for e in self.entries}
        if labels != {0, 1}:
            raise DegenerateDataError(f"training set needs both labels, found {sorted(labels)}")


def write_manifest(manifest: DatasetManifest, path) -> None:
    lines = []
    for e in manifest.entries:
        seed = "" if e.seed is None else str(e.seed)
        for field in (e.path, e.source):
            if "\t" in field or "\n" in field:
                raise InvalidInputError(f"tab or newline in manifest field {field!r}")
        lines.append(f"{e.path}\t{e.label}\t{e.source}\t{seed}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_manifest(path) -> DatasetManifest:
    """Parse a tab-separated manifest; relative paths resolve against its directory."""
    entries = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise FormatError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(fields)}")
        p, label, source, seed = fields
        try:
            entries.append(ManifestEntry(p, int(label), source, int(seed) if seed else None))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    return DatasetManifest(tuple(entries), str(Path(path).parent))
