"""Binary model files.

Layout (all integers little-endian)::

    magic      8 bytes  b"GDMODEL\\0"
    version    u16
    kind       u16 length + ASCII      ("linear" | "cnn")
    variant    u16 length + ASCII      (CNN variant or feature extractor)
    meta       u32 length + UTF-8 JSON (detector settings)
    n_arrays   u16
    per array: u16 length + ASCII name, u8 ndim, ndim x u32 dims
    payload    float64 values of every array in header order, C order

A text sidecar (``<file>.txt``) records the config, its hash and the final loss.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..imagecore import FormatError

MAGIC = b"GDMODEL\0"
VERSION = 1


def _pack_str(s: str, width: str = "<H") -> bytes:
    b = s.encode("utf-8")
    return struct.pack(width, len(b)) + b


def encode(kind: str, variant: str, meta: dict, arrays: dict) -> bytes:
    out = [MAGIC, struct.pack("<H", VERSION), _pack_str(kind), _pack_str(variant)]
    out.append(_pack_str(json.dumps(meta, sort_keys=True), "<I"))
    out.append(struct.pack("<H", len(arrays)))
    payload = []
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        out.append(_pack_str(name))
        out.append(struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        payload.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(out + payload)


class _Reader:
    def __init__(self, buf: bytes, where: str):
        self.buf, self.pos, self.where = buf, 0, where

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.where}: truncated model file")
        b = self.buf[self.pos:self.pos + n]
        self.pos += n
        return b

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self, width: str = "<H") -> str:
        (n,) = self.unpack(width)
        return self.take(n).decode("utf-8")


def decode(buf: bytes, where: str = "model"):
    r = _Reader(buf, where)
    if r.take(len(MAGIC)) != MAGIC:
        raise FormatError(f"{where}: not a model file")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise FormatError(f"{where}: unsupported model version {version}")
    kind = r.string()
    variant = r.string()
    meta = json.loads(r.string("<I"))
    (count,) = r.unpack("<H")
    specs = []
    for _ in range(count):
        name = r.string()
        (ndim,) = r.unpack("<B")
        specs.append((name, r.unpack(f"<{ndim}I") if ndim else ()))
    arrays = {}
    for name, shape in specs:
        n = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(r.take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(buf):
        raise FormatError(f"{where}: trailing bytes after payload")
    return kind, variant, meta, arrays


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def write_model(path, kind, variant, meta, arrays, config: dict, final_loss: float) -> None:
    path = Path(path)
    path.write_bytes(encode(kind, variant, meta, arrays))
    lines = [
        f"kind\t{kind}",
        f"variant\t{variant}",
        f"config_hash\t{config_hash(config)}",
        f"final_loss\t{final_loss!r}",
        f"config\t{json.dumps(config, sort_keys=True)}",
    ]
    Path(str(path) + ".txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_model(path):
    return decode(Path(path).read_bytes(), str(path))
