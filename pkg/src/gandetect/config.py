"""Benchmark configuration files (TOML).

A minimal config::

    seed = 0
    out = "runs/default"

    [dataset]            # synthesized; or give manifest = "path/manifest.tsv"
    side = 64
    n_train = 1000       # per class
    n_test = 500         # per class
    artifact_gain = 0.8

    [train]
    epochs = 20

    [sweep]
    jpeg = [100, 90, 80, 70, 60, 50, 40, 30]
    scales = [0.5, 0.7, 0.9, 1.0, 1.3, 1.6, 2.0]

    [[detectors]]
    name = "spec-peaks"

    [[detectors]]
    name = "cnn-nodown"
    augment = "blur-jpeg"

Generators default to the train/test split of
:func:`gandetect.synthgen.default_generators`; explicit lists go in
``[[dataset.train_generators]]`` / ``[[dataset.test_generators]]`` tables
with keys ``tag``, ``kernel`` (a name from ``KERNELS`` or a 3x3 list),
``stages``, ``upsampler`` and ``artifact_gain``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .detectors import DetectorSpec
from .imagecore import InvalidInputError
from .learn.config import TrainConfig
from .synthgen import KERNELS, GeneratorConfig, SynthSpec, default_generators

DEFAULT_JPEG = (100, 90, 80, 70, 60, 50, 40, 30)
DEFAULT_SCALES = (0.5, 0.7, 0.9, 1.0, 1.3, 1.6, 2.0)


class ConfigError(InvalidInputError):
    """The configuration file is unreadable or inconsistent."""


@dataclass(frozen=True)
class BenchConfig:
    detectors: tuple[DetectorSpec, ...]
    train: TrainConfig
    synth: SynthSpec | None = None
    manifest: str | None = None
    jpeg: tuple[int, ...] = DEFAULT_JPEG
    scales: tuple[float, ...] = DEFAULT_SCALES
    out: str = "runs/default"
    seed: int = 0
    workers: int = 1
    source_path: str = ""

    def detector(self, name: str) -> DetectorSpec:
        for d in self.detectors:
            if d.name == name:
                return d
        raise ConfigError(f"detector {name!r} is not configured")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def manifest_path(self) -> Path:
        if self.manifest is not None:
            return Path(self.manifest)
        return self.out_dir / "data" / "manifest.tsv"

    def model_path(self, name: str) -> Path:
        return self.out_dir / "models" / f"{name}.model"

    def with_seed(self, seed: int) -> BenchConfig:
        synth = replace(self.synth, seed=seed) if self.synth is not None else None
        return replace(self, seed=seed, synth=synth, train=replace(self.train, seed=seed))


def _check_keys(where: str, table: dict, allowed) -> None:
    unknown = set(table) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _generator(d: dict, side: int, gain: float) -> GeneratorConfig:
    _check_keys("generator", d, ("tag", "kernel", "stages", "upsampler", "artifact_gain"))
    if "tag" not in d:
        raise ConfigError("every generator needs a tag")
    kernel = d.get("kernel", "k-a")
    if isinstance(kernel, str):
        if kernel not in KERNELS:
            raise ConfigError(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)} or give a 3x3 list")
        kernel = KERNELS[kernel]
    stages = int(d.get("stages", 1))
    return GeneratorConfig(str(d["tag"]), side // 2 ** stages, stages, d.get("upsampler", "zero-insertion"),
                           kernel, float(d.get("artifact_gain", gain)))


def _synth(d: dict, seed: int) -> SynthSpec:
    _check_keys("[dataset]", d, ("side", "n_train", "n_test", "artifact_gain", "alpha_range",
                                 "train_generators", "test_generators"))
    side = int(d.get("side", 64))
    gain = float(d.get("artifact_gain", 0.8))
    train, test = default_generators(side, gain)
    if "train_generators" in d:
        train = tuple(_generator(g, side, gain) for g in d["train_generators"])
    if "test_generators" in d:
        test = tuple(_generator(g, side, gain) for g in d["test_generators"])
    return SynthSpec(side, int(d.get("n_train", 1000)), int(d.get("n_test", 500)),
                     tuple(d.get("alpha_range", (0.8, 1.6))), train, test, seed)


def _train(d: dict, seed: int, side: int) -> TrainConfig:
    allowed = [f.name for f in fields(TrainConfig) if f.name not in ("seed", "augment")]
    _check_keys("[train]", d, allowed)
    return TrainConfig(**{"side": side, **d, "seed": seed})


def _detector(d: dict) -> DetectorSpec:
    _check_keys("[[detectors]]", d, ("name", "augment", "patch", "stride", "train"))
    if "name" not in d:
        raise ConfigError("every detector needs a name")
    overrides = dict(d.get("train", {}))
    _check_keys(f"detector {d['name']} [train]", overrides, ("epochs", "batch", "lr", "momentum", "linear_iters"))
    augment = d.get("augment")
    return DetectorSpec(d["name"], None if augment == "none" else augment, int(d.get("patch", 32)),
                        int(d.get("stride", 16)), overrides)


def parse_config(doc: dict, source_path: str = "") -> BenchConfig:
    try:
        _check_keys("config", doc, ("seed", "out", "workers", "dataset", "train", "sweep", "detectors"))
        seed = int(doc.get("seed", 0))
        ds = dict(doc.get("dataset", {}))
        manifest = ds.pop("manifest", None)
        synth = None
        if manifest is None:
            synth = _synth(ds, seed)
        elif ds:
            raise ConfigError("[dataset] takes either a manifest path or synthesis settings, not both")
        side = synth.side if synth is not None else int(doc.get("train", {}).get("side", 64))
        train = _train(dict(doc.get("train", {})), seed, side)
        sweep = dict(doc.get("sweep", {}))
        _check_keys("[sweep]", sweep, ("jpeg", "scales"))
        jpeg = tuple(int(q) for q in sweep.get("jpeg", DEFAULT_JPEG))
        scales = tuple(float(s) for s in sweep.get("scales", DEFAULT_SCALES))
        if not jpeg or not scales:
            raise ConfigError("sweep grids must be non-empty")
        for q in jpeg:
            if not 1 <= q <= 100:
                raise ConfigError(f"JPEG quality {q} outside [1, 100]")
        for s in scales:
            if not (math.isfinite(s) and s > 0):
                raise ConfigError(f"scale factor {s} must be positive")
        dets = tuple(_detector(d) for d in doc.get("detectors", ()))
        if not dets:
            raise ConfigError("configure at least one [[detectors]] entry")
        names = [d.name for d in dets]
        if len(set(names)) != len(names):
            raise ConfigError("detector names must be unique")
        workers = int(doc.get("workers", 1))
        if workers < 1:
            raise ConfigError("workers must be >= 1")
        out = str(doc.get("out", "runs/default"))
        if source_path and not Path(out).is_absolute():
            out = str(Path(source_path).parent / out)
        if manifest is not None and source_path and not Path(manifest).is_absolute():
            manifest = str(Path(source_path).parent / manifest)
    except ConfigError:
        raise
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ConfigError(f"{source_path or 'config'}: {exc}") from exc
    return BenchConfig(dets, train, synth, manifest, jpeg, scales, out, seed, workers, source_path)


def load_config(path) -> BenchConfig:
    path = Path(path)
    raw = path.read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(doc, str(path))

