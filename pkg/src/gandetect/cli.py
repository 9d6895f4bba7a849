"""Command-line benchmark harness: ``gandetect synth|train|eval|sweep|inspect``.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O or file
format error, 4 data that cannot support the request.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import metrics
from .config import BenchConfig, ConfigError, load_config
from .degrade import jpeg_roundtrip
from .detectors import ROSTER, DetectorSpec, TrainedDetector, check_name, train_detector
from .imagecore import (
    DegenerateDataError, FormatError, InvalidInputError, load_image, read_manifest, resize_bilinear, save_image,
)
from .residual import export_fingerprint, estimate_fingerprint
from .spectral import average_spectrum
from .synthgen import gen_dataset

COLUMNS = ("detector", "perturbation", "parameter", "auc", "acc_at_0.5", "pd_at_5", "pd_at_1", "n_pos", "n_neg")
EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DEGENERATE = 0, 2, 3, 4


class UsageError(InvalidInputError):
    pass


# --- data --------------------------------------------------------------------


def _load_config(args) -> BenchConfig:
    if not args.config:
        raise UsageError("--config is required")
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "out", None) and args.command in ("synth", "train", "sweep"):
        cfg = replace(cfg, out=args.out)
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        cfg = replace(cfg, workers=args.workers)
    return cfg


def load_split(manifest_path, split: str):
    """(images, labels, sources) of one split, in manifest order."""
    manifest = read_manifest(manifest_path)
    if split not in manifest.splits():
        raise UsageError(f"split {split!r} not in manifest; found {manifest.splits()}")
    part = manifest.split(split)
    images = [load_image(part.resolve(e)) for e in part.entries]
    return images, part.labels(), [e.source for e in part.entries]


def _manifest_for(args, cfg: BenchConfig | None) -> Path:
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    if cfg is None:
        raise UsageError("give --manifest or --config")
    return cfg.manifest_path()


# --- reporting ---------------------------------------------------------------


def metrics_row(detector: str, perturbation: str, parameter: str, scores, labels) -> dict:
    s = metrics.ScoreSet.from_labels(scores, labels)
    return {"detector": detector, "perturbation": perturbation, "parameter": parameter, **metrics.summarize(s)}


def _sort_key(row):
    p = row["parameter"]
    return (row["detector"], row["perturbation"], float("-inf") if p == "" else float(p))


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in sorted(rows, key=_sort_key):
        w.writerow([repr(v) if isinstance(v, float) else v for v in (row[c] for c in COLUMNS)])
    return buf.getvalue()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# --- sweep cells -------------------------------------------------------------

_STATE = {}


def _init_worker(model_paths: dict, manifest_path: str) -> None:
    _STATE["models"] = {name: TrainedDetector.load(p) for name, p in model_paths.items()}
    images, labels, _ = load_split(manifest_path, "test")
    _STATE["images"], _STATE["labels"] = images, labels


def perturb(img, perturbation: str, parameter: str):
    if perturbation == "none":
        return img
    if perturbation == "jpeg":
        return jpeg_roundtrip(img, int(parameter))
    return resize_bilinear(img, float(parameter))


def _cell(args) -> dict:
    detector, perturbation, parameter = args
    det = _STATE["models"][detector]
    scores = [det.score_one(perturb(img, perturbation, parameter)) for img in _STATE["images"]]
    return metrics_row(detector, perturbation, parameter, scores, _STATE["labels"])


def sweep_cells(cfg: BenchConfig) -> list[tuple[str, str, str]]:
    cells = []
    for d in cfg.detectors:
        cells.append((d.name, "none", ""))
        cells += [(d.name, "jpeg", str(q)) for q in cfg.jpeg]
        cells += [(d.name, "resize", format(s, "g")) for s in cfg.scales]
    return cells


def run_sweep(cfg: BenchConfig, model_paths: dict, manifest_path) -> str:
    cells = sweep_cells(cfg)
    init = (model_paths, str(manifest_path))
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers, initializer=_init_worker, initargs=init) as ex:
            rows = list(ex.map(_cell, cells))
    else:
        _init_worker(*init)
        try:
            rows = [_cell(c) for c in cells]
        finally:
            _STATE.clear()
    return format_csv(rows)


# --- commands ----------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    if cfg.synth is None:
        raise UsageError("config names an existing manifest; there is nothing to synthesize")
    out = cfg.out_dir / "data"
    gen_dataset(cfg.synth, out, cfg.workers)
    print(out / "manifest.tsv")
    return EXIT_OK


def _spec_for(cfg: BenchConfig, name: str) -> DetectorSpec:
    check_name(name)
    for d in cfg.detectors:
        if d.name == name:
            return d
    return DetectorSpec(name)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    names = [args.detector] if args.detector else [d.name for d in cfg.detectors]
    specs = [_spec_for(cfg, n) for n in names]
    images, labels, sources = load_split(_manifest_for(args, cfg), "train")
    if set(labels.tolist()) != {0, 1}:
        raise DegenerateDataError(f"train split needs both labels, found {sorted(set(labels.tolist()))}")
    for spec in specs:
        det = train_detector(spec, images, labels, sources, cfg.train)
        path = Path(args.model) if args.model and len(specs) == 1 else cfg.model_path(spec.name)
        path.parent.mkdir(parents=True, exist_ok=True)
        det.save(path)
        print(path)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config) if args.config else None
    if args.model:
        model = Path(args.model)
    elif cfg is not None and args.detector:
        model = cfg.model_path(args.detector)
    else:
        raise UsageError("give --model, or --config with --detector")
    det = TrainedDetector.load(model)
    images, labels, _ = load_split(_manifest_for(args, cfg), args.split)
    row = metrics_row(det.name, "none", "", det.score(images), labels)
    text = format_csv([row])
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
    elif cfg is not None:
        out = cfg.out_dir / "eval" / f"{det.name}_{args.split}.csv"
    else:
        out = None
    if out is not None:
        _write_text(out, text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    paths = {}
    for d in cfg.detectors:
        p = cfg.model_path(d.name)
        if not p.exists():
            raise UsageError(f"no trained model for detector {d.name!r} at {p}; run 'gandetect train' first")
        paths[d.name] = str(p)
    text = run_sweep(cfg, paths, _manifest_for(args, cfg))
    out = cfg.out_dir / "sweep.csv"
    _write_text(out, text)
    print(out)
    return EXIT_OK


def cmd_inspect(args) -> int:
    cfg = load_config(args.config) if args.config else None
    if not args.source:
        raise UsageError("--source is required")
    manifest = read_manifest(_manifest_for(args, cfg))
    entries = [e for e in manifest.entries if e.source == args.source]
    if args.split:
        entries = [e for e in entries if e.split == args.split]
    if not entries:
        raise UsageError(f"no images with source tag {args.source!r}; found {manifest.sources()}")
    images = [load_image(manifest.resolve(e)) for e in entries]
    if args.out:
        out = Path(args.out)
    elif cfg is not None:
        out = cfg.out_dir / "inspect" / f"{args.source}_{args.what}.pgm"
    else:
        out = Path(f"{args.source}_{args.what}.pgm")
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.what == "avg-spectrum":
        save_image(average_spectrum(images), out)
    else:
        export_fingerprint(estimate_fingerprint(images, args.source), out)
    print(out)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep, "inspect": cmd_inspect}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gandetect", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="benchmark TOML file")
        return s

    s = add("synth", "generate the synthetic dataset")
    s.add_argument("--out", help="output directory (overrides the config)")
    s.add_argument("--seed", type=int, help="master seed (overrides the config)")
    s.add_argument("--workers", type=int)

    s = add("train", "train one detector (default: every configured detector)")
    s.add_argument("--detector", help=f"one of {', '.join(ROSTER)}")
    s.add_argument("--model", help="model file to write")
    s.add_argument("--manifest")
    s.add_argument("--out")
    s.add_argument("--seed", type=int)

    s = add("eval", "score one split and print the metrics row")
    s.add_argument("--model")
    s.add_argument("--detector")
    s.add_argument("--manifest")
    s.add_argument("--split", default="test")
    s.add_argument("--out", help="CSV file to write")

    s = add("sweep", "JPEG and resize robustness sweep over the test split")
    s.add_argument("--manifest")
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)

    s = add("inspect", "write an averaged spectrum or fingerprint as PGM")
    s.add_argument("--manifest")
    s.add_argument("--source", help="source tag from the manifest")
    s.add_argument("--what", choices=("avg-spectrum", "fingerprint"), default="avg-spectrum")
    s.add_argument("--split", help="restrict to one split")
    s.add_argument("--out", help="PGM file to write")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except DegenerateDataError as exc:
        print(f"gandetect: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (FormatError, OSError) as exc:
        print(f"gandetect: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, InvalidInputError) as exc:
        print(f"gandetect: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
