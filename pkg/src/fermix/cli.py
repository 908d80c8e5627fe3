"""Command-line entry point.

Subcommands: ingest, preprocess, build-merged, train, ablation, cross,
report. Exit codes: 0 on success (all cells ok), 2 when some grid cells
failed, 1 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from fermix import __version__
from fermix.alignment import build_augmented_merged, preprocess_variants
from fermix.detection import DetectionCache, ExternalDetector, FixtureDetector, detect
from fermix.errors import ConfigError, FermixError
from fermix.experiments import (
    ResultsTable,
    load_config,
    render,
    run_ablation_grid,
    run_cross_dataset,
)
from fermix.loaders import KDEF_DEFAULT_POSES, load_ckplus, load_ferplus, load_kdef
from fermix.manifest import (
    DatasetManifest,
    default_meta,
    load_manifest,
    merge,
    save_manifest,
    split,
    standardize,
)
from fermix.models import ARCHITECTURES, ModelSpec
from fermix.synth import synth_generate
from fermix.training import TrainConfig, train


def _cmd_ingest(args: argparse.Namespace) -> int:
    cfg_path = Path(args.config)
    if not cfg_path.is_file():
        raise ConfigError(f"ingest config not found: {cfg_path}")
    raw = yaml.safe_load(cfg_path.read_text(encoding="utf-8")) or {}
    seed = int(raw.get("seed", 0))
    sources = raw.get("sources") or []
    if not sources:
        raise ConfigError(f"{cfg_path}: no sources configured")

    manifests: list[DatasetManifest] = []
    for src in sources:
        kind = str(src.get("type", "")).lower()
        if kind == "synth":
            manifests.append(synth_generate(int(src.get("n_per_class", 10)), seed))
        elif kind == "ferplus":
            records = load_ferplus(src["csv"])
            manifests.append(
                DatasetManifest([standardize(r) for r in records], default_meta(seed))
            )
        elif kind == "ckplus":
            records = load_ckplus(src["root"])
            manifests.append(
                DatasetManifest([standardize(r) for r in records], default_meta(seed))
            )
        elif kind == "kdef":
            poses = frozenset(src.get("poses", KDEF_DEFAULT_POSES))
            records = load_kdef(src["root"], poses)
            manifests.append(
                DatasetManifest([standardize(r) for r in records], default_meta(seed))
            )
        else:
            raise ConfigError(f"{cfg_path}: unknown source type {kind!r}")

    merged = merge(manifests)
    ratios_raw = raw.get("split") or {"train": 0.8, "val": 0.1, "test": 0.1}
    ratios = (float(ratios_raw["train"]), float(ratios_raw["val"]), float(ratios_raw["test"]))
    assigned = split(merged, ratios, seed)
    path = save_manifest(assigned, Path(args.out))
    counts = ", ".join(f"{k.canonical_name}={v}" for k, v in assigned.class_counts.items())
    print(f"wrote {path} ({len(assigned)} samples: {counts})")
    return 0


def _make_detector(spec: str):
    kind, _, value = spec.partition(":")
    if kind == "fixture" and value:
        return FixtureDetector.from_sidecar(value)
    if kind == "external" and value:
        return ExternalDetector(value.split())
    raise ConfigError(f"detector must be fixture:PATH or external:CMD, got {spec!r}")


def _cmd_preprocess(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    detector = _make_detector(args.detector)
    cache = DetectionCache()
    for sample in manifest:
        detect(detector, sample, cache)
    out = Path(args.out)
    cache.save(out / "detections.csv")
    aligned, cropped = preprocess_variants(manifest, cache, args.mask_w, args.mask_h)
    aligned_path = save_manifest(aligned, out / "aligned")
    cropped_path = save_manifest(cropped, out / "cropped")
    print(f"wrote {aligned_path} ({len(aligned)} samples)")
    print(f"wrote {cropped_path} ({len(cropped)} samples)")
    print(f"wrote {out / 'detections.csv'} ({len(cache)} entries)")
    return 0


def _cmd_build_merged(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    cache = DetectionCache.load(args.detections)
    merged = build_augmented_merged(manifest, cache, args.mask_w, args.mask_h)
    path = save_manifest(merged, Path(args.out))
    print(f"wrote {path} ({len(merged)} samples from {len(manifest)} originals)")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    spec = ModelSpec(architecture=args.arch)
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        early_stop_patience=args.patience,
        seed=args.seed,
        augment=args.augment == "on",
        weighted_sampler=args.sampler == "on",
    )
    out_dir = Path(args.out)
    checkpoint, logs = train(manifest, spec, config, out_dir=out_dir)
    summary = {
        "architecture": args.arch,
        "best_epoch": checkpoint.epoch,
        "best_val_accuracy": checkpoint.val_accuracy,
        "epochs_run": len(logs),
        "manifest_fingerprint": checkpoint.manifest_fingerprint,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    print(
        f"best val accuracy {checkpoint.val_accuracy:.4f} at epoch {checkpoint.epoch} "
        f"({len(logs)} epochs run); checkpoint in {out_dir}"
    )
    return 0


def _grid_exit(table: ResultsTable) -> int:
    return 2 if any(c.error for c in table.cells.values()) else 0


def _cmd_ablation(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.jobs is not None:
        config.jobs = args.jobs
    table = run_ablation_grid(config)
    render(table, Path(args.out))
    print(f"rendered {len(table.cells)} cells to {args.out}")
    return _grid_exit(table)


def _cmd_cross(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.jobs is not None:
        config.jobs = args.jobs
    table = run_cross_dataset(config)
    render(table, Path(args.out))
    print(f"rendered {len(table.cells)} cells to {args.out}")
    return _grid_exit(table)


def _cmd_report(args: argparse.Namespace) -> int:
    results_path = Path(args.results)
    if not results_path.is_file():
        raise ConfigError(f"results file not found: {results_path}")
    table = ResultsTable.from_record(json.loads(results_path.read_text(encoding="utf-8")))
    formats = tuple(args.format.split(","))
    render(table, Path(args.out), formats)
    print(f"rendered {results_path} as {','.join(formats)} into {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fermix")
    parser.add_argument("--version", action="version", version=f"fermix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load sources, harmonize, merge, split, save manifest")
    p.add_argument("--config", required=True, help="ingest YAML (sources, split, seed)")
    p.add_argument("--out", required=True, help="output manifest directory")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("preprocess", help="detect faces, build aligned and cropped manifests")
    p.add_argument("--manifest", required=True)
    p.add_argument("--detector", required=True, help="fixture:PATH or external:CMD")
    p.add_argument("--out", required=True)
    p.add_argument("--mask-w", type=int, default=10)
    p.add_argument("--mask-h", type=int, default=14)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("build-merged", help="union of original+aligned+cropped variants")
    p.add_argument("--manifest", required=True)
    p.add_argument("--detections", required=True, help="detection sidecar file")
    p.add_argument("--out", required=True)
    p.add_argument("--mask-w", type=int, default=10)
    p.add_argument("--mask-h", type=int, default=14)
    p.set_defaults(func=_cmd_build_merged)

    p = sub.add_parser("train", help="train one model on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--arch", required=True, choices=ARCHITECTURES)
    p.add_argument("--augment", choices=("on", "off"), default="off")
    p.add_argument("--sampler", choices=("on", "off"), default="off")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--patience", type=int, default=10)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("ablation", help="run the architecture x stage x flags grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=_cmd_ablation)

    p = sub.add_parser("cross", help="run the train-source x test-source matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=_cmd_cross)

    p = sub.add_parser("report", help="re-render a results.json")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", default="text,json,heatmap,csv,report")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FermixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
