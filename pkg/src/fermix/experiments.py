"""Config-driven experiment grids: ablations and the cross-dataset matrix.

Experiments are declared in one YAML config (schema in the README). Every
cell runs in a content-addressed run directory keyed by the hash of its
resolved configuration plus manifest fingerprints, which makes grids
resumable: rerunning skips cells whose run directory already holds a valid
result. A failed cell is recorded and never aborts the grid.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from fermix import __version__
from fermix.augment import AugmentPolicy
from fermix.errors import ConfigError
from fermix.manifest import DatasetManifest, load_manifest
from fermix.metrics import (
    ConfusionMatrix,
    confusion,
    confusion_to_csv,
    record_to_report,
    render_report_text,
    report,
    report_to_record,
    save_confusion_heatmap,
)
from fermix.models import ARCHITECTURES, ModelSpec
from fermix.training import TrainConfig, evaluate, load_model, train

DATA_ROOT_ENV = "FERMIX_DATA_ROOT"
STAGES = ("original", "aligned", "cropped", "augmented_merged")


@dataclass
class ExperimentConfig:
    seed: int
    data_root: Path
    runs_root: Path
    manifests: dict[str, Path]  # stage or source name -> manifest path
    train: TrainConfig
    architectures: list[str] = field(default_factory=lambda: ["resnet18"])
    stages: list[str] = field(default_factory=lambda: ["original"])
    flag_grid: list[dict[str, bool]] = field(
        default_factory=lambda: [{"augment": False, "sampler": False}]
    )
    cross_train: dict[str, Path] = field(default_factory=dict)
    cross_test: dict[str, Path] = field(default_factory=dict)
    cross_architecture: str = "resnet18"
    jobs: int = 1


def load_config(path: Path | str) -> ExperimentConfig:
    """Parse and validate the YAML experiment config."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    data_root = Path(os.environ.get(DATA_ROOT_ENV) or raw.get("data_root", "."))
    seed = int(raw.get("seed", 0))

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else data_root / candidate

    manifests = {
        name: resolve(str(p)) for name, p in (raw.get("manifests") or {}).items()
    }

    train_raw = dict(raw.get("train") or {})
    augment_raw = dict(raw.get("augment") or {})
    sampler_raw = dict(raw.get("sampler") or {})
    policy = AugmentPolicy(
        n_ops=int(augment_raw.get("n_ops", 2)),
        magnitude=int(augment_raw.get("magnitude", 9)),
    )
    sampler_seed = sampler_raw.get("seed")
    try:
        train_cfg = TrainConfig(
            epochs=int(train_raw.get("epochs", 100)),
            learning_rate=float(train_raw.get("learning_rate", 0.001)),
            batch_size=int(train_raw.get("batch_size", 64)),
            early_stop_patience=int(train_raw.get("early_stop_patience", 10)),
            seed=seed,
            augment=bool(augment_raw.get("enabled", False)),
            weighted_sampler=bool(sampler_raw.get("enabled", False)),
            sampler_seed=None if sampler_seed is None else int(sampler_seed),
            augment_policy=policy,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: bad training settings: {exc}") from exc

    ablation_raw = dict(raw.get("ablation") or {})
    architectures = [str(a) for a in ablation_raw.get("architectures", ["resnet18"])]
    for arch in architectures:
        if arch not in ARCHITECTURES:
            raise ConfigError(f"{path}: unknown architecture {arch!r}")
    stages = [str(s) for s in ablation_raw.get("stages", ["original"])]
    for stage in stages:
        if stage not in STAGES:
            raise ConfigError(f"{path}: unknown stage {stage!r}")
    flag_grid = [
        {"augment": bool(f.get("augment", False)), "sampler": bool(f.get("sampler", False))}
        for f in ablation_raw.get(
            "flag_grid", [{"augment": train_cfg.augment, "sampler": train_cfg.weighted_sampler}]
        )
    ]

    cross_raw = dict(raw.get("cross") or {})
    cross_train = {
        str(n): resolve(str(p)) for n, p in (cross_raw.get("train_sources") or {}).items()
    }
    cross_test = {
        str(n): resolve(str(p)) for n, p in (cross_raw.get("test_sources") or {}).items()
    }
    cross_architecture = str(cross_raw.get("architecture", "resnet18"))
    if cross_architecture not in ARCHITECTURES:
        raise ConfigError(f"{path}: unknown cross architecture {cross_architecture!r}")

    runs_root = resolve(str(raw.get("runs_root", "runs")))
    return ExperimentConfig(
        seed=seed,
        data_root=data_root,
        runs_root=runs_root,
        manifests=manifests,
        train=train_cfg,
        architectures=architectures,
        stages=stages,
        flag_grid=flag_grid,
        cross_train=cross_train,
        cross_test=cross_test,
        cross_architecture=cross_architecture,
        jobs=int(raw.get("jobs", 1)),
    )


@dataclass
class CellResult:
    key: tuple[str, ...]
    accuracy: float | None
    confusion_counts: list[list[int]] | None
    report: dict | None
    run_id: str
    seed: int
    checkpoint_path: str | None
    manifest_fingerprints: dict[str, str]
    error: str | None = None

    def to_record(self) -> dict:
        return {
            "key": list(self.key),
            "accuracy": self.accuracy,
            "confusion": self.confusion_counts,
            "report": self.report,
            "run_id": self.run_id,
            "seed": self.seed,
            "checkpoint": self.checkpoint_path,
            "manifest_fingerprints": self.manifest_fingerprints,
            "error": self.error,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CellResult":
        return cls(
            key=tuple(rec["key"]),
            accuracy=rec["accuracy"],
            confusion_counts=rec["confusion"],
            report=rec["report"],
            run_id=rec["run_id"],
            seed=rec["seed"],
            checkpoint_path=rec["checkpoint"],
            manifest_fingerprints=rec["manifest_fingerprints"],
            error=rec.get("error"),
        )


@dataclass
class ResultsTable:
    name: str
    row_labels: list[str]
    col_labels: list[str]
    cells: dict[tuple[str, ...], CellResult]

    def to_record(self) -> dict:
        return {
            "fermix": __version__,
            "name": self.name,
            "rows": self.row_labels,
            "cols": self.col_labels,
            "cells": [self.cells[k].to_record() for k in sorted(self.cells)],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ResultsTable":
        cells = {tuple(c["key"]): CellResult.from_record(c) for c in rec["cells"]}
        return cls(
            name=rec["name"], row_labels=rec["rows"], col_labels=rec["cols"], cells=cells
        )


def _cell_run_id(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _train_config_for(base: TrainConfig, flags: dict[str, bool], seed: int) -> TrainConfig:
    return TrainConfig(
        epochs=base.epochs,
        learning_rate=base.learning_rate,
        batch_size=base.batch_size,
        early_stop_patience=base.early_stop_patience,
        seed=seed,
        augment=flags.get("augment", False),
        weighted_sampler=flags.get("sampler", False),
        sampler_seed=base.sampler_seed,
        augment_policy=base.augment_policy,
        deterministic=base.deterministic,
    )


def run_cell(
    key: tuple[str, ...],
    train_manifest_path: Path,
    test_manifest_paths: dict[str, Path],
    architecture: str,
    train_cfg: TrainConfig,
    runs_root: Path,
) -> list[CellResult]:
    """Train one model and evaluate it on each test manifest's test split.

    Returns one CellResult per test manifest; all share the run directory.
    The cell is skipped (loaded from disk) when a valid prior result exists.
    """
    train_manifest = load_manifest(train_manifest_path)
    fingerprints = {"train": train_manifest.fingerprint()}
    test_manifests: dict[str, DatasetManifest] = {}
    for name, p in test_manifest_paths.items():
        test_manifests[name] = load_manifest(p)
        fingerprints[f"test:{name}"] = test_manifests[name].fingerprint()

    from fermix.training import _config_dict  # stable dict form for hashing

    run_id = _cell_run_id(
        {
            "fermix": __version__,
            "key": list(key),
            "architecture": architecture,
            "train_config": _config_dict(train_cfg),
            "fingerprints": fingerprints,
        }
    )
    run_dir = runs_root / run_id
    result_path = run_dir / "result.json"
    if result_path.is_file():
        records = json.loads(result_path.read_text(encoding="utf-8"))
        return [CellResult.from_record(r) for r in records]

    spec = ModelSpec(architecture=architecture)
    checkpoint, _ = train(train_manifest, spec, train_cfg, out_dir=run_dir)
    model = load_model(checkpoint)

    results: list[CellResult] = []
    for name, test_manifest in test_manifests.items():
        test_split = test_manifest.restrict("test")
        images = test_split.pixel_array()
        labels = np.array([int(s.label) for s in test_split], dtype=np.int64)
        _, _, preds = evaluate(model, images, labels, train_cfg.batch_size)
        matrix = confusion(labels.tolist(), preds.tolist())
        rep = report(matrix)
        cell_key = key if len(test_manifests) == 1 else (*key, name)
        results.append(
            CellResult(
                key=cell_key,
                accuracy=rep.accuracy,
                confusion_counts=matrix.counts.tolist(),
                report=report_to_record(rep),
                run_id=run_id,
                seed=train_cfg.seed,
                checkpoint_path=str(run_dir / "checkpoint.pt"),
                manifest_fingerprints={
                    "train": fingerprints["train"],
                    "test": fingerprints[f"test:{name}"],
                },
            )
        )
    run_dir.mkdir(parents=True, exist_ok=True)
    result_path.write_text(
        json.dumps([r.to_record() for r in results], sort_keys=True, indent=1),
        encoding="utf-8",
    )
    return results


def _run_cell_task(args: tuple) -> tuple[tuple[str, ...], list[CellResult] | str]:
    key, train_path, test_paths, arch, cfg, runs_root = args
    try:
        return key, run_cell(key, train_path, test_paths, arch, cfg, runs_root)
    except Exception as exc:  # failure isolation: record, never abort the grid
        return key, f"{type(exc).__name__}: {exc}"


def _execute_cells(tasks: list[tuple], jobs: int) -> list[tuple[tuple[str, ...], list[CellResult] | str]]:
    if jobs <= 1:
        return [_run_cell_task(t) for t in tasks]
    # spawn, not fork: forking a process that already initialized torch can hang
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
        return list(pool.map(_run_cell_task, tasks))


def _validate_manifests(paths: dict[str, Path]) -> None:
    for name, p in paths.items():
        if not Path(p).is_file():
            raise ConfigError(f"manifest for {name!r} not found: {p}")
        load_manifest(p).validate()


def run_ablation_grid(config: ExperimentConfig) -> ResultsTable:
    """One run per (architecture x stage x flag combination)."""
    stage_paths = {}
    for stage in config.stages:
        if stage not in config.manifests:
            raise ConfigError(f"no manifest configured for stage {stage!r}")
        stage_paths[stage] = config.manifests[stage]
    _validate_manifests(stage_paths)

    tasks = []
    for arch in config.architectures:
        for stage in config.stages:
            for flags in config.flag_grid:
                flag_name = f"aug={'on' if flags['augment'] else 'off'},samp={'on' if flags['sampler'] else 'off'}"
                key = (arch, stage, flag_name)
                cfg = _train_config_for(config.train, flags, config.seed)
                tasks.append(
                    (key, stage_paths[stage], {stage: stage_paths[stage]}, arch, cfg, config.runs_root)
                )

    cells: dict[tuple[str, ...], CellResult] = {}
    for key, outcome in _execute_cells(tasks, config.jobs):
        if isinstance(outcome, str):
            cells[key] = CellResult(
                key=key, accuracy=None, confusion_counts=None, report=None,
                run_id="-", seed=config.seed, checkpoint_path=None,
                manifest_fingerprints={}, error=outcome,
            )
        else:
            for r in outcome:
                cells[key] = r
    flag_names = sorted({k[2] for k in cells})
    return ResultsTable(
        name="ablation",
        row_labels=[f"{a}/{s}" for a in config.architectures for s in config.stages],
        col_labels=flag_names,
        cells=cells,
    )


def run_cross_dataset(config: ExperimentConfig) -> ResultsTable:
    """Train per train-source, evaluate each model on every test source."""
    if not config.cross_train or not config.cross_test:
        raise ConfigError("cross experiment requires train_sources and test_sources")
    _validate_manifests(config.cross_train)
    _validate_manifests(config.cross_test)

    tasks = []
    for train_name, train_path in config.cross_train.items():
        cfg = _train_config_for(
            config.train,
            {"augment": config.train.augment, "sampler": config.train.weighted_sampler},
            config.seed,
        )
        tasks.append(
            ((train_name,), train_path, dict(config.cross_test), config.cross_architecture,
             cfg, config.runs_root)
        )

    cells: dict[tuple[str, ...], CellResult] = {}
    for key, outcome in _execute_cells(tasks, config.jobs):
        if isinstance(outcome, str):
            for test_name in config.cross_test:
                k = (*key, test_name)
                cells[k] = CellResult(
                    key=k, accuracy=None, confusion_counts=None, report=None,
                    run_id="-", seed=config.seed, checkpoint_path=None,
                    manifest_fingerprints={}, error=outcome,
                )
        else:
            for r in outcome:
                cells[r.key] = r
    return ResultsTable(
        name="cross_dataset",
        row_labels=list(config.cross_train),
        col_labels=list(config.cross_test),
        cells=cells,
    )


RENDER_FORMATS = ("text", "json", "heatmap", "csv", "report")


def render(
    results: ResultsTable,
    out_dir: Path | str,
    formats: tuple[str, ...] = RENDER_FORMATS,
) -> list[Path]:
    """Write the results table in the requested formats.

    text: accuracy grid; json: the full machine-readable table; heatmap:
    per-cell confusion heatmap PNGs; csv: per-cell confusion grids; report:
    per-cell per-class precision/recall/F1 tables. Rendering is a pure
    function of the table: rerendering identical inputs produces
    byte-identical files.
    """
    if not results.cells:
        raise ValueError("cannot render an empty results table")
    unknown = set(formats) - set(RENDER_FORMATS)
    if unknown:
        raise ValueError(f"unknown render format(s): {sorted(unknown)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if "json" in formats:
        path = out_dir / "results.json"
        path.write_text(
            json.dumps(results.to_record(), sort_keys=True, indent=1), encoding="utf-8"
        )
        written.append(path)

    if "text" in formats:
        lines = [f"== {results.name} =="]
        if results.name == "cross_dataset":
            width = max(12, *(len(c) for c in results.col_labels)) + 2
            corner = "train\\test"
            header = f"{corner:<{width}}" + "".join(
                f"{c:>{width}}" for c in results.col_labels
            )
            lines.append(header)
            for row in results.row_labels:
                cols = []
                for col in results.col_labels:
                    cell = results.cells.get((row, col))
                    if cell is None or cell.accuracy is None:
                        cols.append(f"{'ERROR':>{width}}")
                    else:
                        cols.append(f"{cell.accuracy * 100:>{width}.2f}")
                lines.append(f"{row:<{width}}" + "".join(cols))
        else:
            lines.append(f"{'architecture':<16} {'stage':<18} {'flags':<20} {'accuracy %':>10}")
            for key in sorted(results.cells):
                cell = results.cells[key]
                acc = "ERROR" if cell.accuracy is None else f"{cell.accuracy * 100:.2f}"
                lines.append(f"{key[0]:<16} {key[1]:<18} {key[2]:<20} {acc:>10}")
        path = out_dir / "results.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    def cell_name(key: tuple[str, ...]) -> str:
        return "__".join(key).replace("/", "-").replace(",", "_").replace("=", "-")

    if "heatmap" in formats:
        heat_dir = out_dir / "heatmaps"
        for key in sorted(results.cells):
            cell = results.cells[key]
            if cell.confusion_counts is None:
                continue
            matrix = ConfusionMatrix(counts=np.array(cell.confusion_counts, dtype=np.int64))
            written.append(
                save_confusion_heatmap(
                    matrix, heat_dir / f"{cell_name(key)}.png", title=" / ".join(key)
                )
            )

    if "csv" in formats:
        csv_dir = out_dir / "confusion"
        csv_dir.mkdir(parents=True, exist_ok=True)
        for key in sorted(results.cells):
            cell = results.cells[key]
            if cell.confusion_counts is None:
                continue
            matrix = ConfusionMatrix(counts=np.array(cell.confusion_counts, dtype=np.int64))
            path = csv_dir / f"{cell_name(key)}.csv"
            path.write_text(confusion_to_csv(matrix), encoding="utf-8")
            written.append(path)

    if "report" in formats:
        rep_dir = out_dir / "reports"
        rep_dir.mkdir(parents=True, exist_ok=True)
        for key in sorted(results.cells):
            cell = results.cells[key]
            if cell.report is None:
                continue
            path = rep_dir / f"{cell_name(key)}.txt"
            path.write_text(render_report_text(record_to_report(cell.report)), encoding="utf-8")
            written.append(path)
    return written
