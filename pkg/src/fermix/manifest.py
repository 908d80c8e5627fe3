"""Sample records, dataset manifests, and the merge/split/standardize operations.

A manifest is an ordered collection of 48x48 grayscale samples. Each record
carries its source dataset, a stable source key, a variant tag, and a split
assignment. All variants of one original image share a group id
(``source/source_key``) and are always assigned to the same split.

On-disk layout (see ``save_manifest``): a line-delimited ``manifest.csv``
whose first line is a ``#``-prefixed header recording the toolkit version,
luma coefficients, resize method, and seed, followed by one CSV row per
sample referencing a content-addressed grayscale PNG.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from PIL import Image

from fermix import __version__
from fermix.errors import LoaderError, ManifestError
from fermix.imageops import LUMA_WEIGHTS, bilinear_resize, quantize, to_grayscale
from fermix.labels import EmotionLabel, parse_label

VARIANTS = ("original", "aligned", "cropped")
SPLITS = ("train", "val", "test", "unassigned")
CANONICAL_SIZE = 48

SOURCE_FERPLUS = "FERPLUS"
SOURCE_CKPLUS = "CKPLUS"
SOURCE_KDEF = "KDEF"
SOURCE_SYNTH = "SYNTH"


@dataclass(eq=False)
class RawRecord:
    """One image as loaded from a source dataset, before harmonization."""

    pixels: np.ndarray  # (H, W) or (H, W, 3) uint8
    label: str  # canonical name or a transient label ("contempt", ...)
    source: str
    source_key: str

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.size == 0:
            raise ValueError(f"{self.source}/{self.source_key}: empty image payload")
        if not (arr.ndim == 2 or (arr.ndim == 3 and arr.shape[2] == 3)):
            raise ValueError(
                f"{self.source}/{self.source_key}: channel count must be 1 or 3, "
                f"got shape {arr.shape}"
            )


@dataclass(eq=False)
class ImageSample:
    """One harmonized 48x48 grayscale sample."""

    pixels: np.ndarray  # (48, 48) uint8
    label: EmotionLabel
    source: str
    source_key: str
    variant: str = "original"
    split: str = "unassigned"

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.shape != (CANONICAL_SIZE, CANONICAL_SIZE) or arr.dtype != np.uint8:
            raise ValueError(
                f"{self.source}/{self.source_key}: pixels must be (48, 48) uint8, "
                f"got {arr.shape} {arr.dtype}"
            )
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")

    @property
    def group_id(self) -> str:
        return f"{self.source}/{self.source_key}"

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.source, self.source_key, self.variant)


def default_meta(seed: int | None = None) -> dict[str, str]:
    return {
        "fermix": __version__,
        "luma": ",".join(str(w) for w in LUMA_WEIGHTS),
        "resize": "bilinear",
        "seed": "-" if seed is None else str(seed),
    }


class DatasetManifest:
    """Ordered sample collection with per-class counts and group-aware helpers."""

    def __init__(self, samples: Iterable[ImageSample], meta: dict[str, str] | None = None):
        self.samples: list[ImageSample] = list(samples)
        self.meta: dict[str, str] = dict(meta) if meta is not None else default_meta()
        self._counts = self._recount()
        self.validate()

    def _recount(self) -> dict[EmotionLabel, int]:
        counts = {label: 0 for label in EmotionLabel}
        for s in self.samples:
            counts[s.label] += 1
        return counts

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[ImageSample]:
        return iter(self.samples)

    def __getitem__(self, idx: int) -> ImageSample:
        return self.samples[idx]

    @property
    def class_counts(self) -> dict[EmotionLabel, int]:
        return dict(self._counts)

    def validate(self) -> None:
        """Check stored counts against the records and key uniqueness."""
        recomputed = self._recount()
        if recomputed != self._counts:
            raise ManifestError("stored class counts disagree with records")
        if sum(self._counts.values()) != len(self.samples):
            raise ManifestError("class counts do not sum to the record count")
        seen: set[tuple[str, str, str]] = set()
        for s in self.samples:
            if s.key in seen:
                raise ManifestError(f"duplicate sample key {s.key}")
            seen.add(s.key)
        group_split: dict[str, str] = {}
        for s in self.samples:
            prev = group_split.setdefault(s.group_id, s.split)
            if prev != s.split:
                raise ManifestError(
                    f"group {s.group_id} spans splits {prev!r} and {s.split!r}"
                )

    def group_ids(self) -> list[str]:
        """Unique group ids in first-appearance order."""
        seen: dict[str, None] = {}
        for s in self.samples:
            seen.setdefault(s.group_id)
        return list(seen)

    def restrict(self, split: str) -> "DatasetManifest":
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return DatasetManifest([s for s in self.samples if s.split == split], self.meta)

    def labels(self) -> list[EmotionLabel]:
        return [s.label for s in self.samples]

    def pixel_array(self) -> np.ndarray:
        """Stack all sample pixels into an (N, 48, 48) uint8 array."""
        return np.stack([s.pixels for s in self.samples]) if self.samples else np.zeros(
            (0, CANONICAL_SIZE, CANONICAL_SIZE), dtype=np.uint8
        )

    def fingerprint(self) -> str:
        """Content hash over meta, record identity, and pixel bytes."""
        h = hashlib.sha256()
        for k in sorted(self.meta):
            h.update(f"{k}={self.meta[k]}\n".encode())
        for s in self.samples:
            h.update(
                f"{s.source},{s.source_key},{s.variant},{int(s.label)},{s.split},".encode()
            )
            h.update(hashlib.sha256(s.pixels.tobytes()).digest())
        return h.hexdigest()


def standardize(record: RawRecord) -> ImageSample:
    """Harmonize a raw record to 48x48 grayscale (luma + bilinear resize).

    The record's label must be one of the 7 canonical emotions; callers drop
    transient labels before calling.
    """
    label = parse_label(record.label)
    if label is None:
        raise ValueError(
            f"{record.source}/{record.source_key}: label {record.label!r} is not canonical"
        )
    gray = to_grayscale(record.pixels)
    if gray.shape != (CANONICAL_SIZE, CANONICAL_SIZE):
        gray = bilinear_resize(gray, (CANONICAL_SIZE, CANONICAL_SIZE))
    return ImageSample(
        pixels=quantize(gray),
        label=label,
        source=record.source,
        source_key=record.source_key,
        variant="original",
        split="unassigned",
    )


def merge(manifests: list[DatasetManifest]) -> DatasetManifest:
    """Concatenate manifests, preserving order and provenance.

    Duplicate (source, source_key, variant) keys across inputs are fatal.
    """
    if not manifests:
        raise ManifestError("merge requires at least one manifest")
    samples: list[ImageSample] = []
    for m in manifests:
        samples.extend(m.samples)
    meta = dict(manifests[0].meta)
    return DatasetManifest(samples, meta)  # validate() rejects duplicates


def split(
    manifest: DatasetManifest,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetManifest:
    """Assign train/val/test splits uniformly at random over groups.

    Group-aware: all variants of one group receive the same split. Sizes in
    groups are ``train = floor(r_train * G)``, ``val = floor(r_val * G)``,
    and the remainder goes to test. Deterministic given ``seed``.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ManifestError(f"split ratios must sum to 1, got {ratios}")
    if len(manifest) == 0:
        raise ManifestError("cannot split an empty manifest")
    groups = manifest.group_ids()
    n_groups = len(groups)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_groups)
    n_train = math.floor(ratios[0] * n_groups)
    n_val = math.floor(ratios[1] * n_groups)
    assignment: dict[str, str] = {}
    for rank, gidx in enumerate(order):
        if rank < n_train:
            dest = "train"
        elif rank < n_train + n_val:
            dest = "val"
        else:
            dest = "test"
        assignment[groups[gidx]] = dest
    samples = [replace(s, split=assignment[s.group_id]) for s in manifest]
    meta = dict(manifest.meta)
    meta["seed"] = str(seed)
    return DatasetManifest(samples, meta)


def _pixel_relpath(pixels: np.ndarray) -> tuple[str, str]:
    digest = hashlib.sha256(pixels.tobytes()).hexdigest()
    return digest, f"pixels/{digest[:2]}/{digest}.png"


def save_manifest(manifest: DatasetManifest, root: Path | str) -> Path:
    """Write ``manifest.csv`` plus content-addressed PNGs under ``root``.

    Identical pixel payloads share a single file. Returns the manifest path.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rows: list[list[str]] = []
    for s in manifest:
        _, rel = _pixel_relpath(s.pixels)
        dest = root / rel
        if not dest.exists():
            dest.parent.mkdir(parents=True, exist_ok=True)
            Image.fromarray(s.pixels, mode="L").save(dest)
        rows.append([s.source, s.source_key, s.variant, str(int(s.label)), s.split, rel])
    path = root / "manifest.csv"
    header = " ".join(f"{k}={v}" for k, v in manifest.meta.items())
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write(f"# {header}\n")
        f.write("source,source_key,variant,label_index,split,relative_pixel_path\n")
        writer = csv.writer(f)
        writer.writerows(rows)
    return path


def load_manifest(path: Path | str) -> DatasetManifest:
    """Load a manifest written by ``save_manifest``."""
    path = Path(path)
    if not path.is_file():
        raise LoaderError(f"manifest file not found: {path}")
    root = path.parent
    with path.open("r", encoding="utf-8", newline="") as f:
        first = f.readline()
        if not first.startswith("#"):
            raise ManifestError(f"{path}: missing meta header line")
        meta: dict[str, str] = {}
        for token in first[1:].split():
            k, _, v = token.partition("=")
            meta[k] = v
        f.readline()  # column header
        samples: list[ImageSample] = []
        for row in csv.reader(f):
            if not row:
                continue
            source, source_key, variant, label_index, split_name, rel = row
            img = Image.open(root / rel)
            pixels = np.asarray(img, dtype=np.uint8)
            samples.append(
                ImageSample(
                    pixels=pixels,
                    label=EmotionLabel(int(label_index)),
                    source=source,
                    source_key=source_key,
                    variant=variant,
                    split=split_name,
                )
            )
    return DatasetManifest(samples, meta)
