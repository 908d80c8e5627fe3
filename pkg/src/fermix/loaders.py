"""Loaders for the three source datasets.

Each loader returns ``RawRecord`` objects in a deterministic order (file
order for CSV input, sorted paths for trees) with labels still provisional;
``standardize`` harmonizes them afterwards.
"""

from __future__ import annotations

import csv
import logging
import re
from pathlib import Path

import numpy as np
from PIL import Image

from fermix.errors import LoaderError
from fermix.labels import CONTEMPT, NOT_A_FACE, UNKNOWN, parse_label
from fermix.manifest import SOURCE_CKPLUS, SOURCE_FERPLUS, SOURCE_KDEF, RawRecord

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tiff")

# Vote columns of the combined FER+ CSV, in file order, mapped to provisional
# labels. The last three never survive into a manifest.
FERPLUS_VOTE_COLUMNS: tuple[tuple[str, str], ...] = (
    ("neutral", "neutral"),
    ("happiness", "happy"),
    ("surprise", "surprise"),
    ("sadness", "sad"),
    ("anger", "angry"),
    ("disgust", "disgust"),
    ("fear", "fear"),
    ("contempt", CONTEMPT),
    ("unknown", UNKNOWN),
    ("NF", NOT_A_FACE),
)

# Tie-break order: canonical emotions by index, then the transient labels.
_TIE_ORDER = {name: i for i, name in enumerate(
    ["angry", "disgust", "fear", "happy", "neutral", "sad", "surprise",
     CONTEMPT, UNKNOWN, NOT_A_FACE]
)}

FERPLUS_PIXEL_COUNT = 48 * 48


def load_ferplus(csv_path: Path | str, vote_policy: str = "majority") -> list[RawRecord]:
    """Load the combined FER+ CSV (pixel strings plus annotator vote counts).

    The winning label is the argmax of the vote columns under ``vote_policy``
    (only "majority" is defined); ties break toward the lowest canonical
    label index, with contempt/unknown/not-a-face ordered last. Rows won by
    one of those three are dropped.
    """
    if vote_policy != "majority":
        raise ValueError(f"unknown vote_policy {vote_policy!r}")
    csv_path = Path(csv_path)
    try:
        f = csv_path.open("r", encoding="utf-8", newline="")
    except OSError as exc:
        raise LoaderError(f"cannot read FER+ csv {csv_path}: {exc}") from exc
    records: list[RawRecord] = []
    with f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or "pixels" not in reader.fieldnames:
            raise LoaderError(f"{csv_path}: missing 'pixels' column")
        for i, row in enumerate(reader):
            votes: list[tuple[int, int, str]] = []
            for col, label in FERPLUS_VOTE_COLUMNS:
                raw = (row.get(col) or "0").strip()
                try:
                    n = int(raw)
                except ValueError as exc:
                    raise LoaderError(f"{csv_path} row {i}: bad vote count {raw!r}") from exc
                votes.append((-n, _TIE_ORDER[label], label))
            votes.sort()
            best_negvotes, _, winner = votes[0]
            if best_negvotes == 0 or winner in (CONTEMPT, UNKNOWN, NOT_A_FACE):
                continue
            tokens = (row["pixels"] or "").split()
            if len(tokens) != FERPLUS_PIXEL_COUNT:
                raise LoaderError(
                    f"{csv_path} row {i}: pixel string has {len(tokens)} tokens, "
                    f"expected {FERPLUS_PIXEL_COUNT}"
                )
            try:
                values = np.array([int(t) for t in tokens], dtype=np.int64)
            except ValueError as exc:
                raise LoaderError(f"{csv_path} row {i}: non-integer pixel token") from exc
            if values.min() < 0 or values.max() > 255:
                raise LoaderError(f"{csv_path} row {i}: pixel value out of [0, 255]")
            pixels = values.astype(np.uint8).reshape(48, 48)
            key = (row.get("Image name") or "").strip() or f"row{i:06d}"
            records.append(RawRecord(pixels, winner, SOURCE_FERPLUS, key))
    return records


def _read_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode in ("L", "I;16", "1"):
                arr = np.asarray(img.convert("L"), dtype=np.uint8)
            else:
                arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise LoaderError(f"cannot read image {path}: {exc}") from exc
    return arr


def load_ckplus(root: Path | str) -> list[RawRecord]:
    """Load a prepared CK+ tree: one subdirectory per emotion name.

    The contempt subdirectory is ignored; a missing neutral directory is
    legal. Unknown directory names are skipped with a warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise LoaderError(f"CK+ root is not a directory: {root}")
    records: list[RawRecord] = []
    for subdir in sorted(p for p in root.iterdir() if p.is_dir()):
        name = subdir.name.strip().lower()
        if name == CONTEMPT:
            continue
        label = parse_label(name)
        if label is None:
            log.warning("ckplus: skipping unknown emotion directory %s", subdir)
            continue
        for img_path in sorted(subdir.iterdir()):
            if img_path.suffix.lower() not in IMAGE_EXTENSIONS:
                continue
            pixels = _read_image(img_path)
            key = f"{subdir.name}/{img_path.name}"
            records.append(RawRecord(pixels, label.name.lower(), SOURCE_CKPLUS, key))
    return records


# KDEF file stems: session (A/B), sex (F/M), 2-digit id, emotion code, pose code.
_KDEF_STEM = re.compile(r"^([AB])([FM])(\d{2})([A-Z]{2})(FL|FR|HL|HR|S)$")
KDEF_EMOTION_CODES = {
    "AF": "fear",
    "AN": "angry",
    "DI": "disgust",
    "HA": "happy",
    "NE": "neutral",
    "SA": "sad",
    "SU": "surprise",
}
# Frontal-centric pose filter documented for the merged corpus.
KDEF_DEFAULT_POSES = frozenset({"S", "HL", "HR"})


def load_kdef(root: Path | str, pose_filter: frozenset[str] | set[str] = KDEF_DEFAULT_POSES) -> list[RawRecord]:
    """Load KDEF images whose filename pose code is in ``pose_filter``.

    Filenames encode subject, emotion, and pose; undecodable names are
    skipped with a warning. An empty filter yields an empty list.
    """
    root = Path(root)
    if not root.is_dir():
        raise LoaderError(f"KDEF root is not a directory: {root}")
    poses = {p.upper() for p in pose_filter}
    records: list[RawRecord] = []
    for img_path in sorted(root.rglob("*")):
        if not img_path.is_file() or img_path.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        stem = img_path.stem.upper()
        m = _KDEF_STEM.match(stem)
        if m is None or m.group(4) not in KDEF_EMOTION_CODES:
            log.warning("kdef: skipping undecodable filename %s", img_path.name)
            continue
        if m.group(5) not in poses:
            continue
        pixels = _read_image(img_path)
        label = KDEF_EMOTION_CODES[m.group(4)]
        records.append(RawRecord(pixels, label, SOURCE_KDEF, stem))
    return records
