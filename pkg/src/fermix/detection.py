"""Face-detection adapter contract, detection cache, and sidecar format.

Detections live in the coordinate frame of the pixels they were computed
from (for manifest samples, the stored 48x48 frame). The sidecar cache file
holds one line per sample:

    source,source_key,status,x,y,w,h,confidence,lx1,ly1,...,lx5,ly5

``status`` is ``ok`` or ``none``; ``none`` lines carry only the first three
fields. Landmark fields are empty strings when the detection has a box but
no landmarks. Floats are serialized with ``repr`` so a cache round-trips
bit-identically.
"""

from __future__ import annotations

import csv
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image

from fermix.errors import DetectorError
from fermix.manifest import ImageSample, RawRecord

LANDMARK_NAMES = ("right_eye", "left_eye", "nose", "mouth_right", "mouth_left")


@dataclass(frozen=True)
class LandmarkSet:
    """Five facial points, pixel coordinates (x, y) of the detected image."""

    right_eye: tuple[float, float]
    left_eye: tuple[float, float]
    nose: tuple[float, float]
    mouth_right: tuple[float, float]
    mouth_left: tuple[float, float]

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in LANDMARK_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "LandmarkSet":
        pts = [(float(x), float(y)) for x, y in np.asarray(arr, dtype=np.float64)]
        return cls(*pts)


@dataclass(frozen=True)
class FaceDetection:
    """Best face found in an image: box, optional landmarks, confidence."""

    box: tuple[float, float, float, float]  # x, y, w, h in source pixels
    landmarks: LandmarkSet | None
    confidence: float

    def __post_init__(self) -> None:
        x, y, w, h = self.box
        if not (w > 0 and h > 0):
            raise ValueError(f"detection box must have positive size, got {self.box}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


class Detector(Protocol):
    """Adapter contract: behaves as a pure function of the sample.

    Returns at most one best detection, or None when no face is found.
    Adapter failures (process/IO) raise DetectorError, which is retriable
    and distinct from the "no face" result.
    """

    reentrant: bool

    def detect(self, sample: ImageSample | RawRecord) -> FaceDetection | None: ...


def _format_detection(source: str, source_key: str, det: FaceDetection | None) -> list[str]:
    if det is None:
        return [source, source_key, "none"]
    x, y, w, h = det.box
    row = [source, source_key, "ok", repr(x), repr(y), repr(w), repr(h), repr(det.confidence)]
    if det.landmarks is None:
        row.extend([""] * 10)
    else:
        for px, py in det.landmarks.as_array():
            row.extend([repr(float(px)), repr(float(py))])
    return row


def _parse_detection_fields(fields: list[str], where: str) -> FaceDetection | None:
    status = fields[0]
    if status == "none":
        return None
    if status != "ok":
        raise DetectorError(f"{where}: unknown detection status {status!r}")
    if len(fields) < 6:
        raise DetectorError(f"{where}: truncated detection line")
    x, y, w, h, conf = (float(v) for v in fields[1:6])
    lm_fields = fields[6:16]
    landmarks = None
    if len(lm_fields) == 10 and all(v != "" for v in lm_fields):
        coords = [float(v) for v in lm_fields]
        landmarks = LandmarkSet.from_array(np.array(coords).reshape(5, 2))
    return FaceDetection(box=(x, y, w, h), landmarks=landmarks, confidence=conf)


class DetectionCache:
    """Persisted map from (source, source_key) to FaceDetection-or-none."""

    def __init__(self) -> None:
        self._entries: dict[tuple[str, str], FaceDetection | None] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def has(self, source: str, source_key: str) -> bool:
        return (source, source_key) in self._entries

    def get(self, source: str, source_key: str) -> FaceDetection | None:
        return self._entries[(source, source_key)]

    def put(self, source: str, source_key: str, det: FaceDetection | None) -> None:
        self._entries[(source, source_key)] = det

    def save(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            for (source, key), det in self._entries.items():
                writer.writerow(_format_detection(source, key, det))

    @classmethod
    def load(cls, path: Path | str) -> "DetectionCache":
        path = Path(path)
        cache = cls()
        with path.open("r", encoding="utf-8", newline="") as f:
            for row in csv.reader(f):
                if not row:
                    continue
                source, key = row[0], row[1]
                cache.put(source, key, _parse_detection_fields(row[2:], f"{path}:{source}/{key}"))
        return cache


def detect(
    detector: Detector | None,
    sample: ImageSample | RawRecord,
    cache: DetectionCache | None = None,
) -> FaceDetection | None:
    """Detect the best face in ``sample``, consulting/filling ``cache``.

    A cache hit is returned as stored. On a miss with no detector configured
    a DetectorError is raised (retriable once a detector is available).
    """
    key = (sample.source, sample.source_key)
    if cache is not None and cache.has(*key):
        return cache.get(*key)
    if detector is None:
        raise DetectorError(
            f"no detection cached for {key[0]}/{key[1]} and no live detector configured"
        )
    det = detector.detect(sample)
    if cache is not None:
        cache.put(*key, det)
    return det


class FixtureDetector:
    """Replays golden detections from a sidecar file, keyed by sample identity."""

    reentrant = True

    def __init__(self, entries: DetectionCache):
        self._entries = entries

    @classmethod
    def from_sidecar(cls, path: Path | str) -> "FixtureDetector":
        return cls(DetectionCache.load(path))

    def detect(self, sample: ImageSample | RawRecord) -> FaceDetection | None:
        if not self._entries.has(sample.source, sample.source_key):
            raise DetectorError(
                f"fixture detector has no entry for {sample.source}/{sample.source_key}"
            )
        return self._entries.get(sample.source, sample.source_key)


class ExternalDetector:
    """Runs an external command on a temp PNG of the sample.

    The command receives the image path as its last argument and must print
    a single line ``status[,x,y,w,h,conf[,lx1,ly1,...,lx5,ly5]]`` (the
    sidecar format without the identity columns). Any process failure or
    unparseable output raises DetectorError.
    """

    reentrant = False

    def __init__(self, command: list[str]):
        if not command:
            raise ValueError("external detector command must be non-empty")
        self.command = list(command)

    def detect(self, sample: ImageSample | RawRecord) -> FaceDetection | None:
        pixels = np.asarray(sample.pixels)
        mode = "L" if pixels.ndim == 2 else "RGB"
        with tempfile.NamedTemporaryFile(suffix=".png", delete=True) as tmp:
            Image.fromarray(pixels, mode=mode).save(tmp.name)
            try:
                proc = subprocess.run(
                    [*self.command, tmp.name],
                    capture_output=True,
                    text=True,
                    timeout=120,
                )
            except OSError as exc:
                raise DetectorError(f"external detector failed to start: {exc}") from exc
            except subprocess.TimeoutExpired as exc:
                raise DetectorError("external detector timed out") from exc
        if proc.returncode != 0:
            raise DetectorError(
                f"external detector exited {proc.returncode}: {proc.stderr.strip()}"
            )
        line = proc.stdout.strip().splitlines()
        if not line:
            raise DetectorError("external detector produced no output")
        fields = next(csv.reader([line[0]]))
        try:
            return _parse_detection_fields(fields, "external detector output")
        except (ValueError, IndexError) as exc:
            raise DetectorError(f"cannot parse external detector output {line[0]!r}") from exc


# Landmark layout used when fabricating full-frame detections for fixtures
# and desk-scale demos: fractional (x, y) positions within the box.
_FULL_FRAME_LAYOUT = {
    "right_eye": (0.30, 0.38),
    "left_eye": (0.70, 0.38),
    "nose": (0.50, 0.58),
    "mouth_right": (0.33, 0.78),
    "mouth_left": (0.67, 0.78),
}


def full_frame_detection(shape: tuple[int, int], confidence: float = 1.0) -> FaceDetection:
    """A detection covering the whole image with a canonical landmark layout."""
    h, w = shape
    landmarks = LandmarkSet(
        **{name: (fx * (w - 1), fy * (h - 1)) for name, (fx, fy) in _FULL_FRAME_LAYOUT.items()}
    )
    return FaceDetection(box=(0.0, 0.0, float(w), float(h)), landmarks=landmarks, confidence=confidence)
