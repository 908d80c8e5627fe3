import csv

import numpy as np
import pytest
from PIL import Image

from fermix.detection import DetectionCache, full_frame_detection
from fermix.manifest import split
from fermix.synth import synth_generate

# FER+ vote column layout used when writing fixture CSVs.
FER_COLUMNS = [
    "Image name", "pixels",
    "neutral", "happiness", "surprise", "sadness", "anger", "disgust", "fear",
    "contempt", "unknown", "NF",
]


def write_ferplus_csv(path, rows):
    """rows: list of (name, pixel_values(2304 ints or raw string), votes dict)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(FER_COLUMNS)
        for name, pixels, votes in rows:
            pixel_str = pixels if isinstance(pixels, str) else " ".join(str(v) for v in pixels)
            writer.writerow(
                [name, pixel_str] + [votes.get(col, 0) for col in FER_COLUMNS[2:]]
            )


def ferplus_row(name, value, votes):
    return (name, [value] * 2304, votes)


def write_image_tree(root, layout, size=(48, 48), color=False):
    """layout: dict subdir -> number of images (deterministic gray values)."""
    for subdir, count in layout.items():
        d = root / subdir
        d.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            value = (37 * i + 11) % 256
            if color:
                arr = np.full((*size, 3), value, dtype=np.uint8)
                Image.fromarray(arr, "RGB").save(d / f"img{i:03d}.png")
            else:
                arr = np.full(size, value, dtype=np.uint8)
                Image.fromarray(arr, "L").save(d / f"img{i:03d}.png")


@pytest.fixture
def synth_manifest():
    return synth_generate(10, seed=42)


@pytest.fixture
def synth_split_manifest():
    return split(synth_generate(10, seed=42), seed=42)


def full_frame_cache(manifest, reject_keys=(), drop_landmark_keys=()):
    """Detection cache with a full-frame detection per sample.

    ``reject_keys`` get a "none" entry; ``drop_landmark_keys`` get a box
    without landmarks.
    """
    from dataclasses import replace

    cache = DetectionCache()
    for s in manifest:
        if s.source_key in reject_keys:
            cache.put(s.source, s.source_key, None)
        else:
            det = full_frame_detection(s.pixels.shape)
            if s.source_key in drop_landmark_keys:
                det = replace(det, landmarks=None)
            cache.put(s.source, s.source_key, det)
    return cache
