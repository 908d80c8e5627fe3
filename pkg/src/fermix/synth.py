"""Desk-scale synthetic corpus: class-distinguishable procedural patterns.

Each class gets its own 48x48 base pattern; samples add a small random
shift of the pattern plus pixel noise, so the classes stay separable by a
nearest-centroid classifier on raw pixels while still giving a CNN some
variation to absorb.
"""

from __future__ import annotations

import numpy as np

from fermix.labels import EmotionLabel
from fermix.manifest import CANONICAL_SIZE, SOURCE_SYNTH, DatasetManifest, ImageSample, default_meta

_AMPLITUDE = 70.0
_NOISE_SIGMA = 18.0
_MAX_SHIFT = 2


def _base_pattern(label: EmotionLabel) -> np.ndarray:
    n = CANONICAL_SIZE
    ys, xs = np.mgrid[0:n, 0:n].astype(np.float64)
    if label == EmotionLabel.ANGRY:
        pat = np.sin(2 * np.pi * ys / 12.0)
    elif label == EmotionLabel.DISGUST:
        pat = np.sin(2 * np.pi * xs / 12.0)
    elif label == EmotionLabel.FEAR:
        pat = np.sin(2 * np.pi * (xs + ys) / 16.0)
    elif label == EmotionLabel.HAPPY:
        pat = np.sign(np.sin(2 * np.pi * xs / 24.0) * np.sin(2 * np.pi * ys / 24.0))
    elif label == EmotionLabel.NEUTRAL:
        r = np.hypot(xs - (n - 1) / 2.0, ys - (n - 1) / 2.0)
        pat = np.cos(2 * np.pi * r / 20.0)
    elif label == EmotionLabel.SAD:
        pat = 2.0 * xs / (n - 1) - 1.0
    else:  # SURPRISE: bright cross on dark background
        pat = np.where(
            (np.abs(xs - (n - 1) / 2.0) < 5) | (np.abs(ys - (n - 1) / 2.0) < 5), 1.0, -1.0
        )
    return 128.0 + _AMPLITUDE * pat


def synth_generate(n_per_class: int, seed: int) -> DatasetManifest:
    """Generate ``7 * n_per_class`` labeled synthetic samples, split unassigned."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    samples: list[ImageSample] = []
    for label in EmotionLabel:
        base = _base_pattern(label)
        for i in range(n_per_class):
            dy, dx = rng.integers(-_MAX_SHIFT, _MAX_SHIFT + 1, size=2)
            shifted = np.roll(np.roll(base, dy, axis=0), dx, axis=1)
            noisy = shifted + rng.normal(0.0, _NOISE_SIGMA, size=base.shape)
            pixels = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
            samples.append(
                ImageSample(
                    pixels=pixels,
                    label=label,
                    source=SOURCE_SYNTH,
                    source_key=f"{label.name.lower()}-{i:04d}",
                )
            )
    meta = default_meta(seed)
    meta["generator"] = "synth-v1"
    return DatasetManifest(samples, meta)
