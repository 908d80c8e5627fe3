"""Inverse-frequency weighted random sampling of training indices.

Class weights are ``weight_c = N / n_c`` over the classes present in the
training split, kept as exact rationals. Per-sample draw probabilities are
``p_i = weight_c(i) / sum_j weight_c(j)``, which puts equal total mass
``1/K`` on each of the K present classes. Draws are with replacement.

The production sampler uses the alias method for O(1) draws; a naive
cumulative-sum sampler with the same distribution is kept alongside it as
the comparison oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from fermix.labels import EmotionLabel
from fermix.manifest import DatasetManifest


@dataclass(frozen=True)
class ClassWeights:
    """Exact inverse-frequency weights plus the counts they came from."""

    weights: Mapping[EmotionLabel, Fraction]
    counts: Mapping[EmotionLabel, int]
    total: int

    def as_float(self) -> dict[EmotionLabel, float]:
        return {label: float(w) for label, w in self.weights.items()}


def class_weights(counts: Mapping[EmotionLabel, int]) -> ClassWeights:
    """Compute ``weight_c = N / n_c`` over classes with ``n_c > 0``."""
    present = {label: n for label, n in counts.items() if n > 0}
    if not present:
        raise ValueError("class_weights requires at least one non-empty class")
    total = sum(present.values())
    weights = {label: Fraction(total, n) for label, n in present.items()}
    return ClassWeights(weights=weights, counts=present, total=total)


def _alias_tables(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias construction; deterministic for a given probability vector."""
    n = probs.shape[0]
    accept = np.zeros(n, dtype=np.float64)
    alias = np.zeros(n, dtype=np.int64)
    scaled = probs * n
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    scaled = scaled.copy()
    while small and large:
        s = small.pop()
        l = large.pop()
        accept[s] = scaled[s]
        alias[s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            small.append(l)
        else:
            large.append(l)
    for i in large:
        accept[i] = 1.0
    for i in small:
        accept[i] = 1.0  # numerical leftovers
    return accept, alias


class CumulativeSampler:
    """Naive cumulative-sum sampler; the test oracle for the alias sampler."""

    def __init__(self, probabilities: Sequence[float]):
        p = np.asarray(probabilities, dtype=np.float64)
        self.probabilities = p
        self._cum = np.cumsum(p)
        self._cum[-1] = 1.0

    def draw(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if k < 1:
            raise ValueError("k must be >= 1")
        u = rng.random(k)
        return np.searchsorted(self._cum, u, side="right").astype(np.int64)


class WeightedSampler:
    """Alias-method sampler over per-sample probabilities."""

    def __init__(
        self,
        probabilities: Sequence[float],
        labels: Sequence[EmotionLabel],
        class_mass: Mapping[EmotionLabel, Fraction],
        seed: int,
    ):
        p = np.asarray(probabilities, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probabilities must be a non-empty vector")
        if np.any(p <= 0.0):
            raise ValueError("all probabilities must be positive")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        self.probabilities = p
        self.labels = list(labels)
        self.class_mass = dict(class_mass)  # exact per-class probability mass
        self.seed = seed
        self._accept, self._alias = _alias_tables(p)
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return self.probabilities.shape[0]

    def draw(self, k: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """Draw ``k`` indices i.i.d. with replacement."""
        if k < 1:
            raise ValueError("k must be >= 1")
        gen = rng if rng is not None else self._rng
        idx = gen.integers(0, len(self), size=k)
        u = gen.random(k)
        return np.where(u < self._accept[idx], idx, self._alias[idx]).astype(np.int64)


def build_sampler(
    manifest: DatasetManifest | Sequence[EmotionLabel],
    weights: ClassWeights,
    seed: int,
) -> WeightedSampler:
    """Build the per-sample draw distribution for a train-split manifest.

    Accepts either a manifest restricted to the train split or a bare label
    sequence. Every label present must have a weight.
    """
    labels = manifest.labels() if isinstance(manifest, DatasetManifest) else list(manifest)
    if not labels:
        raise ValueError("cannot build a sampler over zero samples")
    missing = {label for label in labels if label not in weights.weights}
    if missing:
        names = ", ".join(sorted(m.name for m in missing))
        raise ValueError(f"no weight for label(s) {names}")
    denom = sum(weights.weights[label] for label in labels)
    exact = [weights.weights[label] / denom for label in labels]
    class_mass: dict[EmotionLabel, Fraction] = {}
    for label, p in zip(labels, exact):
        class_mass[label] = class_mass.get(label, Fraction(0)) + p
    probs = np.array([float(p) for p in exact], dtype=np.float64)
    probs /= probs.sum()
    return WeightedSampler(probs, labels, class_mass, seed)


def draw(sampler: WeightedSampler, k: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Module-level convenience wrapper around ``WeightedSampler.draw``."""
    return sampler.draw(k, rng)
