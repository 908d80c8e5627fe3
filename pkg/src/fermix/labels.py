"""Canonical 7-class emotion label set.

The index order below is fixed and used everywhere: manifests, sampler
weights, confusion-matrix axes, and rendered reports.
"""

from __future__ import annotations

from enum import IntEnum


class EmotionLabel(IntEnum):
    ANGRY = 0
    DISGUST = 1
    FEAR = 2
    HAPPY = 3
    NEUTRAL = 4
    SAD = 5
    SURPRISE = 6

    @property
    def canonical_name(self) -> str:
        return self.name.capitalize()


NUM_CLASSES = 7
CANONICAL_ORDER: tuple[EmotionLabel, ...] = tuple(EmotionLabel)

# Transient labels that may appear while loading raw sources but never in a
# manifest. Rows/files winning one of these are dropped by the loaders.
CONTEMPT = "contempt"
UNKNOWN = "unknown"
NOT_A_FACE = "not_a_face"
TRANSIENT_LABELS = (CONTEMPT, UNKNOWN, NOT_A_FACE)

_NAME_ALIASES = {
    "angry": EmotionLabel.ANGRY,
    "anger": EmotionLabel.ANGRY,
    "disgust": EmotionLabel.DISGUST,
    "disgusted": EmotionLabel.DISGUST,
    "fear": EmotionLabel.FEAR,
    "afraid": EmotionLabel.FEAR,
    "happy": EmotionLabel.HAPPY,
    "happiness": EmotionLabel.HAPPY,
    "neutral": EmotionLabel.NEUTRAL,
    "sad": EmotionLabel.SAD,
    "sadness": EmotionLabel.SAD,
    "surprise": EmotionLabel.SURPRISE,
    "surprised": EmotionLabel.SURPRISE,
}


def parse_label(name: str) -> EmotionLabel | None:
    """Map a label string (common aliases accepted) to its canonical value.

    Returns None for anything outside the 7 canonical classes, including the
    transient loading labels.
    """
    return _NAME_ALIASES.get(name.strip().lower())
