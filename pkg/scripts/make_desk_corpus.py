#!/usr/bin/env python3
"""Build a self-contained desk-scale corpus for trying the full pipeline.

Generates a synthetic 7-class dataset, fabricates full-frame detections for
it (so no third-party face detector is needed), and materializes all four
dataset stages: original, aligned, cropped, and the augmented merged union.

    python scripts/make_desk_corpus.py --out work/desk --n-per-class 30 --seed 5
"""

import argparse
from pathlib import Path

from fermix.alignment import build_augmented_merged, preprocess_variants
from fermix.detection import DetectionCache, full_frame_detection
from fermix.manifest import save_manifest, split
from fermix.synth import synth_generate


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--n-per-class", type=int, default=30)
    parser.add_argument("--seed", type=int, default=5)
    args = parser.parse_args()

    original = split(synth_generate(args.n_per_class, args.seed), seed=args.seed)
    print(f"generated {len(original)} samples ({args.n_per_class} per class)")

    cache = DetectionCache()
    for sample in original:
        cache.put(sample.source, sample.source_key, full_frame_detection(sample.pixels.shape))
    cache.save(args.out / "detections.csv")

    aligned, cropped = preprocess_variants(original, cache)
    merged = build_augmented_merged(original, cache)

    for name, manifest in (
        ("original", original),
        ("aligned", aligned),
        ("cropped", cropped),
        ("augmented_merged", merged),
    ):
        path = save_manifest(manifest, args.out / name)
        print(f"wrote {path} ({len(manifest)} samples)")


if __name__ == "__main__":
    main()
