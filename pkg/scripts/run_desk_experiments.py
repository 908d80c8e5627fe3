#!/usr/bin/env python3
"""Run a desk-scale ablation grid on a corpus built by make_desk_corpus.py.

    python scripts/make_desk_corpus.py --out work/desk --n-per-class 30 --seed 5
    python scripts/run_desk_experiments.py --data work/desk --out work/results

Writes results.txt / results.json / per-cell confusion heatmaps. The grid is
resumable: rerunning skips cells whose run directories already hold results.
"""

import argparse
import sys
from pathlib import Path

import yaml

from fermix.cli import main as fermix_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", type=Path, required=True, help="corpus root from make_desk_corpus")
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--epochs", type=int, default=8)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    config = {
        "seed": args.seed,
        "data_root": str(args.data.resolve()),
        "runs_root": str((args.out / "runs").resolve()),
        "manifests": {
            "original": "original/manifest.csv",
            "aligned": "aligned/manifest.csv",
            "cropped": "cropped/manifest.csv",
            "augmented_merged": "augmented_merged/manifest.csv",
        },
        "train": {"epochs": args.epochs, "batch_size": 32, "early_stop_patience": args.epochs},
        "ablation": {
            "architectures": ["resnet18"],
            "stages": ["original", "aligned", "cropped", "augmented_merged"],
            "flag_grid": [
                {"augment": False, "sampler": False},
                {"augment": True, "sampler": False},
                {"augment": True, "sampler": True},
            ],
        },
    }
    args.out.mkdir(parents=True, exist_ok=True)
    config_path = args.out / "ablation.yaml"
    config_path.write_text(yaml.safe_dump(config, sort_keys=False))

    rc = fermix_main([
        "ablation",
        "--config", str(config_path),
        "--out", str(args.out),
        "--jobs", str(args.jobs),
    ])
    print((args.out / "results.txt").read_text())
    return rc


if __name__ == "__main__":
    sys.exit(main())
