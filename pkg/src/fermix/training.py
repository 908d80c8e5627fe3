"""Training loop with early stopping and best-validation checkpointing.

Batch supply is deterministic given the config seed: without the weighted
sampler an epoch is a seeded permutation of the train indices; with it, an
epoch is exactly ``N_train`` draws with replacement from the weighted
distribution. Augmentation randomness is counter-based per (epoch, position)
so a batch can be prepared in any order without changing the stream.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from fermix import __version__
from fermix.augment import AugmentPolicy, rand_augment
from fermix.labels import EmotionLabel
from fermix.manifest import DatasetManifest
from fermix.models import ModelSpec, build_model
from fermix.sampling import WeightedSampler, build_sampler, class_weights


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.001
    batch_size: int = 64
    early_stop_patience: int = 10
    seed: int = 0
    augment: bool = False
    weighted_sampler: bool = False
    sampler_seed: int | None = None  # defaults to the main seed
    augment_policy: AugmentPolicy = field(default_factory=AugmentPolicy)
    deterministic: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        # learning_rate 0 is permitted so a frozen model can exercise the
        # early-stopping contract; it must never be negative.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    wall_time: float


@dataclass
class Checkpoint:
    state_dict: dict
    spec: ModelSpec
    config: TrainConfig
    epoch: int
    val_accuracy: float
    manifest_fingerprint: str

    def save(self, path: Path | str) -> None:
        payload = {
            "fermix": __version__,
            "state_dict": self.state_dict,
            "architecture": self.spec.architecture,
            "num_classes": self.spec.num_classes,
            "pretrained": self.spec.pretrained,
            "config": _config_dict(self.config),
            "epoch": self.epoch,
            "val_accuracy": self.val_accuracy,
            "manifest_fingerprint": self.manifest_fingerprint,
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(payload, path)

    @classmethod
    def load(cls, path: Path | str) -> "Checkpoint":
        payload = torch.load(Path(path), map_location="cpu", weights_only=False)
        cfg = payload["config"]
        policy = AugmentPolicy(**cfg.pop("augment_policy"))
        config = TrainConfig(augment_policy=policy, **cfg)
        spec = ModelSpec(
            architecture=payload["architecture"],
            num_classes=payload["num_classes"],
            pretrained=payload["pretrained"],
        )
        return cls(
            state_dict=payload["state_dict"],
            spec=spec,
            config=config,
            epoch=payload["epoch"],
            val_accuracy=payload["val_accuracy"],
            manifest_fingerprint=payload["manifest_fingerprint"],
        )


def _config_dict(config: TrainConfig) -> dict:
    d = asdict(config)
    d["augment_policy"] = {
        "n_ops": config.augment_policy.n_ops,
        "magnitude": config.augment_policy.magnitude,
        "op_pool": [op.value for op in config.augment_policy.op_pool],
    }
    return d


def _to_batch_tensor(images: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(images.astype(np.float32) / 255.0).unsqueeze(1)


def epoch_indices(
    seed: int,
    epoch: int,
    n_train: int,
    sampler: WeightedSampler | None,
) -> np.ndarray:
    """The deterministic index stream feeding one training epoch.

    Without a sampler: a seeded permutation of the train indices. With one:
    exactly ``n_train`` weighted draws, streamed from the sampler's own seed
    so the draw sequence is decoupled from the shuffling stream.
    """
    if sampler is None:
        return np.random.default_rng([seed, epoch]).permutation(n_train)
    return sampler.draw(n_train, np.random.default_rng([sampler.seed, epoch]))


def _augment_batch(
    images: np.ndarray,
    positions: np.ndarray,
    policy: AugmentPolicy,
    seed: int,
    epoch: int,
) -> np.ndarray:
    out = np.empty_like(images)
    for j, pos in enumerate(positions):
        rng = np.random.default_rng([seed, epoch, int(pos)])
        out[j] = rand_augment(images[j], policy, rng)
    return out


@torch.no_grad()
def evaluate(
    model: nn.Module,
    images: np.ndarray,
    labels: np.ndarray,
    batch_size: int = 256,
) -> tuple[float, float, np.ndarray]:
    """(mean loss, accuracy, predicted label indices) on a fixed set."""
    model.eval()
    loss_fn = nn.CrossEntropyLoss(reduction="sum")
    total_loss = 0.0
    preds = np.empty(len(labels), dtype=np.int64)
    for start in range(0, len(labels), batch_size):
        sl = slice(start, min(start + batch_size, len(labels)))
        x = _to_batch_tensor(images[sl])
        y = torch.from_numpy(labels[sl])
        logits = model(x)
        total_loss += float(loss_fn(logits, y))
        preds[sl] = np.argmax(logits.numpy(), axis=1)  # ties -> lowest index
    accuracy = float(np.mean(preds == labels)) if len(labels) else 0.0
    return total_loss / max(1, len(labels)), accuracy, preds


def train(
    manifest: DatasetManifest,
    spec: ModelSpec,
    config: TrainConfig,
    out_dir: Path | str | None = None,
) -> tuple[Checkpoint, list[EpochLog]]:
    """Train on the manifest's train split, validating per epoch.

    Runs at most ``config.epochs`` epochs and stops early once validation
    accuracy has not improved for ``early_stop_patience`` consecutive
    epochs. Returns the checkpoint of the best validation epoch plus the
    per-epoch log (also written as JSONL to ``out_dir`` when given).
    """
    train_split = manifest.restrict("train")
    val_split = manifest.restrict("val")
    if len(train_split) == 0:
        raise ValueError("manifest has an empty train split")
    if len(val_split) == 0:
        raise ValueError("manifest has an empty val split")

    train_images = train_split.pixel_array()
    train_labels = np.array([int(s.label) for s in train_split], dtype=np.int64)
    val_images = val_split.pixel_array()
    val_labels = np.array([int(s.label) for s in val_split], dtype=np.int64)

    sampler = None
    if config.weighted_sampler:
        weights = class_weights(train_split.class_counts)
        seed = config.sampler_seed if config.sampler_seed is not None else config.seed
        sampler = build_sampler(train_split, weights, seed)

    if config.deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)
    model = build_model(spec, seed=config.seed)
    torch.manual_seed(config.seed + 1)  # decouple loop randomness from init
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    fingerprint = manifest.fingerprint()

    logs: list[EpochLog] = []
    best_state: dict | None = None
    best_acc = -1.0
    best_epoch = -1
    stale = 0
    log_file = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_file = (out_dir / "epochs.jsonl").open("w", encoding="utf-8")

    try:
        for epoch in range(1, config.epochs + 1):
            t0 = time.perf_counter()
            order = epoch_indices(config.seed, epoch, len(train_labels), sampler)
            model.train()
            epoch_loss = 0.0
            epoch_correct = 0
            for start in range(0, len(order), config.batch_size):
                batch_idx = order[start : start + config.batch_size]
                images = train_images[batch_idx]
                if config.augment:
                    positions = np.arange(start, start + len(batch_idx))
                    images = _augment_batch(
                        images, positions, config.augment_policy, config.seed, epoch
                    )
                x = _to_batch_tensor(images)
                y = torch.from_numpy(train_labels[batch_idx])
                optimizer.zero_grad()
                logits = model(x)
                loss = loss_fn(logits, y)
                loss.backward()
                optimizer.step()
                epoch_loss += float(loss.detach()) * len(batch_idx)
                epoch_correct += int(
                    (np.argmax(logits.detach().numpy(), axis=1) == y.numpy()).sum()
                )

            val_loss, val_acc, _ = evaluate(model, val_images, val_labels, config.batch_size)
            entry = EpochLog(
                epoch=epoch,
                train_loss=epoch_loss / len(order),
                train_accuracy=epoch_correct / len(order),
                val_loss=val_loss,
                val_accuracy=val_acc,
                wall_time=time.perf_counter() - t0,
            )
            logs.append(entry)
            if log_file is not None:
                log_file.write(json.dumps(asdict(entry)) + "\n")
                log_file.flush()

            if val_acc > best_acc:
                best_acc = val_acc
                best_epoch = epoch
                best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
                stale = 0
            else:
                stale += 1
                if stale >= config.early_stop_patience:
                    break
    finally:
        if log_file is not None:
            log_file.close()

    assert best_state is not None
    checkpoint = Checkpoint(
        state_dict=best_state,
        spec=spec,
        config=config,
        epoch=best_epoch,
        val_accuracy=best_acc,
        manifest_fingerprint=fingerprint,
    )
    if out_dir is not None:
        checkpoint.save(Path(out_dir) / "checkpoint.pt")
    return checkpoint, logs


def load_model(checkpoint: Checkpoint) -> nn.Module:
    model = build_model(checkpoint.spec, seed=checkpoint.config.seed)
    model.load_state_dict(checkpoint.state_dict)
    model.eval()
    return model


def predict(checkpoint: Checkpoint, images: np.ndarray) -> list[EmotionLabel]:
    """Argmax labels for a batch of 48x48 grayscale images; ties -> lowest index."""
    images = np.asarray(images)
    if images.ndim == 2:
        images = images[None]
    if images.ndim != 3 or images.shape[1:] != (48, 48):
        raise ValueError(f"expected (N, 48, 48) images, got {images.shape}")
    model = load_model(checkpoint)
    with torch.no_grad():
        logits = model(_to_batch_tensor(images)).numpy()
    return [EmotionLabel(int(i)) for i in np.argmax(logits, axis=1)]
