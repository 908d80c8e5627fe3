"""CNN backbones adapted to 48x48 grayscale, 7-way output."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torchvision import models as tv_models

from fermix.labels import NUM_CLASSES

ARCHITECTURES = ("resnet18", "resnet34", "resnet50", "densenet121", "efficientnet_b0")


@dataclass(frozen=True)
class ModelSpec:
    architecture: str
    num_classes: int = NUM_CLASSES
    pretrained: bool = False

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(
                f"unknown architecture {self.architecture!r}; expected one of {ARCHITECTURES}"
            )


class GrayscaleBackbone(nn.Module):
    """Replicates the single grayscale channel to 3 at the input boundary.

    Keeps standard backbone definitions intact so any torchvision zoo model
    drops in unchanged.
    """

    def __init__(self, backbone: nn.Module):
        super().__init__()
        self.backbone = backbone

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 1:
            raise ValueError(f"expected (B, 1, H, W) input, got {tuple(x.shape)}")
        return self.backbone(x.repeat(1, 3, 1, 1))


def _replace_head(backbone: nn.Module, architecture: str, num_classes: int) -> None:
    if architecture.startswith("resnet"):
        backbone.fc = nn.Linear(backbone.fc.in_features, num_classes)
    elif architecture == "densenet121":
        backbone.classifier = nn.Linear(backbone.classifier.in_features, num_classes)
    elif architecture == "efficientnet_b0":
        backbone.classifier[1] = nn.Linear(backbone.classifier[1].in_features, num_classes)


def build_model(spec: ModelSpec, seed: int = 0) -> nn.Module:
    """Construct the model with seeded parameter initialization."""
    torch.manual_seed(seed)
    ctor = getattr(tv_models, spec.architecture)
    if spec.pretrained:
        backbone = ctor(weights="DEFAULT")
        _replace_head(backbone, spec.architecture, spec.num_classes)
    else:
        backbone = ctor(weights=None, num_classes=spec.num_classes)
    return GrayscaleBackbone(backbone)
