"""On-the-fly random augmentation for training batches.

``rand_augment`` draws ``n_ops`` operations uniformly with replacement from
the policy's op pool and applies them sequentially at the policy magnitude,
flipping the sign per application for signed ops. Geometric ops fill exposed
regions with 0. Everything is deterministic given the caller's generator.

Magnitude-to-parameter mapping at magnitude M in [0, 30], f = M/30:

    rotate        +-(f * 30) degrees
    translate_x/y +-(f * 16) pixels (rounded)
    shear_x/y     +-(f * 0.3)
    brightness    factor 1 +- f * 0.9   (range [0.1, 1.9])
    contrast      factor 1 +- f * 0.9
    sharpness     factor 1 +- f * 0.9
    posterize     bits = 8 - round(f * 4)   (8..4)
    solarize      threshold = 255 - round(f * 255)
    equalize / autocontrast / identity: parameterless
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from fermix.imageops import (
    affine_resample,
    quantize,
    rotation_matrix,
    shear_matrix,
)


class AugOp(str, Enum):
    IDENTITY = "identity"
    ROTATE = "rotate"
    TRANSLATE_X = "translate_x"
    TRANSLATE_Y = "translate_y"
    SHEAR_X = "shear_x"
    SHEAR_Y = "shear_y"
    BRIGHTNESS = "brightness"
    CONTRAST = "contrast"
    SHARPNESS = "sharpness"
    EQUALIZE = "equalize"
    AUTOCONTRAST = "autocontrast"
    POSTERIZE = "posterize"
    SOLARIZE = "solarize"


DEFAULT_OP_POOL: tuple[AugOp, ...] = tuple(AugOp)

SIGNED_OPS = frozenset(
    {
        AugOp.ROTATE,
        AugOp.TRANSLATE_X,
        AugOp.TRANSLATE_Y,
        AugOp.SHEAR_X,
        AugOp.SHEAR_Y,
        AugOp.BRIGHTNESS,
        AugOp.CONTRAST,
        AugOp.SHARPNESS,
    }
)

MAX_MAGNITUDE = 30
_ROTATE_MAX_DEG = 30.0
_TRANSLATE_MAX_PX = 16.0
_SHEAR_MAX = 0.3
_ENHANCE_MAX_DELTA = 0.9
_POSTERIZE_MIN_BITS = 4


@dataclass(frozen=True)
class AugmentPolicy:
    n_ops: int = 2
    magnitude: int = 9
    op_pool: tuple[AugOp, ...] = field(default=DEFAULT_OP_POOL)

    def __post_init__(self) -> None:
        if self.n_ops < 0:
            raise ValueError("n_ops must be >= 0")
        if not (0 <= self.magnitude <= MAX_MAGNITUDE):
            raise ValueError(f"magnitude must be in [0, {MAX_MAGNITUDE}]")
        if self.n_ops > 0 and not self.op_pool:
            raise ValueError("op_pool must be non-empty when n_ops > 0")


def map_magnitude(op: AugOp, magnitude: int, sign: int = 1) -> float:
    """Translate a policy magnitude into the op's signed parameter."""
    f = magnitude / MAX_MAGNITUDE
    if op == AugOp.ROTATE:
        return sign * f * _ROTATE_MAX_DEG
    if op in (AugOp.TRANSLATE_X, AugOp.TRANSLATE_Y):
        return sign * f * _TRANSLATE_MAX_PX
    if op in (AugOp.SHEAR_X, AugOp.SHEAR_Y):
        return sign * f * _SHEAR_MAX
    if op in (AugOp.BRIGHTNESS, AugOp.CONTRAST, AugOp.SHARPNESS):
        return 1.0 + sign * f * _ENHANCE_MAX_DELTA
    if op == AugOp.POSTERIZE:
        return 8 - round(f * (8 - _POSTERIZE_MIN_BITS))
    if op == AugOp.SOLARIZE:
        return 255 - round(f * 255)
    return 0.0


_SMOOTH_KERNEL = np.array([[1.0, 1.0, 1.0], [1.0, 5.0, 1.0], [1.0, 1.0, 1.0]]) / 13.0


def _smooth(img: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="edge")
    out = np.zeros_like(img, dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            out += _SMOOTH_KERNEL[dy, dx] * padded[dy : dy + img.shape[0], dx : dx + img.shape[1]]
    return out


def _translate(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.zeros_like(img)
    h, w = img.shape
    if abs(dx) >= w or abs(dy) >= h:
        return out
    src_y = slice(max(0, -dy), min(h, h - dy))
    dst_y = slice(max(0, dy), min(h, h + dy))
    src_x = slice(max(0, -dx), min(w, w - dx))
    dst_x = slice(max(0, dx), min(w, w + dx))
    out[dst_y, dst_x] = img[src_y, src_x]
    return out


def _equalize(img: np.ndarray) -> np.ndarray:
    hist = np.bincount(img.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    nonzero = np.nonzero(hist)[0]
    if nonzero.size == 0 or cdf[-1] == hist[nonzero[0]]:
        return img.copy()
    cdf_min = cdf[nonzero[0]]
    lut = np.rint((cdf - cdf_min) * 255.0 / (cdf[-1] - cdf_min)).astype(np.uint8)
    return lut[img]


def _autocontrast(img: np.ndarray) -> np.ndarray:
    lo, hi = int(img.min()), int(img.max())
    if hi <= lo:
        return img.copy()
    lut = np.rint((np.arange(256) - lo) * 255.0 / (hi - lo)).clip(0, 255).astype(np.uint8)
    return lut[img]


def apply_op(pixels: np.ndarray, op: AugOp, param: float) -> np.ndarray:
    """Apply one op to a (48, 48) uint8 image; returns (48, 48) uint8."""
    img = np.asarray(pixels, dtype=np.uint8)
    h, w = img.shape
    center = ((w - 1) / 2.0, (h - 1) / 2.0)
    if op == AugOp.IDENTITY:
        return img.copy()
    if op == AugOp.ROTATE:
        if param == 0.0:
            return img.copy()
        forward = rotation_matrix(math.radians(param), center)
        return quantize(affine_resample(img, forward, img.shape, fill=0.0))
    if op == AugOp.TRANSLATE_X:
        return _translate(img, int(round(param)), 0)
    if op == AugOp.TRANSLATE_Y:
        return _translate(img, 0, int(round(param)))
    if op == AugOp.SHEAR_X:
        forward = shear_matrix(param, 0.0, center)
        return quantize(affine_resample(img, forward, img.shape, fill=0.0))
    if op == AugOp.SHEAR_Y:
        forward = shear_matrix(0.0, param, center)
        return quantize(affine_resample(img, forward, img.shape, fill=0.0))
    if op == AugOp.BRIGHTNESS:
        return quantize(img.astype(np.float64) * param)
    if op == AugOp.CONTRAST:
        mean = float(img.mean())
        return quantize(mean + (img.astype(np.float64) - mean) * param)
    if op == AugOp.SHARPNESS:
        smooth = _smooth(img.astype(np.float64))
        return quantize(smooth + (img.astype(np.float64) - smooth) * param)
    if op == AugOp.EQUALIZE:
        return _equalize(img)
    if op == AugOp.AUTOCONTRAST:
        return _autocontrast(img)
    if op == AugOp.POSTERIZE:
        bits = int(param)
        if bits >= 8:
            return img.copy()
        mask = np.uint8(256 - (1 << (8 - bits)))
        return (img & mask).astype(np.uint8)
    if op == AugOp.SOLARIZE:
        threshold = int(param)
        return np.where(img >= threshold, 255 - img.astype(np.int16), img).astype(np.uint8)
    raise ValueError(f"unknown op {op!r}")


def rand_augment(pixels: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator) -> np.ndarray:
    """Apply ``policy.n_ops`` randomly drawn ops at the policy magnitude."""
    out = np.asarray(pixels, dtype=np.uint8)
    for _ in range(policy.n_ops):
        op = policy.op_pool[int(rng.integers(len(policy.op_pool)))]
        sign = 1
        if op in SIGNED_OPS:
            sign = 1 if rng.random() < 0.5 else -1
        out = apply_op(out, op, map_magnitude(op, policy.magnitude, sign))
    return out
