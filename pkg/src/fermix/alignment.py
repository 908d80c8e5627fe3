"""Aligned and landmark-masked variants of manifest samples.

Alignment crops the detection box (clipped to the image), rotates about the
crop center so the eye line is horizontal when both eye landmarks exist,
and resizes to 48x48 in a single bilinear resample. The composed transform
is returned so landmarks detected on the original image can be mapped into
the aligned frame instead of being re-detected.

Mask geometry: an axis-aligned rectangle of extent ``e`` centered on a
landmark spans ``[c - floor(e/2), c - floor(e/2) + e - 1]`` per axis, so for
even extents the extra pixel sits on the low side of the center. Rectangles
are clipped at the image border; everything outside their union is zeroed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from fermix.detection import DetectionCache, FaceDetection, LandmarkSet, detect
from fermix.imageops import (
    affine_resample,
    quantize,
    resize_matrix,
    rotation_matrix,
    to_grayscale,
    translation_matrix,
)
from fermix.manifest import CANONICAL_SIZE, DatasetManifest, ImageSample

log = logging.getLogger(__name__)

DEFAULT_MASK_W = 10
DEFAULT_MASK_H = 14


@dataclass(frozen=True)
class AlignTransform:
    """Affine map (3x3) from original-image coords to the aligned 48x48 frame."""

    matrix: np.ndarray

    def apply_point(self, point: tuple[float, float]) -> tuple[float, float]:
        x, y = point
        v = self.matrix @ np.array([x, y, 1.0])
        return float(v[0]), float(v[1])

    def apply_landmarks(self, landmarks: LandmarkSet) -> LandmarkSet:
        pts = landmarks.as_array()
        ones = np.ones((pts.shape[0], 1))
        mapped = (self.matrix @ np.hstack([pts, ones]).T).T[:, :2]
        return LandmarkSet.from_array(mapped)


def _clip_box(box: tuple[float, float, float, float], shape: tuple[int, int]) -> tuple[int, int, int, int] | None:
    h, w = shape
    x, y, bw, bh = box
    x0 = max(0, int(math.floor(x)))
    y0 = max(0, int(math.floor(y)))
    x1 = min(w, int(math.ceil(x + bw)))
    y1 = min(h, int(math.ceil(y + bh)))
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1, y1


def align(
    sample: ImageSample,
    detection: FaceDetection,
    out_size: int = CANONICAL_SIZE,
) -> tuple[ImageSample, AlignTransform] | None:
    """Produce the aligned variant of ``sample``, or None when the clipped box is degenerate."""
    gray = to_grayscale(sample.pixels)
    clipped = _clip_box(detection.box, gray.shape)
    if clipped is None:
        log.warning("align: discarding %s (degenerate box after clipping)", sample.group_id)
        return None
    x0, y0, x1, y1 = clipped
    cw, ch = x1 - x0, y1 - y0

    angle = 0.0
    if detection.landmarks is not None:
        rx, ry = detection.landmarks.right_eye
        lx, ly = detection.landmarks.left_eye
        # eye-line angle in crop coords; right eye is the image-left one
        angle = math.atan2(ly - ry, lx - rx)

    center = ((cw - 1) / 2.0, (ch - 1) / 2.0)
    forward = (
        resize_matrix((ch, cw), (out_size, out_size))
        @ rotation_matrix(-angle, center)
        @ translation_matrix(-x0, -y0)
    )
    crop = gray[y0:y1, x0:x1]
    crop_forward = forward @ translation_matrix(x0, y0)
    out = affine_resample(crop, crop_forward, (out_size, out_size), fill=0.0)
    aligned = replace(sample, pixels=quantize(out), variant="aligned")
    return aligned, AlignTransform(matrix=forward)


def _rect_slices(center: float, extent: int, size: int) -> tuple[int, int]:
    c = int(math.floor(center + 0.5))
    lo = c - extent // 2
    hi = lo + extent  # exclusive
    return max(0, lo), min(size, hi)


def rectangle_mask(
    landmarks: LandmarkSet,
    mask_w: int = DEFAULT_MASK_W,
    mask_h: int = DEFAULT_MASK_H,
    size: int = CANONICAL_SIZE,
) -> np.ndarray:
    """Boolean (size, size) union of the five landmark rectangles, clipped."""
    keep = np.zeros((size, size), dtype=bool)
    for x, y in landmarks.as_array():
        c0, c1 = _rect_slices(x, mask_w, size)
        r0, r1 = _rect_slices(y, mask_h, size)
        if c0 < c1 and r0 < r1:
            keep[r0:r1, c0:c1] = True
    return keep


def landmark_mask(
    aligned: ImageSample,
    landmarks: LandmarkSet,
    mask_w: int = DEFAULT_MASK_W,
    mask_h: int = DEFAULT_MASK_H,
) -> ImageSample:
    """Zero every pixel outside the landmark rectangles; variant becomes "cropped"."""
    if landmarks is None:
        raise ValueError("landmark_mask requires landmarks")
    keep = rectangle_mask(landmarks, mask_w, mask_h, aligned.pixels.shape[0])
    pixels = np.where(keep, aligned.pixels, np.uint8(0)).astype(np.uint8)
    return replace(aligned, pixels=pixels, variant="cropped")


def _variants_for(
    sample: ImageSample,
    cache: DetectionCache,
    mask_w: int,
    mask_h: int,
) -> tuple[ImageSample | None, ImageSample | None]:
    """(aligned, cropped) variants of one original sample, None where discarded."""
    det = detect(None, sample, cache)
    if det is None:
        return None, None
    result = align(sample, det)
    if result is None:
        return None, None
    aligned, transform = result
    if det.landmarks is None:
        log.warning("mask: discarding %s (no landmarks)", sample.group_id)
        return aligned, None
    mapped = transform.apply_landmarks(det.landmarks)
    return aligned, landmark_mask(aligned, mapped, mask_w, mask_h)


def preprocess_variants(
    manifest: DatasetManifest,
    cache: DetectionCache,
    mask_w: int = DEFAULT_MASK_W,
    mask_h: int = DEFAULT_MASK_H,
) -> tuple[DatasetManifest, DatasetManifest]:
    """Build the aligned-only and cropped-only manifests from cached detections."""
    aligned_samples: list[ImageSample] = []
    cropped_samples: list[ImageSample] = []
    for sample in manifest:
        aligned, cropped = _variants_for(sample, cache, mask_w, mask_h)
        if aligned is not None:
            aligned_samples.append(aligned)
        if cropped is not None:
            cropped_samples.append(cropped)
    meta = dict(manifest.meta)
    meta["mask"] = f"{mask_w}x{mask_h}"
    return DatasetManifest(aligned_samples, meta), DatasetManifest(cropped_samples, meta)


def build_augmented_merged(
    manifest: DatasetManifest,
    cache: DetectionCache,
    mask_w: int = DEFAULT_MASK_W,
    mask_h: int = DEFAULT_MASK_H,
) -> DatasetManifest:
    """Union of original + aligned + cropped variants, splits inherited per group.

    Every original sample is kept; the aligned variant exists when a face was
    detected and the clipped box is non-degenerate; the cropped variant
    additionally needs landmarks. Variants inherit the group's split from the
    input manifest, so no group ever spans two splits.
    """
    out: list[ImageSample] = []
    for sample in manifest:
        out.append(sample)
        aligned, cropped = _variants_for(sample, cache, mask_w, mask_h)
        if aligned is not None:
            out.append(aligned)
        if cropped is not None:
            out.append(cropped)
    meta = dict(manifest.meta)
    meta["mask"] = f"{mask_w}x{mask_h}"
    meta["stage"] = "augmented_merged"
    return DatasetManifest(out, meta)
