"""Independent reference implementations used to check the production paths.

Everything here is deliberately naive (per-pixel / per-pair loops) and
shares no code with the implementations under test.
"""

from __future__ import annotations

import numpy as np


def naive_bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Scalar-loop bilinear resize with half-pixel centers and edge clamping."""
    img = np.asarray(image, dtype=np.float64)
    in_h, in_w = img.shape
    out = np.zeros((out_h, out_w), dtype=np.float64)
    for r in range(out_h):
        for c in range(out_w):
            sy = (r + 0.5) * in_h / out_h - 0.5
            sx = (c + 0.5) * in_w / out_w - 0.5
            sy = min(max(sy, 0.0), in_h - 1.0)
            sx = min(max(sx, 0.0), in_w - 1.0)
            y0, x0 = int(np.floor(sy)), int(np.floor(sx))
            y1, x1 = min(y0 + 1, in_h - 1), min(x0 + 1, in_w - 1)
            fy, fx = sy - y0, sx - x0
            top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
            out[r, c] = top * (1 - fy) + bot * fy
    return out


def brute_force_confusion(true_labels, pred_labels, n_classes: int = 7) -> np.ndarray:
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(true_labels, pred_labels):
        counts[int(t)][int(p)] += 1
    return counts


def brute_force_class_metrics(true_labels, pred_labels, label: int) -> tuple[float, float, float]:
    """(precision, recall, f1) for one class by direct pair counting."""
    tp = sum(1 for t, p in zip(true_labels, pred_labels) if t == label and p == label)
    fp = sum(1 for t, p in zip(true_labels, pred_labels) if t != label and p == label)
    fn = sum(1 for t, p in zip(true_labels, pred_labels) if t == label and p != label)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def nearest_centroid_accuracy(images: np.ndarray, labels: np.ndarray) -> float:
    """Train accuracy of a nearest-centroid classifier on raw pixels."""
    classes = np.unique(labels)
    flat = images.reshape(len(images), -1).astype(np.float64)
    centroids = np.stack([flat[labels == c].mean(axis=0) for c in classes])
    correct = 0
    for x, y in zip(flat, labels):
        d = ((centroids - x) ** 2).sum(axis=1)
        if classes[int(np.argmin(d))] == y:
            correct += 1
    return correct / len(labels)


def mask_pixel_count(centers, mask_w: int, mask_h: int, size: int = 48) -> int:
    """Count pixels kept by enumerating every (row, col) against the rule:
    a rectangle of extent e spans [c - e//2, c - e//2 + e - 1] per axis."""
    kept = 0
    for r in range(size):
        for c in range(size):
            for cx, cy in centers:
                lo_c = cx - mask_w // 2
                lo_r = cy - mask_h // 2
                if lo_c <= c < lo_c + mask_w and lo_r <= r < lo_r + mask_h:
                    kept += 1
                    break
    return kept
