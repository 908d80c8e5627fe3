"""Pixel-level primitives: luma conversion and affine/bilinear resampling.

Coordinate convention used throughout: ``x`` is the column index, ``y`` the
row index, and pixel centers sit at integer coordinates. Resizing uses the
half-pixel-center mapping ``x_src = (x_dst + 0.5) * (W_in / W_out) - 0.5``,
so a same-size resize is an exact identity.
"""

from __future__ import annotations

import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def to_grayscale(pixels: np.ndarray) -> np.ndarray:
    """Collapse an (H, W, 3) image to (H, W) float64 luma; pass (H, W) through."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        r, g, b = LUMA_WEIGHTS
        return arr[:, :, 0] * r + arr[:, :, 1] * g + arr[:, :, 2] * b
    raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {arr.shape}")


def resize_matrix(in_shape: tuple[int, int], out_shape: tuple[int, int]) -> np.ndarray:
    """Forward affine (3x3) mapping input pixel coords to output pixel coords."""
    h_in, w_in = in_shape
    h_out, w_out = out_shape
    sx = w_out / w_in
    sy = h_out / h_in
    return np.array(
        [
            [sx, 0.0, 0.5 * sx - 0.5],
            [0.0, sy, 0.5 * sy - 0.5],
            [0.0, 0.0, 1.0],
        ]
    )


def rotation_matrix(angle_rad: float, center: tuple[float, float]) -> np.ndarray:
    """Forward affine rotating by ``angle_rad`` (counter-clockwise, y down) about ``center``."""
    cx, cy = center
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    # translate center to origin, rotate, translate back
    return np.array(
        [
            [c, -s, cx - c * cx + s * cy],
            [s, c, cy - s * cx - c * cy],
            [0.0, 0.0, 1.0],
        ]
    )


def translation_matrix(dx: float, dy: float) -> np.ndarray:
    return np.array([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]])


def shear_matrix(sx: float, sy: float, center: tuple[float, float]) -> np.ndarray:
    """Forward affine shear about ``center``: x += sx*(y-cy), y += sy*(x-cx)."""
    cx, cy = center
    return np.array(
        [
            [1.0, sx, -sx * cy],
            [sy, 1.0, -sy * cx],
            [0.0, 0.0, 1.0],
        ]
    )


def affine_resample(
    image: np.ndarray,
    forward: np.ndarray,
    out_shape: tuple[int, int],
    fill: float = 0.0,
) -> np.ndarray:
    """Resample ``image`` under the forward affine ``forward`` (3x3), bilinear.

    Every output pixel center is mapped back through ``forward``'s inverse.
    Source positions inside the image extent ``[-0.5, W-0.5] x [-0.5, H-0.5]``
    are interpolated with edge clamping (so a pure resize replicates borders
    rather than darkening them); positions outside the extent get ``fill``.
    Returns float64; callers quantize once at the end of their pipeline.
    """
    img = np.asarray(image, dtype=np.float64)
    h_in, w_in = img.shape
    h_out, w_out = out_shape
    inv = np.linalg.inv(forward)

    xs, ys = np.meshgrid(np.arange(w_out, dtype=np.float64), np.arange(h_out, dtype=np.float64))
    src_x = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
    src_y = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]

    inside = (
        (src_x >= -0.5) & (src_x <= w_in - 0.5) & (src_y >= -0.5) & (src_y <= h_in - 0.5)
    )

    cx = np.clip(src_x, 0.0, w_in - 1.0)
    cy = np.clip(src_y, 0.0, h_in - 1.0)
    x0 = np.floor(cx).astype(np.int64)
    y0 = np.floor(cy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w_in - 1)
    y1 = np.minimum(y0 + 1, h_in - 1)
    fx = cx - x0
    fy = cy - y0

    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return np.where(inside, out, fill)


def bilinear_resize(image: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resize to ``out_shape`` = (H, W); returns float64."""
    img = np.asarray(image, dtype=np.float64)
    return affine_resample(img, resize_matrix(img.shape, out_shape), out_shape)


def quantize(image: np.ndarray) -> np.ndarray:
    """Round a float image to uint8, clipping to [0, 255]."""
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)
