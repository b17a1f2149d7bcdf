"""Pixel containers and the shared preprocessing steps.

Images are plain numpy arrays:

* RGB image  -- ``(H, W, 3)`` uint8, R, G, B order
* gray image -- ``(H, W)`` uint8
* mask       -- ``(H, W)`` bool, True = leaf
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import DegenerateError, EmptyForegroundError, ImageFormatError

GRAY_WEIGHTS = (0.2989, 0.5870, 0.1140)
WHITE = (255, 255, 255)
_EIGHT = np.ones((3, 3), dtype=bool)


def check_rgb(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected (H, W, 3) image, got {img.shape}")
    return img


def load_image(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as im:
            im.load()
            rgb = im.convert("RGB")
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc
    return np.asarray(rgb, dtype=np.uint8).copy()


def save_image(path, img: np.ndarray) -> None:
    """Write a uint8 RGB, gray, or boolean mask array as PNG."""
    arr = np.asarray(img)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    Image.fromarray(np.ascontiguousarray(arr.astype(np.uint8))).save(path, format="PNG")


def to_grayscale(img: np.ndarray) -> np.ndarray:
    check_rgb(img)
    rgb = img.astype(np.float64)
    g = GRAY_WEIGHTS[0] * rgb[..., 0] + GRAY_WEIGHTS[1] * rgb[..., 1] + GRAY_WEIGHTS[2] * rgb[..., 2]
    return np.clip(np.floor(g + 0.5), 0, 255).astype(np.uint8)


def otsu_threshold(gray: np.ndarray) -> int:
    """Exhaustive Otsu scan; returns t such that ``gray <= t`` is the dark class."""
    hist = np.bincount(gray.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise EmptyForegroundError("degenerate histogram: image has a single intensity")
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    s0 = np.cumsum(hist * levels)
    total, stotal = w0[-1], s0[-1]
    w1 = total - w0
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (stotal * w0 - total * s0) ** 2 / (w0 * w1)
    between[(w0 == 0) | (w1 == 0)] = -1.0
    return int(np.argmax(between))


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Keep the largest 8-connected component (first in raster order on ties)."""
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        raise EmptyForegroundError("mask has no foreground pixels")
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def binarize(gray: np.ndarray) -> np.ndarray:
    # leaf is darker than the white background, so the dark Otsu class is foreground
    t = otsu_threshold(gray)
    return largest_component(gray <= t)


def bounding_box(mask: np.ndarray) -> tuple[int, int, int, int]:
    """(row0, row1, col0, col1), half-open."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        raise EmptyForegroundError("mask has no foreground pixels")
    cols = np.flatnonzero(mask.any(axis=0))
    return int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1


def crop_to_content(img: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if img.shape[:2] != mask.shape:
        raise ValueError(f"image {img.shape[:2]} and mask {mask.shape} differ")
    r0, r1, c0, c1 = bounding_box(mask)
    return img[r0:r1, c0:c1].copy(), mask[r0:r1, c0:c1].copy()


def _sample_bilinear(src: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    h, w = src.shape[:2]
    r = np.clip(rows, 0, h - 1)
    c = np.clip(cols, 0, w - 1)
    r0 = np.floor(r).astype(int)
    c0 = np.floor(c).astype(int)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (r - r0)[:, None]
    fc = (c - c0)[None, :]
    if src.ndim == 3:
        fr = fr[..., None]
        fc = fc[..., None]
    s = src.astype(np.float64)
    top = s[r0][:, c0] * (1 - fc) + s[r0][:, c1] * fc
    bot = s[r1][:, c0] * (1 - fc) + s[r1][:, c1] * fc
    return top * (1 - fr) + bot * fr


def resample(src: np.ndarray, out_h: int, out_w: int, nearest: bool = False) -> np.ndarray:
    """Scale ``src`` to exactly ``(out_h, out_w)``, pixel centres aligned.

    Returns float64 for bilinear, the input dtype for nearest.
    """
    h, w = src.shape[:2]
    rows = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    cols = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    if nearest:
        ri = np.clip(np.floor(rows + 0.5).astype(int), 0, h - 1)
        ci = np.clip(np.floor(cols + 0.5).astype(int), 0, w - 1)
        return src[ri][:, ci]
    return _sample_bilinear(src, rows, cols)


def resize(img: np.ndarray, side: int, fill=WHITE, nearest: bool = False) -> np.ndarray:
    """Fit ``img`` into a ``side x side`` square, keeping aspect ratio.

    The longer dimension is scaled to ``side``; the shorter is centred and
    padded with ``fill`` (white by default, 0/False for masks).
    """
    if side < 1:
        raise ValueError("side must be >= 1")
    h, w = img.shape[:2]
    scale = side / max(h, w)
    nh = min(side, max(1, int(round(h * scale))))
    nw = min(side, max(1, int(round(w * scale))))
    scaled = resample(img, nh, nw, nearest=nearest)
    if not nearest:
        scaled = np.clip(np.floor(scaled + 0.5), 0, 255).astype(img.dtype)
    out = np.empty((side, side) + img.shape[2:], dtype=img.dtype)
    out[...] = fill if img.ndim == 3 else np.asarray(fill).ravel()[0]
    top = (side - nh) // 2
    left = (side - nw) // 2
    out[top:top + nh, left:left + nw] = scaled
    return out
