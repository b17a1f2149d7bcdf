"""Morphological vein maps: blur, disk opening at radii 1..4, subtraction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyForegroundError

KERNEL_SIZE = 25
RADII = (1, 2, 3, 4)


@dataclass
class VeinStack:
    planes: dict  # radius -> float image in [0, 255]
    fused: np.ndarray


def default_sigma(ksize: int) -> float:
    return 0.3 * ((ksize - 1) / 2 - 1) + 0.8


def gaussian_kernel(ksize: int = KERNEL_SIZE, sigma: float | None = None) -> np.ndarray:
    if ksize % 2 != 1:
        raise ValueError("kernel size must be odd")
    if sigma is None:
        sigma = default_sigma(ksize)
    x = np.arange(ksize, dtype=np.float64) - ksize // 2
    k = np.exp(-x * x / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(gray: np.ndarray, ksize: int = KERNEL_SIZE, sigma: float | None = None) -> np.ndarray:
    """Separable Gaussian with edge replication; returns float64."""
    k = gaussian_kernel(ksize, sigma)
    out = ndimage.correlate1d(gray.astype(np.float64), k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def disk(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius * radius


def morph(gray: np.ndarray, op: str, radius: int) -> np.ndarray:
    """Flat grayscale erosion (min) or dilation (max) over a disk, edges replicated."""
    if not 1 <= radius <= 4:
        raise ValueError("radius must be in [1, 4]")
    fp = disk(radius)
    if op == "erode":
        return ndimage.grey_erosion(gray, footprint=fp, mode="nearest")
    if op == "dilate":
        return ndimage.grey_dilation(gray, footprint=fp, mode="nearest")
    raise ValueError(f"unknown op {op!r}")


def opening(gray: np.ndarray, radius: int) -> np.ndarray:
    return morph(morph(gray, "erode", radius), "dilate", radius)


def extract_vein(gray: np.ndarray, mask: np.ndarray, radii=RADII, ksize: int = KERNEL_SIZE) -> VeinStack:
    """|opening - blurred| per radius inside the leaf; fused = pixelwise max."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyForegroundError("vein extraction needs a non-empty mask")
    smooth = gaussian_blur(gray, ksize)
    planes = {}
    for r in radii:
        diff = np.abs(opening(smooth, r) - smooth)
        planes[r] = np.where(mask, np.clip(diff, 0.0, 255.0), 0.0)
    fused = np.max(np.stack([planes[r] for r in radii]), axis=0)
    return VeinStack(planes, fused)
