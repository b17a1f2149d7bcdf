"""Boundary signatures: centroid-distance Fourier descriptors and xy-projections."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, EmptyForegroundError
from .geometry import Contour

SIGNATURE_POINTS = 128
N_DESCRIPTORS = 16
PROJECTION_BINS = 30


@dataclass(frozen=True)
class RadialSignature:
    r: np.ndarray
    centroid: tuple[float, float]


def radial_signature(contour: Contour, m: int = SIGNATURE_POINTS) -> RadialSignature:
    """Centroid distance of boundary pixels, resampled uniformly in arc length."""
    pts = np.asarray(contour.points, dtype=np.float64)
    if len(pts) < 3:
        raise DegenerateError(f"signature needs >= 3 boundary pixels, got {len(pts)}")
    if m < 2 or m & (m - 1):
        raise ValueError("resample count must be a power of two")
    xc, yc = pts.mean(axis=0)
    r = np.hypot(pts[:, 0] - xc, pts[:, 1] - yc)
    steps = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
    s = np.concatenate([[0.0], np.cumsum(steps)])
    total = s[-1]
    if total <= 0:
        raise DegenerateError("contour has zero length")
    closed_r = np.concatenate([r, r[:1]])
    t = np.arange(m) * (total / m)
    return RadialSignature(np.interp(t, s, closed_r), (float(xc), float(yc)))


def fft(x) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT, X_k = sum_n x_n exp(-2 pi i k n / M)."""
    a = np.asarray(x, dtype=np.complex128).ravel()
    m = a.size
    if m < 1 or m & (m - 1):
        raise ValueError(f"FFT length must be a power of two, got {m}")
    bits = m.bit_length() - 1
    idx = np.arange(m)
    rev = np.zeros(m, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    a = a[rev]
    half = 1
    while half < m:
        tw = np.exp(-2j * np.pi * np.arange(half) / (2 * half))
        a = a.reshape(-1, 2 * half)
        even = a[:, :half].copy()
        odd = a[:, half:] * tw
        a[:, :half] = even + odd
        a[:, half:] = even - odd
        a = a.ravel()
        half *= 2
    return a


def fourier_descriptors(contour: Contour, k: int = N_DESCRIPTORS, m: int = SIGNATURE_POINTS) -> np.ndarray:
    """|F(1..k)| / |F(0)| of the resampled centroid-distance signature."""
    if not 1 <= k < m // 2:
        raise ValueError(f"need 1 <= k < {m // 2}, got {k}")
    spec = np.abs(fft(radial_signature(contour, m).r))
    if spec[0] <= 0:
        raise DegenerateError("signature has no DC component")
    return spec[1:k + 1] / spec[0]


def _strip_edges(n: int, bins: int) -> list[tuple[int, int]]:
    edges = np.floor(np.linspace(0, n, bins + 1) + 0.5).astype(int)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        a = min(a, n - 1)
        out.append((a, max(b, a + 1)))
    return out


def xy_projection(mask: np.ndarray, bins: int = PROJECTION_BINS) -> np.ndarray:
    """Leaf-pixel fraction in each of ``bins`` column strips, then each of ``bins`` row strips."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if h == 0 or w == 0 or not mask.any():
        raise EmptyForegroundError("projection needs a non-empty mask")
    col_counts = np.concatenate([[0], np.cumsum(mask.sum(axis=0))])
    row_counts = np.concatenate([[0], np.cumsum(mask.sum(axis=1))])
    vert = [(col_counts[b] - col_counts[a]) / ((b - a) * h) for a, b in _strip_edges(w, bins)]
    horiz = [(row_counts[b] - row_counts[a]) / ((b - a) * w) for a, b in _strip_edges(h, bins)]
    return np.array(vert + horiz, dtype=np.float64)
