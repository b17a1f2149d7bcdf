"""Seeded synthetic leaves for desk-scale evaluation.

Each class fixes a base shape (ellipse aspect, radial-sinusoid serration), a
green hue band and a vein pattern (midrib width, branch count and angle).
Samples jitter every parameter, are rotated, scaled and shifted, and get a
random illumination gain, so no single cue identifies a class on its own.
Veins are drawn lighter than the blade.
"""
from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..raster import save_image

CANVAS = 256
BASE_LENGTH = 160.0


@dataclass(frozen=True)
class SynthClass:
    aspect: float         # width / length
    serration: float      # relative amplitude of the radial sinusoid
    teeth: int            # sinusoid frequency
    hue: float            # degrees
    midrib: float         # midrib width in px at base scale
    branches: int         # secondary vein pairs
    angle: float          # branch angle to the midrib, degrees


# Cues are spread so that each class is unique only in combination.
CLASSES = (
    SynthClass(0.38, 0.00, 16, 92, 2.0, 4, 35),
    SynthClass(0.38, 0.06, 16, 112, 3.5, 6, 35),
    SynthClass(0.50, 0.00, 16, 112, 3.5, 4, 60),
    SynthClass(0.50, 0.06, 16, 92, 2.0, 6, 60),
    SynthClass(0.62, 0.00, 16, 92, 3.5, 6, 35),
    SynthClass(0.62, 0.06, 16, 112, 2.0, 4, 35),
    SynthClass(0.74, 0.00, 16, 112, 2.0, 6, 60),
    SynthClass(0.74, 0.06, 16, 92, 3.5, 4, 60),
)
N_CLASSES = len(CLASSES)


@dataclass(frozen=True)
class Jitter:
    rotation: float = 40.0   # degrees, uniform +-
    scale: float = 0.20      # relative, uniform +-
    shift: float = 5.0       # px, uniform +-
    aspect: float = 0.075    # wide enough that neighbouring aspect classes touch
    serration: float = 0.015
    hue: float = 14.0
    midrib: float = 0.6
    angle: float = 8.0
    noise: float = 6.0       # per-pixel gray-level sigma
    brightness: float = 0.25  # relative illumination change, uniform +-


@dataclass(frozen=True)
class LeafParams:
    length: float
    aspect: float
    serration: float
    teeth: int
    hue: float
    midrib: float
    branches: int
    angle: float
    rotation: float
    centre: tuple
    brightness: float = 1.0


def radius(theta, p: LeafParams):
    """Boundary radius in the leaf frame; theta measured from the width axis."""
    a = p.length * p.aspect / 2
    b = p.length / 2
    ell = 1.0 / np.sqrt((np.cos(theta) / a) ** 2 + (np.sin(theta) / b) ** 2)
    return ell * (1 + p.serration * np.cos(p.teeth * theta))


def analytic_area(p: LeafParams, n: int = 8192) -> float:
    theta = np.linspace(0, 2 * math.pi, n, endpoint=False)
    return float(0.5 * np.sum(radius(theta, p) ** 2) * (2 * math.pi / n))


def sample_params(class_id: int, rng, jitter: Jitter = Jitter()) -> LeafParams:
    if not 0 <= class_id < N_CLASSES:
        raise ValueError(f"class id must be in 0..{N_CLASSES - 1}")
    c = CLASSES[class_id]

    def u(w):
        return rng.uniform(-w, w)

    return LeafParams(
        length=BASE_LENGTH * (1 + u(jitter.scale)),
        aspect=c.aspect + u(jitter.aspect),
        serration=max(0.0, c.serration + u(jitter.serration)),
        teeth=c.teeth,
        hue=c.hue + u(jitter.hue),
        midrib=max(1.0, c.midrib + u(jitter.midrib)),
        branches=c.branches,
        angle=c.angle + u(jitter.angle),
        rotation=math.radians(u(jitter.rotation)),
        centre=(CANVAS / 2 + u(jitter.shift), CANVAS / 2 + u(jitter.shift)),
        brightness=1 + u(jitter.brightness),
    )


def _segment_coverage(u, v, p0, p1, width):
    """Anti-aliased coverage of a thick segment on the (u, v) grid."""
    d = np.subtract(p1, p0)
    t = ((u - p0[0]) * d[0] + (v - p0[1]) * d[1]) / float(d @ d)
    t = np.clip(t, 0, 1)
    dist = np.hypot(u - (p0[0] + t * d[0]), v - (p0[1] + t * d[1]))
    return np.clip(width / 2 - dist + 0.5, 0, 1)


def render(p: LeafParams, rng, noise: float = Jitter.noise) -> np.ndarray:
    y, x = np.mgrid[0:CANVAS, 0:CANVAS].astype(np.float64)
    cx, cy = p.centre
    cr, sr = math.cos(p.rotation), math.sin(p.rotation)
    # leaf frame: u across the blade, v along it (tip at negative v, i.e. up)
    u = (x - cx) * cr + (y - cy) * sr
    v = -(x - cx) * sr + (y - cy) * cr
    inside = np.hypot(u, v) <= radius(np.arctan2(v, u), p)

    scale = p.length / BASE_LENGTH
    half = p.length / 2
    veins = _segment_coverage(u, v, (0.0, -0.95 * half), (0.0, 0.95 * half), p.midrib * scale)
    reach = p.length * p.aspect
    ang = math.radians(p.angle)
    bw = max(1.0, 0.5 * p.midrib + 0.5) * scale
    for k in range(p.branches):
        v0 = half * (-0.7 + 1.4 * (k + 0.5) / p.branches)
        for side in (-1.0, 1.0):
            end = (side * reach * math.sin(ang), v0 - reach * math.cos(ang))
            veins = np.maximum(veins, _segment_coverage(u, v, (0.0, v0), end, bw))

    h = (p.hue % 360) / 360
    blade = np.array(colorsys.hsv_to_rgb(h, 0.6, 0.45)) * 255
    vein_col = np.array(colorsys.hsv_to_rgb(h, 0.35, 0.68)) * 255
    blotch = ndimage.gaussian_filter(rng.standard_normal((CANVAS, CANVAS)), 6) * 60
    # illumination gain on the blade only: brightened veins would cross the Otsu threshold
    leaf = (blade[None, None, :] + blotch[..., None]) * p.brightness
    leaf = leaf * (1 - veins[..., None]) + vein_col[None, None, :] * veins[..., None]
    leaf = leaf + rng.normal(0, noise, (CANVAS, CANVAS, 1))
    img = np.where(inside[..., None], leaf, 255.0)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def synth_leaf(class_id: int, seed, jitter: Jitter = Jitter()) -> tuple[np.ndarray, int]:
    """Render one leaf of ``class_id`` on a white 256x256 canvas."""
    rng = np.random.default_rng(seed)
    p = sample_params(class_id, rng, jitter)
    return render(p, rng, jitter.noise), class_id


def write_dataset(root, n_per_class: int = 40, seed: int = 0, classes=None) -> list[Path]:
    """Write ``class_XX/leaf_XX_YYY.png`` files; returns the written paths."""
    root = Path(root)
    paths = []
    for c in (range(N_CLASSES) if classes is None else classes):
        d = root / f"class_{c:02d}"
        d.mkdir(parents=True, exist_ok=True)
        for i in range(n_per_class):
            img, _ = synth_leaf(c, (seed, c, i))
            path = d / f"leaf_{c:02d}_{i:03d}.png"
            save_image(path, img)
            paths.append(path)
    return paths
