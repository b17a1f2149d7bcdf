"""Color-space conversion and per-channel distribution statistics."""
from __future__ import annotations

import numpy as np

from .errors import DegenerateError, EmptyForegroundError
from .raster import check_rgb

SPACES = ("RGB", "HSV", "HSL")
CHANNELS = {"RGB": ("R", "G", "B"), "HSV": ("H", "S", "V"), "HSL": ("H", "S", "L")}
STATS = ("mean", "variance", "skewness", "kurtosis")


def _hue(rgb, cmax, delta):
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(cmax == r, ((g - b) / safe) % 6.0,
                 np.where(cmax == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0))
    h = np.where(delta > 0, 60.0 * h, 0.0)
    return np.where(h >= 360.0, h - 360.0, h)


def convert_color_space(img: np.ndarray, target: str) -> np.ndarray:
    """Hexcone conversion to HSV or HSL. H in [0, 360), other planes in [0, 1].

    Achromatic pixels get hue 0.
    """
    check_rgb(img)
    rgb = img.astype(np.float64) / 255.0
    cmax = rgb.max(axis=-1)
    cmin = rgb.min(axis=-1)
    delta = cmax - cmin
    h = _hue(rgb, cmax, delta)
    target = target.upper()
    if target == "HSV":
        s = np.where(cmax > 0, delta / np.where(cmax > 0, cmax, 1.0), 0.0)
        return np.stack([h, s, cmax], axis=-1)
    if target in ("HSL", "HLS", "HSI"):
        light = (cmax + cmin) / 2.0
        den = 1.0 - np.abs(2.0 * light - 1.0)
        s = np.where((delta > 0) & (den > 0), delta / np.where(den > 0, den, 1.0), 0.0)
        return np.stack([h, np.clip(s, 0.0, 1.0), light], axis=-1)
    raise ValueError(f"unknown color space {target!r}")


def channel_stats(values) -> tuple[float, float, float, float]:
    """Population mean, variance, skewness and excess kurtosis.

    Skewness and kurtosis are 0 for a constant channel.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise DegenerateError("channel_stats needs at least one value")
    if x.max() == x.min():
        return float(x[0]), 0.0, 0.0, 0.0
    mu = x.mean()
    d = x - mu
    var = float((d * d).mean())
    z = d / np.sqrt(var)
    return float(mu), var, float((z ** 3).mean()), float((z ** 4).mean() - 3.0)


def color_features(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """36-d vector: space x channel x (mean, variance, skewness, kurtosis)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyForegroundError("color features need a non-empty mask")
    planes = {
        "RGB": img.astype(np.float64),
        "HSV": convert_color_space(img, "HSV"),
        "HSL": convert_color_space(img, "HSL"),
    }
    out = []
    for space in SPACES:
        fg = planes[space][mask]
        for c in range(3):
            out.extend(channel_stats(fg[:, c]))
    return np.array(out)


def feature_names() -> list[str]:
    return [f"{s}_{c}_{st}" for s in SPACES for c in CHANNELS[s] for st in STATS]
