"""Per-leaf feature extraction: every branch input from one image."""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from PIL import Image

from .. import BRANCHES, __version__
from ..color import color_features, feature_names as color_names
from ..geometry import SHAPE_NAMES, preprocess, shape_vector, trace_contour
from ..raster import binarize, crop_to_content, largest_component, load_image, resize, to_grayscale
from ..signature import fourier_descriptors, xy_projection
from ..texture import GlcmConfig, texture_vector
from ..vein import extract_vein

# Bumped whenever branch order or vector layouts change; stamped into feature files.
FEATURE_FORMAT = f"leafrec-features/1 branches={','.join(BRANCHES)}"
HANDCRAFTED = ("shape", "texture", "colorstats", "fourier", "xyproj")


@dataclass(frozen=True)
class FeatureConfig:
    work_side: int = 192      # leaf is fitted into this square before measuring
    encoder_side: int = 48    # CNN input side for the color and vein images
    glcm_levels: int = 32
    fourier_k: int = 16


@dataclass
class LeafFeatureSet:
    shape: np.ndarray        # (35,)
    texture: np.ndarray      # (14,)
    colorstats: np.ndarray   # (36,)
    fourier: np.ndarray      # (k,)
    xyproj: np.ndarray       # (60,)
    color_image: np.ndarray  # (S, S, 3) uint8
    vein_image: np.ndarray   # (S, S) float64

    def __eq__(self, other):
        return isinstance(other, LeafFeatureSet) and all(
            np.array_equal(getattr(self, f.name), getattr(other, f.name)) for f in fields(self))

    def to_npz(self, path) -> None:
        with open(path, "wb") as fh:
            np.savez(fh, format=np.array(FEATURE_FORMAT),
                     **{f.name: getattr(self, f.name) for f in fields(self)})

    @classmethod
    def from_npz(cls, path) -> "LeafFeatureSet":
        with np.load(path, allow_pickle=False) as z:
            if str(z["format"]) != FEATURE_FORMAT:
                raise ValueError(f"{path}: feature format {str(z['format'])!r} != {FEATURE_FORMAT!r}")
            return cls(**{f.name: z[f.name].copy() for f in fields(cls)})


def _tag(branch, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        exc.branch = branch
        if exc.args and isinstance(exc.args[0], str) and not exc.args[0].startswith("["):
            exc.args = (f"[{branch}] {exc.args[0]}",) + exc.args[1:]
        raise


def downsample(arr: np.ndarray, side: int) -> np.ndarray:
    """Box-filter a square image down to ``side``; keeps thin veins visible."""
    if arr.shape[0] == side:
        return arr.copy()
    if arr.ndim == 3:
        return np.asarray(Image.fromarray(arr).resize((side, side), Image.BOX))
    out = Image.fromarray(arr.astype(np.float32), mode="F").resize((side, side), Image.BOX)
    return np.asarray(out, dtype=np.float64)


def extract_features(source, cfg: FeatureConfig = FeatureConfig(), debug: bool = False):
    """Run preprocessing and every handcrafted branch on one image.

    ``source`` is a path or an RGB array. Returns a LeafFeatureSet, or
    ``(LeafFeatureSet, intermediates)`` when ``debug`` is set. Errors keep their
    type and carry the failing stage in ``.branch``.
    """
    img = _tag("load", load_image, source) if isinstance(source, (str, Path)) else np.asarray(source)
    mask = _tag("binarize", lambda: binarize(to_grayscale(img)))
    img, mask = _tag("align", preprocess, img, mask)
    img, mask = _tag("crop", crop_to_content, img, mask)
    img = resize(img, cfg.work_side)
    mask = largest_component(resize(mask, cfg.work_side, fill=False, nearest=True))
    gray = to_grayscale(img)
    contour = _tag("shape", trace_contour, mask)
    shape = _tag("shape", shape_vector, gray, mask, contour)
    texture = _tag("texture", texture_vector, gray, mask, GlcmConfig(levels=cfg.glcm_levels))
    colorstats = _tag("colorstats", color_features, img, mask)
    fourier = _tag("fourier", fourier_descriptors, contour, cfg.fourier_k)
    xyproj = _tag("xyproj", lambda: xy_projection(crop_to_content(img, mask)[1]))
    veins = _tag("vein", extract_vein, gray, mask)
    feats = LeafFeatureSet(
        shape=shape, texture=texture, colorstats=colorstats, fourier=fourier, xyproj=xyproj,
        color_image=downsample(img, cfg.encoder_side),
        vein_image=downsample(veins.fused, cfg.encoder_side),
    )
    if not debug:
        return feats
    overlay = img.copy()
    overlay[contour.points[:, 1], contour.points[:, 0]] = (255, 0, 0)
    inter = {"gray": gray, "mask": mask, "contour": overlay, "vein": veins.fused}
    inter.update({f"vein_r{r}": plane for r, plane in veins.planes.items()})
    return feats, inter


def _unit_vein(v):
    # a high percentile rather than the max: margin tips can spike
    pos = v[v > 0]
    ref = np.percentile(pos, 99) if pos.size else 1.0
    return np.clip(v / max(ref, 1e-9), 0, 2)


def branch_inputs(feats: list[LeafFeatureSet]) -> dict[str, np.ndarray]:
    """Encoder inputs for each branch, stacked over leaves."""
    color = np.stack([(255.0 - f.color_image.astype(np.float64)).transpose(2, 0, 1) / 255.0 for f in feats])
    vein = np.stack([_unit_vein(f.vein_image) for f in feats])[:, None]
    return {
        "color": color,
        "vein": vein,
        "xyproj": np.stack([f.xyproj for f in feats])[:, None, :],
        "shape": np.stack([f.shape for f in feats]),
        "texture": np.stack([f.texture for f in feats]),
        "colorstats": np.stack([f.colorstats for f in feats]),
        "fourier": np.stack([f.fourier for f in feats]),
    }


def column_names(branch: str, dim: int) -> list[str]:
    if branch == "shape":
        return list(SHAPE_NAMES)
    if branch == "colorstats":
        return color_names()
    if branch == "texture":
        return [f"f{i}" for i in range(1, dim + 1)]
    if branch == "fourier":
        return [f"F{i}" for i in range(1, dim + 1)]
    return [f"x{i}" for i in range(1, dim // 2 + 1)] + [f"y{i}" for i in range(1, dim // 2 + 1)]


def write_feature_csv(path, branch: str, rows: list[tuple[int, str, np.ndarray]]) -> None:
    """One row per leaf: index, label, then the branch vector."""
    dim = len(rows[0][2]) if rows else 0
    with open(path, "w", newline="") as fh:
        fh.write(f"# {FEATURE_FORMAT} version={__version__}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label"] + column_names(branch, dim))
        for idx, label, vec in rows:
            w.writerow([idx, label] + [repr(float(v)) for v in vec])


def read_feature_csv(path) -> tuple[list[int], list[str], np.ndarray]:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith(f"# {FEATURE_FORMAT} "):
            raise ValueError(f"{path}: incompatible feature file header {first!r}")
        r = csv.reader(fh)
        next(r)
        idx, labels, vecs = [], [], []
        for row in r:
            idx.append(int(row[0]))
            labels.append(row[1])
            vecs.append([float(v) for v in row[2:]])
    return idx, labels, np.array(vecs)
