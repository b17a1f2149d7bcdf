"""On-disk feature cache: one npz per manifest row, plus per-branch CSV exports."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..raster import save_image
from .features import FEATURE_FORMAT, HANDCRAFTED, FeatureConfig, LeafFeatureSet, extract_features, write_feature_csv
from .folds import DatasetManifest, Entry

log = logging.getLogger(__name__)

CACHE_ENV = "LEAFREC_CACHE"


def cache_dir(default) -> Path:
    return Path(os.environ.get(CACHE_ENV) or default)


@dataclass
class ExtractSummary:
    total: int = 0
    hits: int = 0
    computed: int = 0
    failed: dict = field(default_factory=dict)   # index -> message


class FeatureStore:
    """Cached LeafFeatureSets keyed by manifest index, path and feature config."""

    def __init__(self, root, cfg: FeatureConfig = FeatureConfig()):
        self.root = Path(root)
        self.cfg = cfg
        self.tag = hashlib.sha256(json.dumps([FEATURE_FORMAT, asdict(cfg)], sort_keys=True)
                                  .encode()).hexdigest()[:10]

    def path(self, entry: Entry) -> Path:
        h = hashlib.sha256(entry.path.encode()).hexdigest()[:10]
        return self.root / self.tag / f"{entry.index:05d}-{h}.npz"

    def has(self, entry: Entry) -> bool:
        return self.path(entry).is_file()

    def load(self, entry: Entry) -> LeafFeatureSet:
        return LeafFeatureSet.from_npz(self.path(entry))

    def save(self, entry: Entry, feats: LeafFeatureSet) -> None:
        p = self.path(entry)
        p.parent.mkdir(parents=True, exist_ok=True)
        tmp = p.with_suffix(".tmp")
        feats.to_npz(tmp)
        tmp.replace(p)  # a killed run never leaves a half-written cache entry

    def load_all(self, manifest: DatasetManifest) -> tuple[list, list]:
        """Features for every cached row, and the rows that have none."""
        have, missing = [], []
        for e in manifest.entries:
            (have if self.has(e) else missing).append(e)
        return [(e, self.load(e)) for e in have], missing


def _to_u8(plane: np.ndarray) -> np.ndarray:
    plane = np.asarray(plane, dtype=np.float64)
    top = plane.max()
    return np.zeros(plane.shape, np.uint8) if top <= 0 else np.clip(255 * plane / top, 0, 255).astype(np.uint8)


def _extract_one(path: str, cfg: FeatureConfig, debug_dir):
    try:
        if debug_dir is None:
            return extract_features(path, cfg), None
        feats, inter = extract_features(path, cfg, debug=True)
        d = Path(debug_dir)
        d.mkdir(parents=True, exist_ok=True)
        for name, arr in inter.items():
            arr = np.asarray(arr)
            save_image(d / f"{name}.png", arr if arr.dtype in (bool, np.uint8) else _to_u8(arr))
        return feats, None
    except Exception as exc:
        branch = getattr(exc, "branch", "")
        return None, f"{type(exc).__name__}{f' in {branch}' if branch else ''}: {exc}"


def extract_manifest(manifest: DatasetManifest, store: FeatureStore, debug_root=None,
                     workers: int = 1) -> ExtractSummary:
    """Extract every uncached row; failures are recorded and the rest continue."""
    summary = ExtractSummary(total=len(manifest))
    todo = []
    for e in manifest.entries:
        if store.has(e) and debug_root is None:
            summary.hits += 1
        else:
            todo.append(e)
    dbg = [None if debug_root is None else Path(debug_root) / f"{e.index:05d}" for e in todo]
    args = ([e.path for e in todo], [store.cfg] * len(todo), dbg)
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_extract_one, *args, chunksize=4))
    else:
        results = [_extract_one(*a) for a in zip(*args)]
    for e, (feats, err) in zip(todo, results):
        if err is not None:
            summary.failed[e.index] = err
            log.error("row %d (%s): %s", e.index, e.path, err)
            continue
        store.save(e, feats)
        summary.computed += 1
    return summary


def export_csvs(manifest: DatasetManifest, store: FeatureStore, outdir) -> list[Path]:
    """One CSV per handcrafted branch over the cached rows."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows, _ = store.load_all(manifest)
    paths = []
    for branch in HANDCRAFTED:
        p = outdir / f"{branch}.csv"
        write_feature_csv(p, branch, [(e.index, e.label, getattr(f, branch)) for e, f in rows])
        paths.append(p)
    return paths
