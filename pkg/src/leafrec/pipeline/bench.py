"""End-to-end desk benchmark on the synthetic set: write, index, extract, cross-validate."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

from .cv import CvConfig, CvReport, run_cv
from .features import extract_features
from .folds import DatasetManifest, FoldPlan, make_fold_plan
from .synth import write_dataset

log = logging.getLogger(__name__)


@dataclass
class BenchResult:
    report: CvReport
    plan: FoldPlan
    manifest: DatasetManifest
    extract_seconds: float
    cv_seconds: float

    @property
    def seconds(self) -> float:
        return self.extract_seconds + self.cv_seconds


def run_manifest(manifest: DatasetManifest, cfg: CvConfig = CvConfig(), workers: int = 1) -> BenchResult:
    t0 = time.perf_counter()
    feats = [extract_features(e.path, cfg.features) for e in manifest.entries]
    t1 = time.perf_counter()
    log.info("extracted %d images in %.1fs", len(feats), t1 - t0)
    plan = make_fold_plan(manifest, cfg.mode, cfg.seed)
    report = run_cv(feats, manifest.labels, plan, cfg, workers=workers)
    return BenchResult(report, plan, manifest, t1 - t0, time.perf_counter() - t1)


def synthetic_benchmark(workdir, cfg: CvConfig = CvConfig(), n_per_class: int = 40,
                        data_seed: int = 0, workers: int = 1) -> BenchResult:
    """Render the synthetic set under ``workdir`` (reused if present) and run CV on it."""
    root = Path(workdir) / f"synthetic-{n_per_class}-{data_seed}"
    if not root.is_dir():
        write_dataset(root, n_per_class=n_per_class, seed=data_seed)
    return run_manifest(DatasetManifest.from_directory(root), cfg, workers)
