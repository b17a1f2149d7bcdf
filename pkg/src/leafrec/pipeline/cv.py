"""Cross-validation: per-fold encoder training, fusion and SVM decoding."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .. import BRANCHES, EMBED_DIM
from ..neural import TrainConfig, encode, make_arch, train_encoder
from ..svm import GridSearchSpec, Standardizer, grid_search, train_multiclass
from .features import FeatureConfig, branch_inputs
from .folds import N_FOLDS, FoldPlan, audit_plan

log = logging.getLogger(__name__)

BRANCH_KIND = {"color": "conv2d", "vein": "conv2d", "xyproj": "conv1d", "shape": "dense",
               "texture": "dense", "colorstats": "dense", "fourier": "dense"}


@dataclass(frozen=True)
class CvConfig:
    mode: str = "random"
    seed: int = 0
    folds: tuple = tuple(range(1, N_FOLDS + 1))
    features: FeatureConfig = FeatureConfig()
    conv2d: TrainConfig = TrainConfig(epochs=15, batch_size=32, lr=0.01, dtype="float32")
    conv1d: TrainConfig = TrainConfig(epochs=40, batch_size=32, lr=0.01)
    dense: TrainConfig = TrainConfig(epochs=60, batch_size=32, lr=0.01)
    grid: GridSearchSpec = GridSearchSpec()

    def train_config(self, branch: str) -> TrainConfig:
        return getattr(self, BRANCH_KIND[branch])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["folds"] = list(self.folds)
        return d

    def hash(self) -> str:
        # fold subset does not change what a single fold computes
        d = self.to_dict()
        d.pop("folds")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


def fuse(embeddings) -> np.ndarray:
    """Concatenate seven 100-d embeddings in canonical branch order.

    Accepts a sequence of 7 arrays or a dict keyed by branch name; arrays may
    be single vectors or ``(N, 100)`` batches.
    """
    if isinstance(embeddings, dict):
        missing = [b for b in BRANCHES if b not in embeddings]
        if missing or len(embeddings) != len(BRANCHES):
            raise ValueError(f"fuse needs exactly the branches {BRANCHES}")
        embeddings = [embeddings[b] for b in BRANCHES]
    if len(embeddings) != len(BRANCHES):
        raise ValueError(f"fuse needs {len(BRANCHES)} embeddings, got {len(embeddings)}")
    arrs = [np.asarray(e, dtype=np.float64) for e in embeddings]
    for b, a in zip(BRANCHES, arrs):
        if a.shape[-1] != EMBED_DIM:
            raise ValueError(f"{b} embedding has length {a.shape[-1]}, expected {EMBED_DIM}")
    return np.concatenate(arrs, axis=-1)


def unfuse(vec) -> dict:
    vec = np.asarray(vec)
    return {b: vec[..., i * EMBED_DIM:(i + 1) * EMBED_DIM] for i, b in enumerate(BRANCHES)}


@dataclass
class FoldResult:
    fold: int
    status: str = "ok"           # ok | error
    error: str = ""
    n_train: int = 0
    n_valid: int = 0
    n_test: int = 0
    valid_acc: float = float("nan")
    test_acc: float = float("nan")
    C: float = float("nan")
    gamma: float = float("nan")
    kkt_max: float = float("nan")   # worst KKT violation over every machine trained in the fold
    separation: float = float("nan")
    branch_test_acc: dict = field(default_factory=dict)
    branch_valid_acc: dict = field(default_factory=dict)
    confusion: np.ndarray | None = None
    seconds: float = 0.0


@dataclass
class CvReport:
    mode: str
    seed: int
    config_hash: str
    classes: list
    folds: list
    partial: bool = False

    @property
    def ok_folds(self) -> list:
        return [f for f in self.folds if f.status == "ok"]

    @property
    def test_accs(self) -> np.ndarray:
        return np.array([f.test_acc for f in self.ok_folds])

    @property
    def valid_accs(self) -> np.ndarray:
        return np.array([f.valid_acc for f in self.ok_folds])

    def mean_std(self, values) -> tuple[float, float]:
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return float("nan"), float("nan")
        return float(values.mean()), float(values.std())

    def branch_mean(self, branch: str) -> float:
        return self.mean_std([f.branch_test_acc[branch] for f in self.ok_folds])[0]

    @property
    def confusion(self) -> np.ndarray:
        k = len(self.classes)
        total = np.zeros((k, k), dtype=int)
        for f in self.ok_folds:
            total += f.confusion
        return total

    @property
    def failed(self) -> bool:
        return any(f.status != "ok" for f in self.folds)

    def to_dict(self) -> dict:
        folds = []
        for f in self.folds:
            d = {k.name: getattr(f, k.name) for k in fields(f)}
            d["confusion"] = None if f.confusion is None else f.confusion.tolist()
            folds.append(d)
        return {"mode": self.mode, "seed": self.seed, "config_hash": self.config_hash,
                "classes": list(self.classes), "partial": self.partial, "folds": folds}

    @classmethod
    def from_dict(cls, d: dict) -> "CvReport":
        folds = []
        for fd in d["folds"]:
            fd = dict(fd)
            if fd.get("confusion") is not None:
                fd["confusion"] = np.asarray(fd["confusion"], dtype=int)
            folds.append(FoldResult(**fd))
        return cls(d["mode"], d["seed"], d["config_hash"], list(d["classes"]), folds, d["partial"])


def class_separation(x, y) -> float:
    """Smallest distance between class centroids over the largest within-class RMS spread."""
    classes = np.unique(y)
    cents = np.array([x[y == c].mean(axis=0) for c in classes])
    spread = max(np.sqrt(((x[y == c] - cents[i]) ** 2).sum(axis=1).mean()) for i, c in enumerate(classes))
    d = np.sqrt(((cents[:, None] - cents[None]) ** 2).sum(-1))
    d[np.diag_indices(len(classes))] = np.inf
    return float(d.min() / spread) if spread > 0 else float("inf")


def _fold_seed(base: int, fold: int, branch: int) -> int:
    return int(np.random.SeedSequence([base, fold, branch]).generate_state(1)[0])


def run_fold(fold: int, inputs: dict, labels: np.ndarray, classes: list, split: dict,
             cfg: CvConfig) -> FoldResult:
    t0 = time.perf_counter()
    tr, va, te = split["train"], split["valid"], split["test"]
    res = FoldResult(fold, n_train=len(tr), n_valid=len(va), n_test=len(te))
    emb = {}
    for b_idx, branch in enumerate(BRANCHES):
        x = inputs[branch]
        tcfg = replace(cfg.train_config(branch), seed=_fold_seed(cfg.seed, fold, b_idx))
        model, _ = train_encoder(x[tr], labels[tr], make_arch(BRANCH_KIND[branch], x.shape[1:]),
                                 tcfg, x[va], labels[va])
        res.branch_valid_acc[branch] = float((model.predict(x[va]) == labels[va]).mean())
        res.branch_test_acc[branch] = float((model.predict(x[te]) == labels[te]).mean())
        emb[branch] = encode(model, x)
        log.info("fold %d %-10s valid %.3f test %.3f", fold, branch,
                 res.branch_valid_acc[branch], res.branch_test_acc[branch])
    fused = fuse(emb)
    std = Standardizer.fit(fused[tr])
    z = std.transform(fused)
    grid = grid_search(z[tr], labels[tr], z[va], labels[va], cfg.grid)
    svm = train_multiclass(fused[tr], labels[tr], grid.C, grid.gamma, std)
    kkt = max(grid.kkt_max, svm.kkt_violation(fused[tr], labels[tr]))
    pred = svm.predict(fused[te])
    res.valid_acc = grid.accuracy
    res.test_acc = float((pred == labels[te]).mean())
    res.C, res.gamma, res.kkt_max = grid.C, grid.gamma, kkt
    idx = {c: i for i, c in enumerate(classes)}
    conf = np.zeros((len(classes), len(classes)), dtype=int)
    for t, p in zip(labels[te], pred):
        conf[idx[t], idx[p]] += 1
    res.confusion = conf
    held = np.concatenate([va, te])
    res.separation = class_separation(z[held], labels[held])
    res.seconds = time.perf_counter() - t0
    log.info("fold %d fused valid %.3f test %.3f (C=%g gamma=%.3g) %.1fs", fold, res.valid_acc,
             res.test_acc, grid.C, grid.gamma, res.seconds)
    return res


def _guarded_fold(fold, inputs, labels, classes, split, cfg) -> FoldResult:
    try:
        return run_fold(fold, inputs, labels, classes, split, cfg)
    except Exception as exc:  # recorded, the run continues
        log.error("fold %d failed: %s", fold, exc)
        return FoldResult(fold, status="error", error=f"{type(exc).__name__}: {exc}")


def run_cv(feats: list, labels, plan: FoldPlan, cfg: CvConfig = CvConfig(), workers: int = 1) -> CvReport:
    """Per fold: train seven encoders, fuse, standardize, grid-search the SVM, test.

    The plan is audited before any training. A failing fold is recorded with
    its error and the remaining folds still run. ``workers > 1`` runs folds in
    separate processes; every fold is seeded on its own, so results match the
    sequential run.
    """
    labels = np.asarray(labels)
    if len(labels) != len(feats) or len(plan) != len(feats):
        raise ValueError("features, labels and plan must cover the same entries")
    audit_plan(plan)
    inputs = branch_inputs(feats)
    classes = sorted(set(labels.tolist()))
    args = [(f, inputs, labels, classes, plan.split(f), cfg) for f in cfg.folds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_guarded_fold, *zip(*args)))
    else:
        results = [_guarded_fold(*a) for a in args]
    partial = tuple(cfg.folds) != tuple(range(1, N_FOLDS + 1))
    return CvReport(plan.mode, cfg.seed, cfg.hash(), classes, results, partial)
