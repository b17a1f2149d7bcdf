"""Run configuration: a YAML key-value tree mapped onto dataclasses.

Every section is optional; unknown keys are errors so typos do not pass
silently. See README for the full format.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .neural import TrainConfig
from .pipeline.cv import CvConfig
from .pipeline.features import FeatureConfig
from .pipeline.folds import N_FOLDS
from .svm import GridSearchSpec


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    dataset: Path | None = None
    manifest: Path | None = None
    ranges: Path | None = None       # filename-range label map for flat folders
    output: Path = Path("leafrec-out")
    debug: bool = False
    workers: int = 1
    cv: CvConfig = field(default_factory=CvConfig)

    @property
    def manifest_path(self) -> Path:
        return self.manifest or self.output / "manifest.csv"

    def to_dict(self) -> dict:
        d = {k: (str(v) if isinstance(v, Path) else v) for k, v in
             ((f.name, getattr(self, f.name)) for f in fields(self) if f.name != "cv")}
        cv = self.cv.to_dict()
        d.update({"mode": cv.pop("mode"), "seed": cv.pop("seed"), "folds": cv.pop("folds")})
        d["features"] = cv.pop("features")
        d["svm"] = cv.pop("grid")
        d["train"] = cv
        return d


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(f"{where}: unknown key {extra[0]!r} (allowed: {', '.join(sorted(known))})")
    vals = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_folds(value) -> tuple:
    """``[1, 2]``, ``"1,2"``, ``"1-3"`` or ``"all"``."""
    if value is None or value == "all":
        return tuple(range(1, N_FOLDS + 1))
    if isinstance(value, int):
        value = [value]
    if isinstance(value, str):
        out = []
        for part in value.split(","):
            part = part.strip()
            lo, _, hi = part.partition("-") if "-" in part[1:] else (part, "", part)
            try:
                out += list(range(int(lo), int(hi) + 1))
            except ValueError:
                raise ConfigError(f"folds: cannot parse {part!r}") from None
        value = out
    folds = tuple(sorted(set(int(v) for v in value)))
    if not folds or folds[0] < 1 or folds[-1] > N_FOLDS:
        raise ConfigError(f"folds must be within 1..{N_FOLDS}")
    return folds


def from_dict(data: dict | None) -> RunConfig:
    data = dict(data or {})
    top = {"dataset", "manifest", "ranges", "output", "debug", "workers", "mode", "seed", "folds",
           "features", "train", "svm"}
    extra = sorted(set(data) - top)
    if extra:
        raise ConfigError(f"unknown key {extra[0]!r} (allowed: {', '.join(sorted(top))})")
    train = data.get("train") or {}
    if not isinstance(train, dict):
        raise ConfigError("train: expected a mapping")
    bad = sorted(set(train) - {"conv2d", "conv1d", "dense"})
    if bad:
        raise ConfigError(f"train: unknown encoder kind {bad[0]!r}")
    base = CvConfig()
    kinds = {}
    for kind in ("conv2d", "conv1d", "dense"):
        merged = {**asdict(getattr(base, kind)), **(train.get(kind) or {})}
        tc = _build(TrainConfig, merged, f"train.{kind}")
        if tc.dtype not in ("float32", "float64"):
            raise ConfigError(f"train.{kind}.dtype must be float32 or float64")
        kinds[kind] = tc
    mode = data.get("mode", base.mode)
    if mode not in ("random", "indexed"):
        raise ConfigError(f"mode must be 'random' or 'indexed', got {mode!r}")
    try:
        seed = int(data.get("seed", base.seed))
        workers = int(data.get("workers", 1))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed/workers must be integers: {exc}") from None
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    cv = CvConfig(mode=mode, seed=seed, folds=parse_folds(data.get("folds")),
                  features=_build(FeatureConfig, data.get("features"), "features"),
                  grid=_build(GridSearchSpec, data.get("svm"), "svm"), **kinds)
    paths = {k: (Path(data[k]) if data.get(k) is not None else None)
             for k in ("dataset", "manifest", "ranges", "output")}
    return RunConfig(dataset=paths["dataset"], manifest=paths["manifest"], ranges=paths["ranges"],
                     output=paths["output"] or Path("leafrec-out"), debug=bool(data.get("debug", False)),
                     workers=workers, cv=cv)


def load_config(path=None, **overrides) -> RunConfig:
    """Read a YAML config (or defaults) and apply non-None flag overrides."""
    data = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return from_dict(data)


def require_paths(cfg: RunConfig, *names: str) -> None:
    """Referenced inputs must exist when a command needs them."""
    for name in names:
        p = cfg.manifest_path if name == "manifest" else getattr(cfg, name)
        if p is None:
            raise ConfigError(f"{name} is not set (config key or flag)")
        if not Path(p).exists():
            raise ConfigError(f"{name} path {p} does not exist")


def with_cv(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, cv=replace(cfg.cv, **changes))
