"""Dataset manifests and 10-fold train/valid/test plans."""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import PlanIntegrityError

N_FOLDS = 10
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
ROLES = ("train", "valid", "test")


@dataclass(frozen=True)
class Entry:
    index: int
    path: str
    label: str


@dataclass
class DatasetManifest:
    entries: list

    def __post_init__(self):
        seen = Counter(e.path for e in self.entries)
        dup = sorted(p for p, n in seen.items() if n > 1)
        if dup:
            raise ValueError(f"duplicate paths in manifest: {dup[0]}")

    def __len__(self):
        return len(self.entries)

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.labels))

    def histogram(self) -> dict[str, int]:
        return dict(sorted(Counter(self.labels).items()))

    @classmethod
    def from_directory(cls, root) -> "DatasetManifest":
        """One subdirectory per class; entries sorted by file name."""
        root = Path(root)
        files = []
        for d in sorted(p for p in root.iterdir() if p.is_dir()):
            files += [(f.name, f, d.name) for f in sorted(d.iterdir())
                      if f.suffix.lower() in IMAGE_SUFFIXES]
        if not files:
            raise ValueError(f"no images found under {root}")
        names = Counter(n for n, _, _ in files)
        dup = sorted(n for n, c in names.items() if c > 1)
        if dup:
            raise ValueError(f"duplicate file name {dup[0]!r} in {root}")
        files.sort(key=lambda t: t[0])
        return cls([Entry(i, str(f), label) for i, (_, f, label) in enumerate(files)])

    @classmethod
    def from_ranges(cls, root, ranges_csv) -> "DatasetManifest":
        """Flat folder of numbered files; labels come from ``start,end,label`` ranges."""
        root = Path(root)
        with open(ranges_csv, newline="") as fh:
            ranges = [(int(r["start"]), int(r["end"]), r["label"]) for r in csv.DictReader(fh)]
        files = sorted((f for f in root.iterdir() if f.suffix.lower() in IMAGE_SUFFIXES),
                       key=lambda f: f.name)
        if not files:
            raise ValueError(f"no images found under {root}")
        entries = []
        for f in files:
            try:
                num = int(f.stem)
            except ValueError:
                raise ValueError(f"file name {f.name!r} is not numeric") from None
            label = next((lab for lo, hi, lab in ranges if lo <= num <= hi), None)
            if label is None:
                raise ValueError(f"{f.name} falls outside every class range")
            entries.append(Entry(len(entries), str(f), label))
        return cls(entries)

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "path", "label"])
            for e in self.entries:
                w.writerow([e.index, e.path, e.label])

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        with open(path, newline="") as fh:
            return cls([Entry(int(r["index"]), r["path"], r["label"]) for r in csv.DictReader(fh)])


@dataclass
class FoldPlan:
    mode: str
    seed: int
    test_fold: np.ndarray  # 1-based fold in which each entry is the test sample

    def __len__(self):
        return len(self.test_fold)

    def role(self, entry: int, fold: int) -> str:
        t = int(self.test_fold[entry])
        if t == fold:
            return "test"
        if t % N_FOLDS + 1 == fold:
            return "valid"
        return "train"

    def role_matrix(self) -> list[list[str]]:
        """``[entry][fold - 1]`` role names."""
        return [[self.role(i, f) for f in range(1, N_FOLDS + 1)] for i in range(len(self))]

    def split(self, fold: int) -> dict[str, np.ndarray]:
        if not 1 <= fold <= N_FOLDS:
            raise ValueError(f"fold must be in 1..{N_FOLDS}")
        prev = (fold - 2) % N_FOLDS + 1
        t = self.test_fold
        return {"train": np.flatnonzero((t != fold) & (t != prev)),
                "valid": np.flatnonzero(t == prev),
                "test": np.flatnonzero(t == fold)}


def audit_split(split: dict, n: int) -> None:
    """Raise PlanIntegrityError if roles overlap or miss entries."""
    seen = np.zeros(n, dtype=int)
    for role in ROLES:
        idx = np.asarray(split[role], dtype=int)
        if len(np.unique(idx)) != len(idx):
            raise PlanIntegrityError(f"duplicate entries inside the {role} set")
        if len(idx) and (idx.min() < 0 or idx.max() >= n):
            raise PlanIntegrityError(f"{role} set references entries outside 0..{n - 1}")
        seen[idx] += 1
    if (seen > 1).any():
        raise PlanIntegrityError(f"entry {int(np.argmax(seen > 1))} appears in more than one role")
    if (seen == 0).any():
        raise PlanIntegrityError(f"entry {int(np.argmax(seen == 0))} has no role")
    if not all(len(split[r]) for r in ROLES):
        raise PlanIntegrityError("every role needs at least one entry")


def audit_plan(plan: FoldPlan) -> None:
    n = len(plan)
    if not np.isin(plan.test_fold, np.arange(1, N_FOLDS + 1)).all():
        raise PlanIntegrityError("test fold ids must be in 1..10")
    for f in range(1, N_FOLDS + 1):
        audit_split(plan.split(f), n)


def make_fold_plan(manifest: DatasetManifest, mode: str = "random", seed: int = 0) -> FoldPlan:
    """Indexed: sorted position p is test in fold p%10+1 and valid in the fold after.

    Random: stratified; each class is shuffled and dealt round-robin over the
    folds, continuing the rotation from class to class so fold sizes stay even.
    """
    n = len(manifest)
    if n < N_FOLDS:
        raise ValueError(f"need at least {N_FOLDS} entries, got {n}")
    if mode == "indexed":
        order = sorted(range(n), key=lambda i: Path(manifest.entries[i].path).name)
        test_fold = np.empty(n, dtype=int)
        test_fold[order] = np.arange(n) % N_FOLDS + 1
    elif mode == "random":
        labels = manifest.labels
        counts = Counter(labels)
        small = sorted(c for c, k in counts.items() if k < N_FOLDS)
        if small:
            raise ValueError(f"class {small[0]!r} has {counts[small[0]]} samples; "
                             f"stratified {N_FOLDS}-fold needs at least {N_FOLDS}")
        rng = np.random.default_rng(seed)
        test_fold = np.empty(n, dtype=int)
        pos = 0
        for c in sorted(counts):
            members = np.array([i for i, lab in enumerate(labels) if lab == c])
            members = members[rng.permutation(len(members))]
            test_fold[members] = (pos + np.arange(len(members))) % N_FOLDS + 1
            pos += len(members)
    else:
        raise ValueError(f"unknown fold mode {mode!r}")
    plan = FoldPlan(mode, seed, test_fold)
    audit_plan(plan)
    return plan
