"""RBF-kernel SVM: SMO binary solver, one-vs-one multiclass, grid search."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConvergenceError, DegenerateError

MAX_ITER = 100_000
TOL = 1e-3
_TAU = 1e-12


def rbf_kernel(x, y, gamma: float) -> float:
    x, y = np.asarray(x, float).ravel(), np.asarray(y, float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"rbf_kernel: length mismatch {x.size} vs {y.size}")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_gram(a, b, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean"))


@dataclass
class BinarySvm:
    sv: np.ndarray        # (n_sv, d)
    coef: np.ndarray      # alpha_i * y_i for each support vector
    b: float
    gamma: float
    C: float
    support: np.ndarray   # indices of the support vectors in the training input
    n_iter: int = 0
    dual_objective: float = 0.0

    def decision(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        if len(self.coef) == 0:
            return np.full(len(x), self.b)
        return rbf_gram(x, self.sv, self.gamma) @ self.coef + self.b

    def alpha(self, n: int) -> np.ndarray:
        """Dense multiplier vector over the n training points."""
        a = np.zeros(n)
        a[self.support] = np.abs(self.coef)
        return a


def _canonical_order(x, y):
    keys = [x[:, j] for j in range(x.shape[1] - 1, -1, -1)]
    return np.lexsort([y] + keys) if x.shape[1] else np.argsort(y, kind="stable")


def _smo(K, y, C, tol, max_iter):
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # G = Q alpha - e
    diag = np.diag(K).copy()
    it = 0
    while True:
        minus_yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        m_val = np.where(up, minus_yg, -np.inf)
        M_val = np.where(low, minus_yg, np.inf)
        i = int(np.argmax(m_val))
        j = int(np.argmin(M_val))
        m, M = m_val[i], M_val[j]
        gap = m - M
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(f"SMO did not converge in {max_iter} iterations", gap)
        it += 1
        quad = max(diag[i] + diag[j] - 2 * K[i, j], _TAU)
        ai, aj = alpha[i], alpha[j]
        # move along y_i d_i = -y_j d_j; step follows from the 1-D quadratic
        step = gap / quad
        # bounds from the box on both variables
        if y[i] > 0:
            step = min(step, C - ai)
        else:
            step = min(step, ai)
        if y[j] > 0:
            step = min(step, aj)
        else:
            step = min(step, C - aj)
        alpha[i] = ai + y[i] * step
        alpha[j] = aj - y[j] * step
        # snap to the box to avoid drift
        for t in (i, j):
            if alpha[t] < 1e-14 * C:
                alpha[t] = 0.0
            elif alpha[t] > C * (1 - 1e-14):
                alpha[t] = C
        di, dj = alpha[i] - ai, alpha[j] - aj
        grad += y * (K[:, i] * (y[i] * di) + K[:, j] * (y[j] * dj))
    b = (m + M) / 2 if np.isfinite(m) and np.isfinite(M) else (m if np.isfinite(m) else M)
    return alpha, float(b), it


def dual_objective(K, y, alpha) -> float:
    """Maximization form: sum(alpha) - 1/2 (alpha*y)' K (alpha*y)."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def train_binary(x, y, C: float, gamma: float, tol: float = TOL, max_iter: int = MAX_ITER) -> BinarySvm:
    """Soft-margin RBF SVM via SMO with maximal-violating-pair selection.

    ``y`` holds -1/+1 labels. Rows are visited in a canonical (lexicographic)
    order so the result does not depend on the input ordering.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("x must be (n, d) with one label per row")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise DegenerateError("train_binary needs both classes")
    if C <= 0 or gamma <= 0:
        raise ValueError("C and gamma must be positive")
    order = _canonical_order(x, y)
    xs, ys = x[order], y[order]
    K = rbf_gram(xs, xs, gamma)
    alpha, b, it = _smo(K, ys, C, tol, max_iter)
    sv = np.flatnonzero(alpha > 0)
    return BinarySvm(xs[sv], alpha[sv] * ys[sv], b, gamma, C, order[sv], it,
                     dual_objective(K, ys, alpha))


def kkt_violation(model: BinarySvm, x, y, tol: float = TOL) -> float:
    """Largest KKT violation over the training points (0 when all hold within tol)."""
    y = np.asarray(y, float)
    alpha = model.alpha(len(y))
    yf = y * model.decision(x)
    C = model.C
    at_zero = alpha <= 0
    at_c = alpha >= C
    free = ~at_zero & ~at_c
    v = np.zeros(len(y))
    v[at_zero] = np.maximum(0, (1 - tol) - yf[at_zero])
    v[free] = np.maximum(0, np.abs(yf[free] - 1) - tol)
    v[at_c] = np.maximum(0, yf[at_c] - (1 + tol))
    return float(v.max()) if len(v) else 0.0


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # 1 where the training variance is zero

    @classmethod
    def fit(cls, x) -> "Standardizer":
        x = np.asarray(x, float)
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std > 0, std, 1.0))

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, float) - self.mean) / self.std


@dataclass
class SvmModel:
    classes: np.ndarray
    machines: dict  # (i, j) class-index pair, i < j -> BinarySvm; +1 means class i
    C: float
    gamma: float
    standardizer: Standardizer | None = None

    @property
    def n_support(self) -> int:
        """Support vectors summed over the pairwise machines."""
        return sum(len(m.coef) for m in self.machines.values())

    def _prep(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        return self.standardizer.transform(x) if self.standardizer is not None else x

    def decision_votes(self, x):
        x = self._prep(x)
        k = len(self.classes)
        votes = np.zeros((len(x), k))
        margins = np.zeros((len(x), k))
        for (i, j), m in self.machines.items():
            f = m.decision(x)
            win_i = f > 0
            votes[:, i] += win_i
            votes[:, j] += ~win_i
            margins[:, i] += f
            margins[:, j] -= f
        return votes, margins

    def predict(self, x) -> np.ndarray:
        votes, margins = self.decision_votes(x)
        best = np.empty(len(votes), dtype=int)
        for r in range(len(votes)):
            cand = np.flatnonzero(votes[r] == votes[r].max())
            if len(cand) > 1:
                mm = margins[r, cand]
                cand = cand[mm == mm.max()]
            best[r] = cand[0]
        return self.classes[best]

    def kkt_violation(self, x, labels, tol: float = TOL) -> float:
        """Worst KKT violation over all pairwise machines on their training subsets."""
        x = self._prep(x)
        labels = np.asarray(labels)
        worst = 0.0
        for (i, j), m in self.machines.items():
            sel = np.flatnonzero((labels == self.classes[i]) | (labels == self.classes[j]))
            y = np.where(labels[sel] == self.classes[i], 1.0, -1.0)
            worst = max(worst, kkt_violation(m, x[sel], y, tol))
        return worst


def train_multiclass(x, labels, C: float, gamma: float, standardizer: Standardizer | None = None,
                     tol: float = TOL) -> SvmModel:
    """One-vs-one RBF SVM. ``standardizer`` (if given) is applied to x first and kept."""
    x = np.asarray(x, float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise DegenerateError("train_multiclass needs at least two classes")
    xs = standardizer.transform(x) if standardizer is not None else x
    machines = {}
    for i, j in itertools.combinations(range(len(classes)), 2):
        sel = np.flatnonzero((labels == classes[i]) | (labels == classes[j]))
        y = np.where(labels[sel] == classes[i], 1.0, -1.0)
        machines[(i, j)] = train_binary(xs[sel], y, C, gamma, tol)
    return SvmModel(classes, machines, C, gamma, standardizer)


@dataclass(frozen=True)
class GridSearchSpec:
    Cs: tuple = (0.1, 1.0, 10.0, 100.0)
    gammas: tuple = (1e-3, 1e-2, 1e-1, 1.0)
    # gammas are divided by the input dimension when True
    scale_by_dim: bool = True

    def __post_init__(self):
        if not self.Cs or not self.gammas:
            raise ValueError("grid must be non-empty")
        if min(self.Cs) <= 0 or min(self.gammas) <= 0:
            raise ValueError("grid values must be positive")

    def candidates(self, dim: int):
        scale = 1.0 / dim if self.scale_by_dim else 1.0
        return [(float(c), float(g) * scale) for c in sorted(self.Cs) for g in sorted(self.gammas)]


@dataclass
class GridResult:
    C: float
    gamma: float
    accuracy: float
    table: list = field(default_factory=list)  # (C, gamma, accuracy) per candidate
    kkt_max: float = 0.0  # worst KKT violation over all candidate machines


def grid_search(train_x, train_y, valid_x, valid_y, spec: GridSearchSpec = GridSearchSpec()) -> GridResult:
    """Exhaustive search over the grid, scored by validation accuracy.

    Ties go to the model with fewer support vectors (the leave-one-out error
    is bounded by the support-vector fraction), then the smaller C, then the
    smaller gamma.
    """
    train_x = np.asarray(train_x, float)
    valid_y = np.asarray(valid_y)
    if len(train_x) == 0 or len(valid_y) == 0:
        raise ValueError("grid_search needs non-empty train and validation sets")
    best = None
    table = []
    kkt = 0.0
    for C, g in spec.candidates(train_x.shape[1]):
        model = train_multiclass(train_x, train_y, C, g)
        kkt = max(kkt, model.kkt_violation(train_x, train_y))
        acc = float((model.predict(valid_x) == valid_y).mean())
        nsv = model.n_support
        table.append((C, g, acc))
        if best is None or (-acc, nsv) < (-best[2], best[3]):
            best = (C, g, acc, nsv)
    return GridResult(best[0], best[1], best[2], table, kkt)


FORMAT_VERSION = 1


def save_svm(path, model: SvmModel) -> None:
    arrays = {"classes": model.classes}
    pairs = []
    for (i, j), m in model.machines.items():
        key = f"{i}_{j}"
        pairs.append([i, j, m.b, m.gamma, m.C, m.n_iter, m.dual_objective])
        arrays[f"sv.{key}"] = m.sv
        arrays[f"coef.{key}"] = m.coef
        arrays[f"support.{key}"] = m.support
    if model.standardizer is not None:
        arrays["std.mean"] = model.standardizer.mean
        arrays["std.std"] = model.standardizer.std
    meta = {"format": "leafrec-svm", "version": FORMAT_VERSION, "C": model.C, "gamma": model.gamma,
            "pairs": pairs}
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_svm(path) -> SvmModel:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("format") != "leafrec-svm" or meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported SVM container")
        machines = {}
        for i, j, b, g, C, it, dual in meta["pairs"]:
            key = f"{i}_{j}"
            machines[(i, j)] = BinarySvm(z[f"sv.{key}"].copy(), z[f"coef.{key}"].copy(), b, g, C,
                                         z[f"support.{key}"].copy(), it, dual)
        std = Standardizer(z["std.mean"].copy(), z["std.std"].copy()) if "std.mean" in z else None
        return SvmModel(z["classes"].copy(), machines, meta["C"], meta["gamma"], std)
