"""Gray-level co-occurrence matrices and the fourteen Haralick features."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError

FEATURE_NAMES = (
    "angular_second_moment", "contrast", "correlation", "sum_of_squares_variance",
    "inverse_difference_moment", "sum_average", "sum_variance", "sum_entropy",
    "entropy", "difference_variance", "difference_entropy",
    "info_measure_correlation_1", "info_measure_correlation_2", "maximal_correlation_coefficient",
)

# (drow, dcol) for one pixel step at each angle; 45 degrees points up-right
_OFFSETS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}


@dataclass(frozen=True)
class GlcmConfig:
    levels: int = 32
    distance: int = 1
    angles: tuple = (0, 45, 90, 135)
    symmetric: bool = True

    def __post_init__(self):
        if self.levels < 2 or self.levels > 256:
            raise ValueError("levels must be in [2, 256]")
        if self.distance < 1:
            raise ValueError("distance must be >= 1")
        for a in self.angles:
            if a not in _OFFSETS:
                raise ValueError(f"unsupported angle {a}")


@dataclass(frozen=True)
class Glcm:
    p: np.ndarray
    pair_count: int


@dataclass
class HaralickVector:
    values: np.ndarray  # f1..f14
    intermediates: dict = field(default_factory=dict)

    def __getitem__(self, k):
        """1-based access, ``h[9]`` is the entropy f9."""
        return self.values[k - 1]


def quantize(gray: np.ndarray, levels: int) -> np.ndarray:
    return (gray.astype(np.int64) * levels) // 256


def _pair_counts(q, mask, levels, dr, dc):
    h, w = q.shape
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    counts = np.zeros((levels, levels), dtype=np.float64)
    if r1 <= r0 or c1 <= c0:
        return counts
    a = q[r0:r1, c0:c1]
    b = q[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    ok = mask[r0:r1, c0:c1] & mask[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    np.add.at(counts, (a[ok], b[ok]), 1.0)
    return counts


def angle_glcms(gray: np.ndarray, mask: np.ndarray, cfg: GlcmConfig = GlcmConfig()) -> list[Glcm]:
    """One normalized matrix per angle that has at least one valid pair."""
    q = quantize(gray, cfg.levels)
    mask = np.asarray(mask, dtype=bool)
    out = []
    for angle in cfg.angles:
        dr, dc = _OFFSETS[angle]
        counts = _pair_counts(q, mask, cfg.levels, dr * cfg.distance, dc * cfg.distance)
        if cfg.symmetric:
            counts = counts + counts.T
        total = counts.sum()
        if total > 0:
            out.append(Glcm(counts / total, int(total)))
    if not out:
        raise DegenerateError("no foreground pixel pair at the configured offsets")
    return out


def compute_glcm(gray: np.ndarray, mask: np.ndarray, cfg: GlcmConfig = GlcmConfig()) -> Glcm:
    mats = angle_glcms(gray, mask, cfg)
    p = np.mean([m.p for m in mats], axis=0)
    return Glcm(p, sum(m.pair_count for m in mats))


def _entropy(p):
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def haralick_features(g: Glcm) -> HaralickVector:
    p = np.asarray(g.p, dtype=np.float64)
    n = p.shape[0]
    if n < 2 or p.shape != (n, n):
        raise DegenerateError(f"GLCM must be square with >= 2 levels, got {p.shape}")
    lv = np.arange(1, n + 1, dtype=np.float64)
    i, j = np.meshgrid(lv, lv, indexing="ij")
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mu_x = float(lv @ px)
    mu_y = float(lv @ py)
    sd_x = float(np.sqrt(((lv - mu_x) ** 2) @ px))
    sd_y = float(np.sqrt(((lv - mu_y) ** 2) @ py))

    # p_{x+y}(k), k = 2..2N ; p_{x-y}(k), k = 0..N-1
    s_idx = (i + j).astype(int) - 2
    d_idx = np.abs(i - j).astype(int)
    p_sum = np.bincount(s_idx.ravel(), weights=p.ravel(), minlength=2 * n - 1)
    p_diff = np.bincount(d_idx.ravel(), weights=p.ravel(), minlength=n)
    ks = np.arange(2, 2 * n + 1, dtype=np.float64)
    kd = np.arange(n, dtype=np.float64)

    f1 = float((p ** 2).sum())
    f2 = float(((i - j) ** 2 * p).sum())
    denom = sd_x * sd_y
    f3 = float(((i * j * p).sum() - mu_x * mu_y) / denom) if denom > 0 else 0.0
    f4 = float(((i - mu_x) ** 2 * p).sum())
    f5 = float((p / (1.0 + (i - j) ** 2)).sum())
    f6 = float(ks @ p_sum)
    f7 = float(((ks - f6) ** 2) @ p_sum)
    f8 = _entropy(p_sum)
    f9 = _entropy(p)
    mu_d = float(kd @ p_diff)
    f10 = float(((kd - mu_d) ** 2) @ p_diff)
    f11 = _entropy(p_diff)

    hxy = f9
    hx = _entropy(px)
    hy = _entropy(py)
    outer = np.outer(px, py)
    with np.errstate(divide="ignore"):
        log_outer = np.where(outer > 0, np.log(np.where(outer > 0, outer, 1.0)), 0.0)
    hxy1 = float(-(p * log_outer).sum())
    hxy2 = float(-(outer * log_outer).sum())
    hmax = max(hx, hy)
    f12 = (hxy - hxy1) / hmax if hmax > 0 else 0.0
    f13 = float(np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * (hxy2 - hxy)))))

    # Q = Dx^-1 P Dy^-1 P^T has the spectrum of the symmetric
    # S = Dx^-1/2 P Dy^-1 P^T Dx^-1/2 ; empty rows/columns drop out.
    rows = px > 0
    cols = py > 0
    pr = p[np.ix_(rows, cols)]
    a = pr / np.sqrt(px[rows])[:, None] / np.sqrt(py[cols])[None, :]
    S = a @ a.T
    eig = np.sort(np.linalg.eigvalsh((S + S.T) / 2))[::-1]
    lam2 = float(np.clip(eig[1], 0.0, 1.0)) if eig.size > 1 else 0.0
    f14 = float(np.sqrt(lam2))

    values = np.array([f1, f2, f3, f4, f5, f6, f7, f8, f9, f10, f11, f12, f13, f14])
    inter = dict(mu_x=mu_x, mu_y=mu_y, sigma_x=sd_x, sigma_y=sd_y, p_sum=p_sum, p_diff=p_diff,
                 px=px, py=py, HX=hx, HY=hy, HXY=hxy, HXY1=hxy1, HXY2=hxy2, Q_eigenvalues=eig)
    return HaralickVector(values, inter)


def texture_vector(gray: np.ndarray, mask: np.ndarray, cfg: GlcmConfig = GlcmConfig()) -> np.ndarray:
    """Haralick features averaged over the per-angle matrices (14-d)."""
    return np.mean([haralick_features(m).values for m in angle_glcms(gray, mask, cfg)], axis=0)
