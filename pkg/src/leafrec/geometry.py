"""Orientation alignment, contour tracing and the 35-d shape vector.

Coordinates follow image convention: ``x`` is the column index, ``y`` the
row index growing downwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateError, EmptyForegroundError
from .raster import largest_component

ROTATION_GATE = 1.2

# clockwise on screen (y down), starting west
_MOORE = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))

SPATIAL_IDX = ((0, 0), (0, 1), (0, 2), (0, 3), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (3, 0))
CENTRAL_IDX = ((0, 2), (0, 3), (1, 1), (1, 2), (2, 0), (2, 1), (3, 0))

SHAPE_NAMES = (
    ["length", "width", "area", "perimeter", "diameter"]
    + ["aspect_ratio", "form_factor", "rectangularity", "narrow_factor",
       "perimeter_diameter", "perimeter_length_width"]
    + [f"M{i}{j}" for i, j in SPATIAL_IDX]
    + [f"mu{i}{j}" for i, j in CENTRAL_IDX]
    + [f"eta{i}{j}" for i, j in CENTRAL_IDX]
)


@dataclass(frozen=True)
class Contour:
    points: np.ndarray  # (C, 2) int, columns (x, y)
    closed: bool = True

    def __len__(self):
        return len(self.points)

    def perimeter(self) -> float:
        """Chain length with unit axial steps and sqrt(2) diagonal steps."""
        pts = self.points
        nxt = np.roll(pts, -1, axis=0) if self.closed else pts[1:]
        d = np.abs(nxt - pts[: len(nxt)]).sum(axis=1)
        return float(np.count_nonzero(d == 1) + math.sqrt(2) * np.count_nonzero(d == 2))


@dataclass(frozen=True)
class GeometricFeatures:
    length: float
    width: float
    area: float
    perimeter: float
    diameter: float

    @classmethod
    def from_measurements(cls, length, width, area, perimeter):
        return cls(float(length), float(width), float(area), float(perimeter),
                   equivalent_diameter(area))

    def as_array(self) -> np.ndarray:
        return np.array([self.length, self.width, self.area, self.perimeter, self.diameter])


def equivalent_diameter(area: float) -> float:
    return math.sqrt(4.0 * area / math.pi)


def _coordinate_eig(mask: np.ndarray):
    ys, xs = np.nonzero(mask)
    if xs.size < 2:
        raise DegenerateError("principal axis needs at least 2 foreground pixels")
    cov = np.cov(np.vstack([xs, ys]).astype(np.float64), bias=True)
    vals, vecs = np.linalg.eigh(cov)
    if vals[1] <= 0:
        raise DegenerateError("foreground collapses to a single point")
    vx, vy = vecs[:, 1]
    angle = math.atan2(vy, vx)
    if angle <= -math.pi / 2:
        angle += math.pi
    elif angle > math.pi / 2:
        angle -= math.pi
    return angle, float(vals[1]), float(vals[0]), (xs.mean(), ys.mean())


def principal_axis(mask: np.ndarray) -> float:
    """Angle of the major axis of the foreground coordinates, in (-pi/2, pi/2]."""
    return _coordinate_eig(mask)[0]


def _rotate_pair(img, mask, delta, centre):
    h, w = mask.shape
    c, s = math.cos(delta), math.sin(delta)
    cx, cy = centre
    corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], dtype=np.float64)
    rel = corners - (cx, cy)
    rot = np.column_stack([c * rel[:, 0] - s * rel[:, 1], s * rel[:, 0] + c * rel[:, 1]])
    lo = rot.min(axis=0)
    tx, ty = -lo
    out_w, out_h = (np.ceil(rot.max(axis=0) - lo) + 1).astype(int)
    # output (row, col) -> input (row, col)
    matrix = np.array([[c, -s], [s, c]])
    offset = np.array([cy, cx]) - matrix @ np.array([ty, tx])
    shape = (int(out_h), int(out_w))
    new_mask = ndimage.affine_transform(mask.astype(np.uint8), matrix, offset, shape,
                                        order=0, cval=0) > 0
    planes = [ndimage.affine_transform(img[..., k].astype(np.float64), matrix, offset, shape,
                                       order=1, cval=255.0) for k in range(img.shape[2])]
    new_img = np.clip(np.floor(np.stack(planes, axis=-1) + 0.5), 0, 255).astype(np.uint8)
    return new_img, new_mask


def align_upright(img: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotate about the foreground centroid so the major axis is vertical.

    Near-isotropic leaves (eigenvalue ratio below ``ROTATION_GATE``) are left
    as they are; their axis is noise.
    """
    if img.shape[:2] != mask.shape:
        raise ValueError(f"image {img.shape[:2]} and mask {mask.shape} differ")
    angle, l1, l2, centre = _coordinate_eig(mask)
    if l2 > 0 and l1 / l2 < ROTATION_GATE:
        return img.copy(), mask.copy()
    delta = math.pi / 2 - angle
    if abs(delta) < 1e-12:
        return img.copy(), mask.copy()
    new_img, new_mask = _rotate_pair(img, mask, delta, centre)
    if not new_mask.any():
        raise EmptyForegroundError("rotation lost the foreground")
    return new_img, new_mask


def trace_contour(mask: np.ndarray) -> Contour:
    """Moore-neighbour boundary tracing with Jacob's stopping criterion.

    Starts at the first foreground pixel in raster order and walks clockwise.
    """
    mask = np.asarray(mask, dtype=bool)
    n_fg = int(np.count_nonzero(mask))
    if n_fg < 3:
        raise DegenerateError(f"contour needs >= 3 foreground pixels, got {n_fg}")
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    first = np.flatnonzero(padded.ravel())[0]
    sy, sx = divmod(int(first), w + 2)
    start = (sx, sy)
    start_back = (sx - 1, sy)

    points = [start]
    p, back = start, start_back
    limit = 4 * n_fg + 8
    while True:
        k = _MOORE.index((back[0] - p[0], back[1] - p[1]))
        prev = back
        for step in range(1, 9):
            dx, dy = _MOORE[(k + step) % 8]
            q = (p[0] + dx, p[1] + dy)
            if padded[q[1], q[0]]:
                break
            prev = q
        else:
            raise DegenerateError("isolated pixel has no boundary to trace")
        # Jacob's test can miss when the start is never re-entered from the
        # west; leaving the start along the first edge again also closes it.
        if p == start and len(points) > 2 and q == points[1]:
            points.pop()
            break
        p, back = q, prev
        if p == start and back == start_back:
            break
        points.append(p)
        if len(points) > limit:
            raise DegenerateError("contour tracing did not close")
    pts = np.array(points, dtype=np.int64) - 1
    return Contour(pts, closed=True)


def geometric_features(mask: np.ndarray, contour: Contour) -> GeometricFeatures:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise EmptyForegroundError("mask has no foreground pixels")
    return GeometricFeatures.from_measurements(
        length=rows[-1] - rows[0] + 1,
        width=cols[-1] - cols[0] + 1,
        area=np.count_nonzero(mask),
        perimeter=contour.perimeter(),
    )


def morphological_features(g: GeometricFeatures) -> np.ndarray:
    L, W, A, P, D = g.length, g.width, g.area, g.perimeter, g.diameter
    return np.array([
        L / W,
        4.0 * math.pi * A / P ** 2,
        L * W / A,
        D / L,
        P / D,
        P / (L + W),
    ])


def moment_features(intensity: np.ndarray) -> np.ndarray:
    """10 spatial, 7 central and 7 normalized central moments of ``intensity``.

    ``intensity`` is a float image, normally gray/255 with background zeroed.
    """
    I = np.asarray(intensity, dtype=np.float64)
    h, w = I.shape
    x = np.arange(w, dtype=np.float64)
    y = np.arange(h, dtype=np.float64)
    # M_ij = sum_y y^j sum_x x^i I
    xp = np.vstack([x ** i for i in range(4)])  # (4, w)
    yp = np.vstack([y ** j for j in range(4)])  # (4, h)
    M = yp @ I @ xp.T  # M[j, i]
    m00 = M[0, 0]
    if m00 <= 0:
        raise DegenerateError("zero total intensity, moments undefined")
    xbar = M[0, 1] / m00
    ybar = M[1, 0] / m00
    dx = x - xbar
    dy = y - ybar
    dxp = np.vstack([dx ** i for i in range(4)])
    dyp = np.vstack([dy ** j for j in range(4)])
    mu = dyp @ I @ dxp.T
    spatial = [M[j, i] for i, j in SPATIAL_IDX]
    central = [mu[j, i] for i, j in CENTRAL_IDX]
    mu00 = mu[0, 0]
    normalized = [mu[j, i] / mu00 ** (1 + (i + j) / 2) for i, j in CENTRAL_IDX]
    return np.array(spatial + central + normalized)


def shape_vector(gray: np.ndarray, mask: np.ndarray, contour: Contour | None = None) -> np.ndarray:
    """The 35-d shape vector of an upright, cropped leaf."""
    mask = np.asarray(mask, dtype=bool)
    if contour is None:
        contour = trace_contour(mask)
    g = geometric_features(mask, contour)
    intensity = np.where(mask, gray.astype(np.float64) / 255.0, 0.0)
    return np.concatenate([g.as_array(), morphological_features(g), moment_features(intensity)])


def preprocess(img: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Align upright and keep the single largest component."""
    img, mask = align_upright(img, mask)
    return img, largest_component(mask)
