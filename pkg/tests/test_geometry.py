import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from leafrec.errors import DegenerateError
from leafrec.geometry import (CENTRAL_IDX, SPATIAL_IDX, GeometricFeatures, align_upright,
                              equivalent_diameter, geometric_features, moment_features,
                              morphological_features, principal_axis, shape_vector, trace_contour)
from leafrec.raster import largest_component
from shapes import disk_mask, ellipse_mask, rect_mask


def angle_diff(a, b):
    """Distance between two axis angles modulo pi."""
    d = (a - b) % math.pi
    return min(d, math.pi - d)


def test_axis_horizontal_bar():
    m = np.zeros((40, 120), bool)
    m[15:25, 10:110] = True
    assert principal_axis(m) == pytest.approx(0.0, abs=1e-12)


def test_axis_rotated_bar():
    m = rect_mask(160, 160, 50, 5, angle=math.pi / 4)
    assert principal_axis(m) == pytest.approx(math.pi / 4, abs=0.02)


def test_axis_degenerate():
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    with pytest.raises(DegenerateError):
        principal_axis(m)


@pytest.mark.parametrize("phi_deg", [15, 30, 60])
def test_axis_rotation_equivariance(phi_deg):
    base = 0.3
    a = principal_axis(ellipse_mask(200, 200, 80, 25, angle=base))
    b = principal_axis(ellipse_mask(200, 200, 80, 25, angle=base + math.radians(phi_deg)))
    assert angle_diff(b - a, math.radians(phi_deg)) < 0.03


def test_axis_translation_invariant():
    m = ellipse_mask(100, 100, 30, 10, angle=0.7, centre=(40, 50))
    n = np.roll(np.roll(m, 9, axis=1), -7, axis=0)
    assert principal_axis(m) == pytest.approx(principal_axis(n), abs=1e-12)


def test_align_vertical_bar_noop():
    m = np.zeros((120, 40), bool)
    m[10:110, 15:25] = True
    img = np.full(m.shape + (3,), 255, np.uint8)
    img[m] = (0, 120, 0)
    _, out = align_upright(img, m)
    assert out.shape == m.shape
    assert np.count_nonzero(out ^ m) <= 2 * (100 + 10)


def test_align_horizontal_bar():
    m = np.zeros((40, 120), bool)
    m[15:25, 10:110] = True
    img = np.full(m.shape + (3,), 255, np.uint8)
    img[m] = (0, 120, 0)
    new_img, out = align_upright(img, m)
    ys, xs = np.nonzero(out)
    assert np.ptp(ys) + 1 >= 99 and np.ptp(xs) + 1 <= 11
    assert abs(out.sum() - m.sum()) / m.sum() < 0.02
    assert abs(principal_axis(out) - math.pi / 2) < 1e-6 or abs(principal_axis(out) + math.pi / 2) < 1e-6
    # leaf colour is carried along, background stays white
    assert (new_img[out] == (0, 120, 0)).all(axis=1).mean() > 0.8
    assert (new_img[~out] == 255).all(axis=1).mean() > 0.9


def test_align_disk_unchanged():
    m = disk_mask(61, 25)
    img = np.dstack([m.astype(np.uint8) * 100] * 3)
    new_img, out = align_upright(img, m)
    assert np.array_equal(out, m) and np.array_equal(new_img, img)


def _boundary_pixels(mask):
    """Foreground pixels with a background (or off-image) 4-neighbour."""
    p = np.pad(mask, 1)
    inner = p[1:-1, 1:-1] & p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]
    ys, xs = np.nonzero(mask & ~inner)
    return set(zip(xs.tolist(), ys.tolist()))


def _check_chain(c):
    pts = c.points
    steps = np.abs(np.roll(pts, -1, axis=0) - pts)
    assert (steps.max(axis=1) == 1).all()


def test_contour_square():
    m = np.zeros((7, 7), bool)
    m[2:5, 2:5] = True
    c = trace_contour(m)
    assert len(c) == 8
    assert set(map(tuple, c.points.tolist())) == _boundary_pixels(m)
    _check_chain(c)


def test_contour_vertical_line():
    m = np.zeros((9, 5), bool)
    m[2:7, 2] = True
    c = trace_contour(m)
    assert set(map(tuple, c.points.tolist())) == _boundary_pixels(m) == {(2, y) for y in range(2, 7)}
    _check_chain(c)


@pytest.mark.parametrize("r", [20, 35, 60])
def test_contour_disk_length(r):
    c = trace_contour(disk_mask(2 * r + 9, r))
    assert abs(c.perimeter() - 2 * math.pi * r) / (2 * math.pi * r) < 0.10
    _check_chain(c)


def test_contour_clockwise():
    c = trace_contour(ellipse_mask(50, 70, 30, 12))
    x, y = c.points[:, 0].astype(float), c.points[:, 1].astype(float)
    # positive shoelace sum in (x, y-down) coordinates = clockwise on screen
    assert (x * np.roll(y, -1) - np.roll(x, -1) * y).sum() > 0


def test_contour_too_small():
    m = np.zeros((4, 4), bool)
    m[1, 1:3] = True
    with pytest.raises(DegenerateError):
        trace_contour(m)


@settings(max_examples=60)
@given(arrays(bool, (10, 10)))
def test_contour_on_boundary(m):
    m = np.pad(m, 1)
    if m.sum() < 3:
        return
    m = largest_component(m)
    if m.sum() < 3:
        return
    c = trace_contour(m)
    _check_chain(c)
    pts = set(map(tuple, c.points.tolist()))
    assert pts <= _boundary_pixels(m)


def test_geometric_table_values():
    assert equivalent_diameter(168712) == pytest.approx(463.5, abs=0.1)
    assert equivalent_diameter(1) == pytest.approx(2 / math.sqrt(math.pi), rel=1e-12)


def test_geometric_rectangle():
    m = np.zeros((30, 20), bool)
    m[5:25, 5:15] = True
    g = geometric_features(m, trace_contour(m))
    assert (g.length, g.width, g.area) == (20, 10, 200)
    assert g.perimeter == pytest.approx(2 * (19 + 9))
    assert g.diameter ** 2 * math.pi / 4 == pytest.approx(g.area, rel=1e-12)


def test_morphological_table_values():
    g = GeometricFeatures.from_measurements(154, 1552, 168711.5, 3248.9)
    aspect, ff, rect, narrow, pd, plw = morphological_features(g)
    assert g.diameter == pytest.approx(463.5, abs=0.1)
    assert ff == pytest.approx(0.20, abs=0.01)
    assert rect == pytest.approx(1.42, abs=0.01)
    assert narrow == pytest.approx(3.01, abs=0.01)
    assert pd == pytest.approx(7.01, abs=0.01)
    assert plw == pytest.approx(1.90, abs=0.01)
    # formula as written; the published 10.08 is width/length
    assert aspect == pytest.approx(0.099, abs=0.001)


def test_morphological_identities():
    r = 7.0
    circle = GeometricFeatures.from_measurements(2 * r, 2 * r, math.pi * r * r, 2 * math.pi * r)
    assert morphological_features(circle)[1] == pytest.approx(1.0)
    s = 5.0
    square = GeometricFeatures.from_measurements(s, s, s * s, 4 * s)
    out = morphological_features(square)
    assert out[0] == pytest.approx(1.0) and out[2] == pytest.approx(1.0)


@settings(max_examples=30)
@given(st.integers(10, 60), st.integers(10, 60), st.floats(0, math.pi))
def test_isoperimetric(a, b, angle):
    m = ellipse_mask(2 * max(a, b) + 6, 2 * max(a, b) + 6, a, b, angle)
    m = largest_component(m)
    if m.sum() < 3:
        return
    g = geometric_features(m, trace_contour(m))
    assert morphological_features(g)[1] <= 1.15


def _moments_oracle(I):
    h, w = I.shape
    M = {}
    for i, j in set(SPATIAL_IDX) | {(0, 0)}:
        M[i, j] = sum(x ** i * y ** j * I[y, x] for y in range(h) for x in range(w))
    xb, yb = M[1, 0] / M[0, 0], M[0, 1] / M[0, 0]
    mu = {}
    for i, j in set(CENTRAL_IDX) | {(0, 0)}:
        mu[i, j] = sum((x - xb) ** i * (y - yb) ** j * I[y, x] for y in range(h) for x in range(w))
    eta = [mu[i, j] / mu[0, 0] ** (1 + (i + j) / 2) for i, j in CENTRAL_IDX]
    return np.array([M[k] for k in SPATIAL_IDX] + [mu[k] for k in CENTRAL_IDX] + eta)


@pytest.mark.parametrize("shape", [(5, 7), (23, 17), (64, 64)])
def test_moments_vs_double_loop(shape):
    I = np.random.default_rng(sum(shape)).random(shape)
    np.testing.assert_allclose(moment_features(I), _moments_oracle(I), rtol=1e-9, atol=1e-9)


def test_moments_mass_and_symmetry():
    m = ellipse_mask(41, 61, 25, 12)
    out = moment_features(m.astype(float))
    assert out[0] == m.sum()
    mu11, mu30, mu03 = out[10 + 2], out[10 + 6], out[10 + 1]
    for v in (mu11, mu30, mu03):
        assert abs(v) <= 1e-6 * out[0] ** 2


def test_normalized_moments_scale():
    x, y = np.mgrid[0:40, 0:40]
    m = (x + 2 * y < 60) & (x > 3) & (y > 5) & ((x - 20) ** 2 + (y - 12) ** 2 > 30)
    big = np.kron(m, np.ones((2, 2), dtype=bool))
    a = _moments_oracle(m.astype(float))[17:]
    b = _moments_oracle(big.astype(float))[17:]
    assert np.all(np.abs(a) > 1e-4)
    np.testing.assert_array_less(np.abs(b - a) / np.abs(a), 0.02)
    np.testing.assert_allclose(moment_features(big.astype(float))[17:], b, rtol=1e-9)


def test_shape_vector_layout():
    m = ellipse_mask(80, 40, 35, 15, angle=math.pi / 2)
    gray = np.where(m, 90, 255).astype(np.uint8)
    v = shape_vector(gray, m)
    assert v.shape == (35,) and np.isfinite(v).all()
    g = GeometricFeatures(*v[:5])
    np.testing.assert_allclose(v[5:11], morphological_features(g), rtol=1e-12)


@settings(max_examples=150)
@given(arrays(bool, (8, 8)))
def test_contour_covers_outer_boundary(m):
    from scipy import ndimage
    m = np.pad(m, 1)
    if m.sum() < 3 or largest_component(m).sum() < 3:
        return
    m = largest_component(m)
    bg, _ = ndimage.label(~np.pad(m, 1))
    outside = bg == bg[0, 0]
    expect = set()
    for y, x in zip(*np.nonzero(m)):
        if any(outside[y + 1 + dy, x + 1 + dx] for dy, dx in ((0, 1), (1, 0), (0, -1), (-1, 0))):
            expect.add((int(x), int(y)))
    assert expect <= set(map(tuple, trace_contour(m).points.tolist()))
