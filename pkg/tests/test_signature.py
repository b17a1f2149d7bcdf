import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from leafrec.geometry import Contour, trace_contour
from leafrec.raster import crop_to_content
from leafrec.signature import fft, fourier_descriptors, radial_signature, xy_projection
from shapes import disk_mask, ellipse_mask


def naive_dft(x):
    m = len(x)
    n = np.arange(m)
    return np.exp(-2j * np.pi * np.outer(n, n) / m) @ np.asarray(x, dtype=complex)


def ifft(X):
    return np.conj(fft(np.conj(X))) / len(X)


def test_fft_impulse_and_constant():
    np.testing.assert_allclose(fft([1, 0, 0, 0]), [1, 1, 1, 1])
    np.testing.assert_allclose(fft([2.5] * 8), [20] + [0] * 7, atol=1e-12)


@pytest.mark.parametrize("m", [2, 4, 64, 256])
def test_fft_vs_naive(m):
    x = np.random.default_rng(m).standard_normal(m)
    X = fft(x)
    ref = naive_dft(x)
    assert np.max(np.abs(X - ref)) <= 1e-9 * np.max(np.abs(ref))
    assert np.sum(np.abs(x) ** 2) == pytest.approx(np.sum(np.abs(X) ** 2) / m, rel=1e-6)
    np.testing.assert_allclose(ifft(X).real, x, atol=1e-9)


def test_fft_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        fft([1, 2, 3])


def test_signature_circle():
    sig = radial_signature(trace_contour(disk_mask(121, 50)))
    assert len(sig.r) == 128
    assert np.all(np.abs(sig.r - 50) <= 1.5)


def test_signature_ellipse_ratio():
    sig = radial_signature(trace_contour(ellipse_mask(101, 181, 80, 40)))
    assert sig.r.max() / sig.r.min() == pytest.approx(2.0, abs=0.1)


def test_signature_square_centroid():
    m = np.zeros((40, 40), bool)
    m[10:30, 10:30] = True
    sig = radial_signature(trace_contour(m))
    assert sig.centroid == pytest.approx((19.5, 19.5), abs=0.5)
    assert (sig.r >= 0).all()


def test_descriptors_circle():
    fd = fourier_descriptors(trace_contour(disk_mask(121, 50)), 16)
    assert fd.shape == (16,) and (fd <= 0.03).all()


def _leafish(scale):
    size = 60 * scale
    y, x = np.mgrid[0:size, 0:size].astype(float) / scale
    t = np.arctan2(y - 30, x - 30)
    rad = 22 * (1 + 0.15 * np.cos(3 * t)) / np.sqrt(np.cos(t) ** 2 + (1.6 * np.sin(t)) ** 2)
    return np.hypot(x - 30, y - 30) <= rad


def test_descriptors_scale_pair():
    a = fourier_descriptors(trace_contour(_leafish(2)))
    b = fourier_descriptors(trace_contour(_leafish(4)))
    assert np.linalg.norm(a - b) <= 0.03 * np.linalg.norm(a)


def test_descriptors_rotation_pair():
    m = _leafish(2)
    a = fourier_descriptors(trace_contour(m))
    b = fourier_descriptors(trace_contour(np.rot90(m)))
    assert np.linalg.norm(a - b) <= 0.05 * np.linalg.norm(a)


def test_descriptors_start_point_invariant():
    c = trace_contour(_leafish(2))
    sig = radial_signature(c).r
    for shift in (1, 17, 64):
        a = np.abs(fft(sig))
        b = np.abs(fft(np.roll(sig, shift)))
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)


def test_descriptor_k_bounds():
    c = trace_contour(disk_mask(41, 15))
    with pytest.raises(ValueError):
        fourier_descriptors(c, 64)


def test_projection_full():
    assert (xy_projection(np.ones((45, 60), bool)) == 1.0).all()


def test_projection_left_half():
    m = np.zeros((40, 60), bool)
    m[:, :30] = True
    v = xy_projection(m)
    assert (v[:15] == 1).all() and (v[15:30] == 0).all()
    assert np.allclose(v[30:], 0.5)


def test_projection_vs_strip_count():
    m = np.random.default_rng(0).random((90, 90)) > 0.6
    v = xy_projection(m)
    for i in range(30):
        assert v[i] == m[:, 3 * i:3 * i + 3].sum() / (3 * 90)
        assert v[30 + i] == m[3 * i:3 * i + 3, :].sum() / (3 * 90)


@settings(max_examples=40)
@given(arrays(bool, st.tuples(st.integers(1, 50), st.integers(1, 50))))
def test_projection_range(m):
    if not m.any():
        return
    v = xy_projection(m)
    assert v.shape == (60,) and ((v >= 0) & (v <= 1)).all()


@settings(max_examples=20)
@given(st.integers(0, 30), st.integers(0, 30))
def test_projection_translation(dx, dy):
    blob = ellipse_mask(25, 35, 15, 9, angle=0.4)
    canvas = np.zeros((80, 80), bool)
    canvas[dy:dy + 25, dx:dx + 35] = blob
    ref = xy_projection(crop_to_content(np.dstack([blob] * 3), blob)[1])
    got = xy_projection(crop_to_content(np.dstack([canvas] * 3), canvas)[1])
    np.testing.assert_array_equal(ref, got)
