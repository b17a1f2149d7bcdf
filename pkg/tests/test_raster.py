import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from leafrec.errors import DegenerateError, EmptyForegroundError, ImageFormatError
from leafrec.raster import (binarize, crop_to_content, load_image, otsu_threshold, resize,
                            save_image, to_grayscale)

rgb_images = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12), st.just(3)))


def test_load_white(tmp_path):
    Image.new("RGB", (2, 2), (255, 255, 255)).save(tmp_path / "w.png")
    img = load_image(tmp_path / "w.png")
    assert img.shape == (2, 2, 3) and (img == 255).all()


def test_load_red_drops_alpha(tmp_path):
    Image.new("RGBA", (1, 1), (255, 0, 0, 10)).save(tmp_path / "r.png")
    assert tuple(load_image(tmp_path / "r.png")[0, 0]) == (255, 0, 0)


def test_roundtrip_random(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (16, 16, 3), dtype=np.uint8)
    save_image(tmp_path / "x.png", img)
    assert np.array_equal(load_image(tmp_path / "x.png"), img)


def test_load_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "missing.png")
    (tmp_path / "bad.png").write_bytes(b"not an image")
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "bad.png")


@pytest.mark.parametrize("rgb,gray", [((255, 255, 255), 255), ((0, 0, 0), 0), ((100, 50, 200), 82)])
def test_grayscale_values(rgb, gray):
    assert to_grayscale(np.array([[rgb]], dtype=np.uint8))[0, 0] == gray


@given(rgb_images, st.integers(0, 40))
def test_grayscale_monotone(img, bump):
    brighter = np.minimum(img.astype(int) + bump, 255).astype(np.uint8)
    assert (to_grayscale(brighter) >= to_grayscale(img)).all()


def _otsu_bruteforce(gray):
    best, best_t = -1.0, None
    v = gray.ravel().astype(float)
    for t in range(256):
        a, b = v[v <= t], v[v > t]
        if a.size == 0 or b.size == 0:
            continue
        score = a.size * b.size * (a.mean() - b.mean()) ** 2
        if score > best + 1e-9:
            best, best_t = score, t
    return best_t


def test_otsu_bimodal():
    gray = np.full((10, 10), 240, dtype=np.uint8)
    gray[:, :5] = 10
    t = otsu_threshold(gray)
    assert 10 <= t < 240
    assert t == _otsu_bruteforce(gray)
    m = binarize(gray)
    assert m[:, :5].all() and not m[:, 5:].any()


def test_otsu_matches_bruteforce_random():
    rng = np.random.default_rng(3)
    for _ in range(5):
        gray = np.concatenate([rng.normal(60, 15, 200), rng.normal(190, 20, 300)])
        gray = np.clip(gray, 0, 255).astype(np.uint8).reshape(20, 25)
        assert otsu_threshold(gray) == _otsu_bruteforce(gray)


def test_binarize_dark_patch():
    gray = np.full((30, 30), 250, dtype=np.uint8)
    gray[5:20, 8:25] = 40
    expect = gray == 40
    assert np.array_equal(binarize(gray), expect)


def _components_bfs(mask):
    seen = np.zeros_like(mask)
    comps = []
    h, w = mask.shape
    for r in range(h):
        for c in range(w):
            if mask[r, c] and not seen[r, c]:
                stack, comp = [(r, c)], []
                seen[r, c] = True
                while stack:
                    y, x = stack.pop()
                    comp.append((y, x))
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            yy, xx = y + dy, x + dx
                            if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not seen[yy, xx]:
                                seen[yy, xx] = True
                                stack.append((yy, xx))
                comps.append(comp)
    return comps


def test_binarize_keeps_largest_blob():
    gray = np.full((40, 40), 230, dtype=np.uint8)
    gray[5:15, 5:15] = 20  # 100 px
    gray[30:31, 30:35] = 20  # 5 px
    m = binarize(gray)
    comps = _components_bfs(gray < 100)
    big = max(comps, key=len)
    assert len(big) == 100
    assert m.sum() == 100 and all(m[y, x] for y, x in big)


@settings(max_examples=30)
@given(arrays(np.uint8, (12, 12), elements=st.sampled_from([0, 255])))
def test_binarize_single_component(gray):
    if len(np.unique(gray)) < 2:
        with pytest.raises(DegenerateError):
            binarize(gray)
        return
    assert len(_components_bfs(binarize(gray))) == 1


def test_binarize_flat_raises():
    with pytest.raises(EmptyForegroundError):
        binarize(np.full((5, 5), 255, dtype=np.uint8))


def test_crop_point_and_full():
    img = np.zeros((10, 10, 3), dtype=np.uint8)
    m = np.zeros((10, 10), dtype=bool)
    m[3, 7] = True
    ci, cm = crop_to_content(img, m)
    assert ci.shape == (1, 1, 3) and cm.shape == (1, 1)
    full = np.ones((10, 10), dtype=bool)
    assert crop_to_content(img, full)[1].shape == (10, 10)


def test_crop_rectangle():
    img = np.random.default_rng(1).integers(0, 256, (100, 100, 3), dtype=np.uint8)
    m = np.zeros((100, 100), dtype=bool)
    m[40:60, 45:55] = True
    ci, cm = crop_to_content(img, m)
    ys, xs = np.nonzero(m)
    assert ci.shape[:2] == (ys.max() - ys.min() + 1, xs.max() - xs.min() + 1) == (20, 10)
    assert np.array_equal(ci, img[40:60, 45:55])


def test_crop_empty():
    with pytest.raises(EmptyForegroundError):
        crop_to_content(np.zeros((3, 3, 3), np.uint8), np.zeros((3, 3), bool))


@given(arrays(bool, (9, 9)))
def test_crop_idempotent(m):
    if not m.any():
        return
    img = np.dstack([m.astype(np.uint8)] * 3)
    once = crop_to_content(img, m)
    twice = crop_to_content(*once)
    assert np.array_equal(once[0], twice[0]) and np.array_equal(once[1], twice[1])


def test_resize_identity():
    img = np.random.default_rng(2).integers(0, 256, (64, 64, 3), dtype=np.uint8)
    assert np.array_equal(resize(img, 64), img)


def test_resize_identity_full_scale():
    img = np.random.default_rng(2).integers(0, 256, (1600, 1600, 3), dtype=np.uint8)
    assert np.array_equal(resize(img, 1600), img)


def test_resize_constant():
    img = np.full((7, 13, 3), (10, 200, 30), dtype=np.uint8)
    out = resize(img, 26)
    assert (out[6:20] == (10, 200, 30)).all()  # 7 -> 14 rows, centred
    assert (out[:6] == 255).all() and (out[20:] == 255).all()


def _bilinear_point(src, r, c):
    h, w = src.shape
    r = min(max(r, 0.0), h - 1.0)
    c = min(max(c, 0.0), w - 1.0)
    r0, c0 = int(np.floor(r)), int(np.floor(c))
    r1, c1 = min(r0 + 1, h - 1), min(c0 + 1, w - 1)
    a, b = r - r0, c - c0
    return ((1 - a) * (1 - b) * src[r0, c0] + (1 - a) * b * src[r0, c1]
            + a * (1 - b) * src[r1, c0] + a * b * src[r1, c1])


def test_resize_checkerboard_bilinear():
    board = np.array([[0, 255], [255, 0]], dtype=float)
    img = np.dstack([board] * 3).astype(np.uint8)
    out = resize(img, 4)
    for i in range(4):
        for j in range(4):
            # pixel-centre mapping: out (i, j) samples src at ((i+.5)/2-.5, (j+.5)/2-.5)
            expect = _bilinear_point(board, (i + 0.5) / 2 - 0.5, (j + 0.5) / 2 - 0.5)
            assert out[i, j, 0] == int(np.floor(expect + 0.5))


@settings(max_examples=40)
@given(rgb_images, st.integers(1, 20))
def test_resize_shape(img, side):
    assert resize(img, side).shape == (side, side, 3)
