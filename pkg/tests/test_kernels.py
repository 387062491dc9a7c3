from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guiprobe import kernels

BACKENDS = kernels.available_backends()


def test_python_backend_always_present():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS
    with pytest.raises(ValueError):
        kernels.resize_bilinear(np.zeros((2, 2, 3), np.uint8), 2, 2, backend="nope")


@st.composite
def _image_and_mask(draw):
    h, w = draw(st.integers(3, 24)), draw(st.integers(3, 24))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    px = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
    y0, x0 = draw(st.integers(0, h - 1)), draw(st.integers(0, w - 1))
    y1, x1 = draw(st.integers(y0 + 1, h)), draw(st.integers(x0 + 1, w))
    mask = np.zeros((h, w), bool)
    mask[y0:y1, x0:x1] = True
    if mask.all():
        mask[0, 0] = False
    return px, mask


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
@settings(max_examples=60, deadline=None)
@given(_image_and_mask())
def test_backends_agree_on_laplace_fill(case):
    px, mask = case
    a, ia = kernels.laplace_fill(px, mask, backend="python")
    b, ib = kernels.laplace_fill(px, mask, backend="cython")
    assert ia == ib
    assert np.array_equal(a, b)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(1, 60), st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_backends_agree_on_resize(h, w, oh, ow, seed):
    src = np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8)
    assert np.array_equal(kernels.resize_bilinear(src, oh, ow, backend="python"),
                          kernels.resize_bilinear(src, oh, ow, backend="cython"))


@pytest.mark.parametrize("backend", BACKENDS)
def test_laplace_fill_reproduces_linear_ramp(backend):
    # a linear function is harmonic, so relaxation converges to it exactly
    h, w = 30, 40
    yy, xx = np.mgrid[0:h, 0:w]
    px = np.stack([xx * 6, yy * 8, 10 + xx * 2 + yy * 3], -1).astype(np.uint8)
    mask = np.zeros((h, w), bool)
    mask[8:22, 10:30] = True
    out, iters = kernels.laplace_fill(px, mask, tol=1e-6, backend=backend)
    assert iters < 10_000
    assert np.abs(out.astype(int) - px.astype(int)).max() <= 1
    assert np.array_equal(out[~mask], px[~mask])


@pytest.mark.parametrize("backend", BACKENDS)
def test_laplace_fill_constant_surroundings(backend):
    px = np.full((10, 10, 3), 77, np.uint8)
    px[3:7, 3:7] = 0
    mask = np.zeros((10, 10), bool)
    mask[3:7, 3:7] = True
    out, iters = kernels.laplace_fill(px, mask, backend=backend)
    assert (out == 77).all()
    assert iters == 1


@pytest.mark.parametrize("backend", BACKENDS)
def test_laplace_fill_respects_iteration_cap(backend):
    px = np.zeros((40, 40, 3), np.uint8)
    px[:, 0] = 255
    mask = np.zeros((40, 40), bool)
    mask[1:39, 1:39] = True
    _, iters = kernels.laplace_fill(px, mask, tol=1e-12, max_iter=3, backend=backend)
    assert iters == 3


def test_laplace_fill_needs_a_boundary():
    with pytest.raises(ValueError):
        kernels.laplace_fill(np.zeros((4, 4, 3), np.uint8), np.ones((4, 4), bool))


@pytest.mark.parametrize("backend", BACKENDS)
def test_resize_identity_and_upscale(backend):
    src = np.random.default_rng(0).integers(0, 256, (7, 9, 3), dtype=np.uint8)
    assert np.array_equal(kernels.resize_bilinear(src, 7, 9, backend=backend), src)
    flat = np.full((3, 3, 3), 200, np.uint8)
    assert (kernels.resize_bilinear(flat, 12, 12, backend=backend) == 200).all()


@pytest.mark.parametrize("backend", BACKENDS)
def test_resize_doubling_matches_hand_computed_bilinear(backend):
    # 1x2 -> 1x4 with pixel-centre alignment: samples at x = -0.25, 0.25, 0.75, 1.25
    src = np.array([[[0, 0, 0], [100, 100, 100]]], np.uint8)
    out = kernels.resize_bilinear(src, 1, 4, backend=backend)[0, :, 0]
    assert out.tolist() == [0, 25, 75, 100]
