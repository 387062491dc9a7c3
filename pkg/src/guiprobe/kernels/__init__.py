"""Pixel kernels with a compiled fast path.

The Cython extension is used when it was built; otherwise the numpy versions
in :mod:`._pykernels` are used. Set ``GUIPROBE_PURE_PYTHON=1`` to force the
fallback. Both produce bit-identical output.
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS: dict[str, ModuleType] = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

if _ckernels is not None and not os.environ.get("GUIPROBE_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _impl(backend: str | None) -> ModuleType:
    name = backend or BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available (have {available_backends()})") from None


def laplace_fill(pixels: np.ndarray, mask: np.ndarray, *, tol: float = 0.5,
                 max_iter: int = 10_000, backend: str | None = None) -> tuple[np.ndarray, int]:
    """Fill ``mask`` pixels by harmonic relaxation from their surroundings.

    Masked pixels start at the per-channel mean of the unmasked pixels that
    4-border the mask, then are repeatedly replaced by the average of their
    in-bounds 4-neighbours until the largest change in a sweep drops below
    ``tol`` or ``max_iter`` sweeps have run. Unmasked pixels act as fixed
    boundary values. Returns the uint8 image (rounded half-up) and the sweep count.

    Raises:
        ValueError: if no unmasked pixel touches the mask.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    border = np.zeros_like(mask)
    border[1:, :] |= mask[:-1, :]
    border[:-1, :] |= mask[1:, :]
    border[:, 1:] |= mask[:, :-1]
    border[:, :-1] |= mask[:, 1:]
    border &= ~mask
    if not border.any():
        raise ValueError("region has no boundary pixels to interpolate from")

    img = np.ascontiguousarray(pixels, dtype=np.float64).copy()
    img[mask] = img[border].mean(axis=0)
    ys, xs = np.nonzero(mask)
    ys = np.ascontiguousarray(ys, dtype=np.intp)
    xs = np.ascontiguousarray(xs, dtype=np.intp)
    iters = _impl(backend).relax(img, ys, xs, float(tol), int(max_iter))
    out = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    return out, iters


def resize_bilinear(src: np.ndarray, out_h: int, out_w: int, *, backend: str | None = None) -> np.ndarray:
    """Resample an ``(h, w, c)`` uint8 image to ``(out_h, out_w, c)``."""
    src = np.ascontiguousarray(src, dtype=np.uint8)
    return _impl(backend).resize_bilinear(src, int(out_h), int(out_w))
