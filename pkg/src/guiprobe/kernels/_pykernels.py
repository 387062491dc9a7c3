"""Numpy implementations of the hot loops.

These define the reference semantics; the Cython module reproduces them
operation for operation so both backends agree to the last bit.
"""

from __future__ import annotations

import numpy as np


def relax(img: np.ndarray, ys: np.ndarray, xs: np.ndarray, tol: float, max_iter: int) -> int:
    h, w = img.shape[:2]
    if len(ys) == 0:
        return 0
    has_up = (ys > 0)[:, None]
    has_down = (ys < h - 1)[:, None]
    has_left = (xs > 0)[:, None]
    has_right = (xs < w - 1)[:, None]
    cnt = has_up * 1.0 + has_down + has_left + has_right
    yu, yd = np.maximum(ys - 1, 0), np.minimum(ys + 1, h - 1)
    xl, xr = np.maximum(xs - 1, 0), np.minimum(xs + 1, w - 1)
    for it in range(max_iter):
        s = np.where(has_up, img[yu, xs], 0.0)
        s = s + np.where(has_down, img[yd, xs], 0.0)
        s = s + np.where(has_left, img[ys, xl], 0.0)
        s = s + np.where(has_right, img[ys, xr], 0.0)
        nxt = s / cnt
        maxd = np.abs(nxt - img[ys, xs]).max()
        img[ys, xs] = nxt
        if maxd < tol:
            return it + 1
    return max_iter


def _axis(n_src: int, n_out: int):
    r = n_src / n_out
    s = (np.arange(n_out) + 0.5) * r - 0.5
    s = np.clip(s, 0.0, n_src - 1)
    i0 = np.floor(s).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, s - i0


def resize_bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    sh, sw = src.shape[:2]
    y0, y1, fy = _axis(sh, out_h)
    x0, x1, fx = _axis(sw, out_w)
    f = src.astype(np.float64)
    fx = fx[None, :, None]
    fy = fy[:, None, None]
    top = (1.0 - fx) * f[y0][:, x0] + fx * f[y0][:, x1]
    bot = (1.0 - fx) * f[y1][:, x0] + fx * f[y1][:, x1]
    v = np.floor((1.0 - fy) * top + fy * bot + 0.5)
    return np.clip(v, 0.0, 255.0).astype(np.uint8)
