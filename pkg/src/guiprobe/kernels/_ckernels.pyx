# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. ``_pykernels`` is the reference; results must match it exactly."""

import numpy as np

from libc.math cimport fabs, floor


def relax(double[:, :, ::1] img, const Py_ssize_t[::1] ys, const Py_ssize_t[::1] xs,
          double tol, Py_ssize_t max_iter):
    """Jacobi 4-neighbour averaging over the listed pixels, in place.

    Returns the number of sweeps performed.
    """
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1], nch = img.shape[2]
    cdef Py_ssize_t n = ys.shape[0]
    cdef Py_ssize_t k, c, y, x, it
    cdef double s, cnt, v, d, maxd
    cdef double[:, ::1] nxt = np.empty((n, nch), dtype=np.float64)

    if n == 0:
        return 0
    for it in range(max_iter):
        maxd = 0.0
        for k in range(n):
            y = ys[k]
            x = xs[k]
            for c in range(nch):
                s = 0.0
                cnt = 0.0
                if y > 0:
                    s = s + img[y - 1, x, c]
                    cnt = cnt + 1.0
                if y < h - 1:
                    s = s + img[y + 1, x, c]
                    cnt = cnt + 1.0
                if x > 0:
                    s = s + img[y, x - 1, c]
                    cnt = cnt + 1.0
                if x < w - 1:
                    s = s + img[y, x + 1, c]
                    cnt = cnt + 1.0
                v = s / cnt
                d = fabs(v - img[y, x, c])
                if d > maxd:
                    maxd = d
                nxt[k, c] = v
        for k in range(n):
            for c in range(nch):
                img[ys[k], xs[k], c] = nxt[k, c]
        if maxd < tol:
            return it + 1
    return max_iter


def resize_bilinear(const unsigned char[:, :, ::1] src, Py_ssize_t out_h, Py_ssize_t out_w):
    """Pixel-center bilinear resampling with half-up rounding."""
    cdef Py_ssize_t sh = src.shape[0], sw = src.shape[1], nch = src.shape[2]
    cdef double ry = <double>sh / <double>out_h
    cdef double rx = <double>sw / <double>out_w
    cdef Py_ssize_t X, Y, c, x0, x1, y0, y1
    cdef double sx, sy, fx, fy, top, bot, v
    out = np.empty((out_h, out_w, nch), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] dst = out

    for Y in range(out_h):
        sy = (Y + 0.5) * ry - 0.5
        if sy < 0.0:
            sy = 0.0
        if sy > sh - 1:
            sy = sh - 1
        y0 = <Py_ssize_t>floor(sy)
        y1 = y0 + 1 if y0 + 1 < sh else sh - 1
        fy = sy - y0
        for X in range(out_w):
            sx = (X + 0.5) * rx - 0.5
            if sx < 0.0:
                sx = 0.0
            if sx > sw - 1:
                sx = sw - 1
            x0 = <Py_ssize_t>floor(sx)
            x1 = x0 + 1 if x0 + 1 < sw else sw - 1
            fx = sx - x0
            for c in range(nch):
                top = (1.0 - fx) * src[y0, x0, c] + fx * src[y0, x1, c]
                bot = (1.0 - fx) * src[y1, x0, c] + fx * src[y1, x1, c]
                v = floor((1.0 - fy) * top + fy * bot + 0.5)
                if v < 0.0:
                    v = 0.0
                if v > 255.0:
                    v = 255.0
                dst[Y, X, c] = <unsigned char>v
    return out
