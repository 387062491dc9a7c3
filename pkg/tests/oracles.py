"""Independent reference computations for the acceptance suite.

Everything here is written from the definitions with plain Python loops and
integer or Decimal arithmetic, sharing no code with the package, so an error
in the package cannot be mirrored by its own check.
"""

from __future__ import annotations

import math
from decimal import ROUND_HALF_UP, Decimal


def round_half_up_dec(x: Decimal | int | str) -> int:
    return int(Decimal(x).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def pct1_dec(hits: int, n: int) -> float:
    """100 * hits / n to one decimal, half-up, via Decimal."""
    return float((Decimal(100 * hits) / Decimal(n)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def mask_oracle(pixels, x0, y0, x1, y1, fill):
    """Nested lists in, nested lists out."""
    h, w = len(pixels), len(pixels[0])
    out = [[list(pixels[y][x]) for x in range(w)] for y in range(h)]
    for y in range(max(0, y0), min(h, y1)):
        for x in range(max(0, x0), min(w, x1)):
            out[y][x] = list(fill)
    return out


def relax_oracle(pixels, inside, tol=0.5, max_iter=10_000):
    """Brute-force Jacobi relaxation of the pixels flagged in ``inside``.

    ``pixels`` is rows of [r, g, b]; ``inside`` rows of bools. The region
    starts at the per-channel mean of the pixels bordering it (4-adjacent,
    outside); every sweep replaces each inside pixel by the mean of its
    in-bounds 4-neighbours from the previous sweep; stops after the first
    sweep in which no channel of any pixel moved by ``tol`` or more. Rounds
    half-up at the end.
    """
    h, w = len(pixels), len(pixels[0])
    cells = [(y, x) for y in range(h) for x in range(w) if inside[y][x]]
    border = set()
    for y, x in cells:
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and not inside[ny][nx]:
                border.add((ny, nx))
    if not border:
        raise ValueError("no border")
    grid = [[[float(v) for v in pixels[y][x]] for x in range(w)] for y in range(h)]
    init = [math.fsum(grid[y][x][c] for y, x in border) / len(border) for c in range(3)]
    for y, x in cells:
        grid[y][x] = list(init)
    for _ in range(max_iter):
        # one Jacobi sweep; the stop test looks at the worst change over all channels
        new = {}
        worst = 0.0
        for y, x in cells:
            vals = []
            for c in range(3):
                total, cnt = 0.0, 0
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w:
                        total += grid[ny][nx][c]
                        cnt += 1
                v = total / cnt
                worst = max(worst, abs(v - grid[y][x][c]))
                vals.append(v)
            new[(y, x)] = vals
        for (y, x), vals in new.items():
            grid[y][x] = vals
        if worst < tol:
            break
    return [[[round_half_up_dec(Decimal(repr(grid[y][x][c]))) if inside[y][x] else pixels[y][x][c]
              for c in range(3)] for x in range(w)] for y in range(h)]


def zoom_oracle(px: int, py: int, w: int, h: int) -> tuple[tuple[int, int, int, int], tuple[int, int]]:
    """Quadrant and remapped point by integer arithmetic.

    The half-open split is at floor(W/2), floor(H/2); points on a midline go
    right/down. The quadrant of width qw is stretched to W, so the point maps
    to round_half_up((px - x0) * W / qw), computed as floor((2 n + d) / 2 d).
    """
    mx, my = w // 2, h // 2
    x0, x1 = (0, mx) if px < mx else (mx, w)
    y0, y1 = (0, my) if py < my else (my, h)
    qw, qh = x1 - x0, y1 - y0
    nx, ny = (px - x0) * w, (py - y0) * h
    return (x0, y0, x1, y1), ((2 * nx + qw) // (2 * qw), (2 * ny + qh) // (2 * qh))


def vmc_oracle(pairs, gamma=50) -> float | None:
    """Percent of pairs whose Euclidean distance is at most gamma (Decimal sqrt)."""
    if not pairs:
        return None
    g = Decimal(gamma)
    hits = 0
    for (ax, ay), (bx, by) in pairs:
        d = (Decimal(bx - ax) ** 2 + Decimal(by - ay) ** 2).sqrt()
        hits += d <= g
    return pct1_dec(hits, len(pairs))
