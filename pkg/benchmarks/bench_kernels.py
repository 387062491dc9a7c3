"""Time the compiled and numpy pixel kernels on screenshot-sized inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one line per (kernel, size, backend) with the best wall time and the
speed-up of the compiled backend, after checking both give identical output.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from guiprobe import kernels

# (label, image h, w, masked block side) for the relaxation fill
FILL_CASES = [("block 24px", 240, 320, 24), ("block 50px", 400, 400, 50), ("block 96px", 640, 360, 96)]
# (label, source h, w) for the zoom resize back to double size
RESIZE_CASES = [("360x640 quadrant", 320, 180), ("1080x2400 quadrant", 1200, 540)]


def _screen(h: int, w: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    base = np.stack([xx * 255 // max(w - 1, 1), yy * 255 // max(h - 1, 1), (xx + yy) % 256], -1)
    return np.clip(base + rng.integers(-12, 13, base.shape), 0, 255).astype(np.uint8)


def _best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")
    if "cython" not in backends:
        print("compiled backend not built; run `pip install -e . --no-build-isolation` first")

    for label, h, w, side in FILL_CASES:
        px = _screen(h, w)
        mask = np.zeros((h, w), bool)
        y0, x0 = (h - side) // 2, (w - side) // 2
        mask[y0:y0 + side, x0:x0 + side] = True
        outs, times = {}, {}
        for b in backends:
            outs[b] = kernels.laplace_fill(px, mask, backend=b)
            times[b] = _best(lambda b=b: kernels.laplace_fill(px, mask, backend=b), args.repeat)
        _report("laplace_fill", label, times, outs, extra=f"{outs[backends[0]][1]} sweeps")

    for label, h, w in RESIZE_CASES:
        src = _screen(h, w, seed=1)
        outs, times = {}, {}
        for b in backends:
            outs[b] = kernels.resize_bilinear(src, 2 * h, 2 * w, backend=b)
            times[b] = _best(lambda b=b: kernels.resize_bilinear(src, 2 * h, 2 * w, backend=b), args.repeat)
        _report("resize_bilinear", label, times, outs)
    return 0


def _report(kernel: str, label: str, times: dict, outs: dict, extra: str = "") -> None:
    ref = outs["python"]
    for b, out in outs.items():
        same = np.array_equal(out[0], ref[0]) if isinstance(out, tuple) else np.array_equal(out, ref)
        if not same:
            raise SystemExit(f"{kernel} {label}: {b} output differs from python")
    line = "  ".join(f"{b} {times[b] * 1e3:9.2f} ms" for b in sorted(times))
    speed = f"  x{times['python'] / times['cython']:.1f}" if "cython" in times else ""
    print(f"{kernel:16s} {label:20s} {line}{speed}  {extra}".rstrip())


if __name__ == "__main__":
    sys.exit(main())
