"""Time each hot kernel under the compiled and the numpy backend.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from statecast import fixtures, kernels
from statecast.codec import search_candidates
from statecast.scene import SUBPIXEL_BITS, triangle_soup


def workloads(rng: np.random.Generator) -> dict[str, callable]:
    """Kernel calls at the sizes a 480x272 session uses, keyed by kernel name."""
    scene = fixtures.village_toy(frames=1)
    xy, iz, col = triangle_soup(scene, 0)
    W, H = scene.rgb_resolution
    img = rng.integers(0, 256, size=(H, W, 3), dtype=np.uint8)
    ref = np.roll(img, (2, 3), axis=(0, 1))
    cands = search_candidates(8)
    fimg = img.astype(np.float64)
    u = rng.uniform(-4, 4, size=(H, W))
    v = rng.uniform(-4, 4, size=(H, W))
    w = rng.uniform(0, 1, 20_000)
    p = np.clip(0.9 * w + 0.05, 0, 1)
    known = (rng.random((H, W)) < 0.7).astype(np.uint8)
    field = rng.normal(size=(64, 128))

    def raster(be):
        be.rasterize(xy, iz, col, np.full((H, W, 3), 128, np.uint8), np.zeros((H, W)), SUBPIXEL_BITS)

    return {
        "rasterize": raster,
        "motion_search": lambda be: be.motion_search(img, ref, cands, 16, 64),
        "bilinear_warp": lambda be: be.bilinear_warp(fimg, u, v),
        "fit_affine_charbonnier": lambda be: be.fit_affine_charbonnier(w, p, 0.01, 100, 1e-12),
        "jacobi_fill": lambda be: be.jacobi_fill(fimg, known, 50),
        "median_filter2d": lambda be: be.median_filter2d(field, 15),
    }


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="timing repeats; the best is kept")
    ap.add_argument("--json", help="also write results as JSON")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    jobs = workloads(np.random.default_rng(0))
    rows = {}
    for name, fn in jobs.items():
        row = {}
        for be_name in backends:
            be = kernels.get_backend(be_name)
            fn(be)  # warm-up
            row[be_name] = min(timeit.repeat(lambda: fn(be), number=1, repeat=args.repeat)) * 1e3
        rows[name] = row

    print(f"{'kernel':<24}" + "".join(f"{b + ' ms':>14}" for b in backends) + f"{'speedup':>10}")
    for name, row in rows.items():
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{name:<24}" + "".join(f"{row[b]:>14.2f}" for b in backends) + f"{speed:>9.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
