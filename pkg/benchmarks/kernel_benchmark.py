#!/usr/bin/env python3
"""Compare the compiled mesh kernels against the numpy fallback.

Usage:
  python benchmarks/kernel_benchmark.py [--sizes 1000,10000,100000] [--repeat 5]

Times the three hot kernels (twist, z-rotation, vertex-normal accumulation)
on synthetic meshes of increasing size and prints one table per kernel with
the speedup of the compiled backend. Exits nonzero if the compiled backend
is not built, since then there is nothing to compare.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from parasync.kernels import _numpy_impl

try:
    from parasync.kernels import _core
except ImportError:
    _core = None


def synth_mesh(rng: np.random.Generator, nv: int):
    positions = rng.uniform(-10, 10, size=(nv, 3))
    # ~2 triangles per vertex, like a typical closed surface
    triangles = rng.integers(0, nv, size=(2 * nv, 3)).astype(np.uint32)
    return positions, triangles


def best_of(repeat: int, fn, *args) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,10000,100000,500000",
                        help="comma-separated vertex counts")
    parser.add_argument("--repeat", type=int, default=5,
                        help="repetitions per measurement (best-of)")
    args = parser.parse_args()

    if _core is None:
        print("compiled kernels are not built; reinstall with a C toolchain "
              "to benchmark both backends", file=sys.stderr)
        return 1

    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)
    cases = {nv: synth_mesh(rng, nv) for nv in sizes}

    kernels = [
        ("twist_positions", lambda impl, pos, tris: impl.twist_positions(pos, 1.25)),
        ("rotate_z_positions",
         lambda impl, pos, tris: impl.rotate_z_positions(pos, 1.25)),
        ("accumulate_vertex_normals",
         lambda impl, pos, tris: impl.accumulate_vertex_normals(pos, tris)),
    ]

    for name, call in kernels:
        print(f"\n{name}")
        print(f"{'vertices':>10} {'numpy':>12} {'compiled':>12} {'speedup':>9}")
        for nv, (pos, tris) in cases.items():
            t_py = best_of(args.repeat, call, _numpy_impl, pos, tris)
            t_c = best_of(args.repeat, call, _core, pos, tris)
            print(f"{nv:>10} {t_py * 1e3:>10.3f}ms {t_c * 1e3:>10.3f}ms "
                  f"{t_py / t_c:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
