"""Compare the compiled and pure-Python kernel backends on batched Luxemburg bisection.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mixmax import kernels
from mixmax.luxemburg import family_norms
from mixmax.mesh import Box, MeshFn, cube_family
from mixmax.young import LLogL, Power, Spliced

CASES = [
    ("n=1 J=10 LlogL", 1, 10, LLogL(1.0, 1.0)),
    ("n=1 J=10 spliced", 1, 10, Spliced(Power(1.0), LLogL(1.0, 1.0), 1.0)),
    ("n=2 J=6 LlogL", 2, 6, LLogL(1.0, 1.0)),
]


def bench(repeat: int) -> list[dict]:
    rows = []
    rng = np.random.default_rng(0)
    for label, n, J, phi in CASES:
        box = Box.centered(n, 2)
        f = MeshFn(box, J, rng.exponential(size=(2**J,) * n))
        fam = cube_family(box, J)
        ref = None
        for name in kernels.available_backends():
            with kernels.use_backend(name):
                best = float("inf")
                for _ in range(repeat):
                    t0 = time.perf_counter()
                    norms = family_norms(f, fam, phi)[0]
                    best = min(best, time.perf_counter() - t0)
            agree = True if ref is None else bool(np.allclose(norms, ref, rtol=1e-12, atol=0))
            ref = norms if ref is None else ref
            rows.append({"case": label, "cubes": len(fam), "backend": name, "seconds": best, "agree": agree})
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rows = bench(args.repeat)
    print(f"{'case':<20} {'cubes':>7} {'backend':<8} {'seconds':>9} agree")
    for r in rows:
        print(f"{r['case']:<20} {r['cubes']:>7} {r['backend']:<8} {r['seconds']:>9.4f} {r['agree']}")


if __name__ == "__main__":
    main()
