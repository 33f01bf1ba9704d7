"""Backend selection for the per-cube hot loops.

The compiled extension ``mixmax._kernels`` is used when it imports; otherwise
(or with ``MIXMAX_PURE_PYTHON=1``) the numpy implementation in
``mixmax._kernels_py`` takes over.  Both expose the same results to within the
bisection tolerance.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

from . import _kernels_py
from .young import LLogL, Power, Powered, Spliced, YoungFn, gen_inverse

try:  # pragma: no cover - depends on the build
    if os.environ.get("MIXMAX_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

LUX_RTOL = 1e-10
_state = {"backend": "cython" if _compiled is not None else "python", "threads": 1}


def available_backends() -> list[str]:
    return ["cython", "python"] if _compiled is not None else ["python"]


def backend() -> str:
    return _state["backend"]


def set_backend(name: str) -> None:
    if name not in available_backends():
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _state["backend"] = name


@contextmanager
def use_backend(name: str):
    old = _state["backend"]
    set_backend(name)
    try:
        yield
    finally:
        _state["backend"] = old


def set_threads(k: int) -> None:
    if k < 1:
        raise ValueError("threads must be >= 1")
    _state["threads"] = int(k)


def threads() -> int:
    return _state["threads"]


_KIND = {Power: 0, LLogL: 1, Spliced: 2, Powered: 3}


def encode_young(phi: YoungFn):
    """Flatten a Young-function tree into (kinds, params[3 per node], left, right); node 0 is the root."""
    kinds, par, left, right = [], [], [], []

    def visit(node) -> int:
        i = len(kinds)
        kinds.append(_KIND[type(node)])
        par.extend([0.0, 0.0, 0.0])
        left.append(-1)
        right.append(-1)
        if isinstance(node, Power):
            par[3 * i] = node.p
        elif isinstance(node, LLogL):
            par[3 * i : 3 * i + 3] = [node.r, node.delta, node.log_scale]
        elif isinstance(node, Spliced):
            par[3 * i] = node.t0
            left[i] = visit(node.low)
            right[i] = visit(node.high)
        else:
            par[3 * i] = node.exponent
            left[i] = visit(node.base)
        return i

    visit(phi)
    return (
        np.array(kinds, dtype=np.int32),
        np.array(par, dtype=float),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
    )


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a):
    return np.ascontiguousarray(a, dtype=float)


def lux_norms(vals, cells, ew, indptr, den, phi: YoungFn, tol: float = LUX_RTOL):
    """Batched ``inf{lam : sum_j ew_j phi(vals[cells_j]/lam) / den_q <= 1}`` per cube.

    Returns ``(norms, iterations, residuals)`` where the residual is the
    defining average at the returned norm.
    """
    vals, ew, den = _f64(vals), _f64(ew), _f64(den)
    cells, indptr = _i64(cells), _i64(indptr)
    nq = len(indptr) - 1
    s1 = gen_inverse(phi, 1.0)
    identity = phi.is_identity
    if _state["backend"] == "python" or nq == 0:
        return _kernels_py.lux_norms(vals, cells, ew, indptr, den, phi, s1, tol, identity)
    kinds, par, left, right = encode_young(phi)
    norms = np.zeros(nq)
    iters = np.zeros(nq, dtype=np.int64)
    resid = np.zeros(nq)

    def work(bounds):
        _compiled.lux_norms(vals, cells, ew, indptr, den, kinds, par, left, right,
                            s1, tol, identity, bounds[0], bounds[1], norms, iters, resid)

    k = _state["threads"]
    if k == 1 or nq < 64:
        work((0, nq))
    else:
        edges = np.linspace(0, nq, 4 * k + 1).astype(np.int64)
        with ThreadPoolExecutor(k) as ex:
            list(ex.map(work, zip(edges[:-1], edges[1:])))
    return norms, iters, resid


def cube_sums(vals, cells, ew, indptr) -> np.ndarray:
    """Compensated ``sum_j ew_j vals[cells_j]`` per cube."""
    args = (_f64(vals), _i64(cells), _f64(ew), _i64(indptr))
    if _state["backend"] == "python":
        return _kernels_py.cube_sums(*args)
    return _compiled.cube_sums(*args)


def cube_mins(vals, cells, indptr) -> np.ndarray:
    args = (_f64(vals), _i64(cells), _i64(indptr))
    if _state["backend"] == "python":
        return _kernels_py.cube_mins(*args)
    return _compiled.cube_mins(*args)


def scatter_max(n_out: int, centers, c_indptr, cube_vals) -> np.ndarray:
    """``out[c] = max(0, max of cube_vals[q] over cubes q listing cell c)``."""
    args = (int(n_out), _i64(centers), _i64(c_indptr), _f64(cube_vals))
    if _state["backend"] == "python":
        return _kernels_py.scatter_max(*args)
    return _compiled.scatter_max(*args)
