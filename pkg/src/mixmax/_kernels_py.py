"""Pure numpy fallback for the compiled kernels.

The Luxemburg bisection runs in lockstep over all cubes of a batch: each
iteration evaluates ``phi`` once on the whole CSR entry array and reduces per
cube with ``bincount``.
"""

from __future__ import annotations

import math

import numpy as np


def _sums(x: np.ndarray, owner: np.ndarray, nq: int) -> np.ndarray:
    return np.bincount(owner, weights=x, minlength=nq)


def cube_sums(vals, cells, ew, indptr) -> np.ndarray:
    terms = vals[cells] * ew
    return np.array([math.fsum(terms[a:b]) for a, b in zip(indptr[:-1], indptr[1:])])


def cube_mins(vals, cells, indptr) -> np.ndarray:
    nq = len(indptr) - 1
    out = np.full(nq, np.inf)
    nz = np.diff(indptr) > 0
    if cells.size:
        out[nz] = np.minimum.reduceat(vals[cells], indptr[:-1][nz])
    return out


def scatter_max(n_out, centers, c_indptr, cube_vals) -> np.ndarray:
    out = np.zeros(n_out)
    owner = np.repeat(np.arange(len(c_indptr) - 1), np.diff(c_indptr))
    np.maximum.at(out, centers, cube_vals[owner])
    return out


def lux_norms(vals, cells, ew, indptr, den, phi, s1, tol, identity):
    """Return ``(norms, iterations, residuals)`` for every cube of the batch."""
    nq = len(indptr) - 1
    owner = np.repeat(np.arange(nq), np.diff(indptr))
    x = vals[cells]
    mean = cube_sums(vals, cells, ew, indptr) / den
    iters = np.zeros(nq, dtype=np.int64)
    resid = np.zeros(nq)
    live = mean > 0
    if identity:
        norms = np.where(live, mean, 0.0)
        resid[live] = 1.0
        return norms, iters, resid
    mx = np.zeros(nq)
    if x.size:
        np.maximum.at(mx, owner, x)

    def G(lam):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            t = x / lam[owner]
            vals_ = np.asarray(phi(t), dtype=float) * ew
        return _sums(vals_, owner, nq) / den

    hi = np.where(live, mx / s1, 1.0)
    lo = np.where(live, mean / s1 * (1.0 - 1e-9), 0.5)
    ghi = G(hi)
    for _ in range(2000):
        bad = live & (ghi > 1.0)
        if not bad.any():
            break
        lo = np.where(bad, hi, lo)
        hi = np.where(bad, hi * 2.0, hi)
        iters += bad
        ghi = np.where(bad, G(hi), ghi)
    lo = np.where(lo >= hi, hi * 0.5, lo)
    glo = G(lo)
    for _ in range(2000):
        bad = live & (glo <= 1.0) & (lo > 0)
        if not bad.any():
            break
        hi = np.where(bad, lo, hi)
        ghi = np.where(bad, glo, ghi)
        lo = np.where(bad, lo * 0.5, lo)
        iters += bad
        glo = np.where(bad, G(lo), glo)
    for _ in range(400):
        act = live & (hi - lo > tol * hi)
        if not act.any():
            break
        mid = np.sqrt(lo * hi)
        stuck = ~((mid > lo) & (mid < hi))
        mid = np.where(stuck, 0.5 * (lo + hi), mid)
        act &= (mid > lo) & (mid < hi)
        gm = G(np.where(act, mid, hi))
        down = act & (gm <= 1.0)
        up = act & ~(gm <= 1.0)
        hi = np.where(down, mid, hi)
        ghi = np.where(down, gm, ghi)
        lo = np.where(up, mid, lo)
        iters += act
    norms = np.where(live, hi, 0.0)
    resid = np.where(live, ghi, 0.0)
    return norms, iters, resid
