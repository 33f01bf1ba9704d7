"""Luxemburg averages on cubes, their weighted and infimum forms, and Hölder/Jensen checks.

For a cube ``Q`` and Young function ``phi``::

    ||f||_{phi,Q} = inf{ lam > 0 : (1/|Q|) int_Q phi(f/lam) <= 1 }

is found by bracketing bisection (relative tolerance ``1e-10``).  The weighted
variant replaces ``dx/|Q|`` by ``w dx / w(Q)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .mesh import CubeFamily, DyadicCube, MeshFn
from .young import YoungFn, check_equivalence, gen_inverse

__all__ = [
    "LuxResult",
    "CheckResult",
    "family_norms",
    "lux_norm",
    "weighted_lux_norm",
    "defining_average",
    "lux_infimum_form",
    "gen_holder_check",
    "inverse_condition",
    "jensen_check",
    "jensen_bound",
    "equivalence_constant",
]


@dataclass(frozen=True)
class LuxResult:
    norm: float
    iterations: int
    residual: float

    def __float__(self):
        return self.norm


@dataclass(frozen=True)
class CheckResult:
    """A measured ratio; ``degenerate`` marks a 0/0 reported as 0."""

    value: float
    degenerate: bool = False
    detail: dict = field(default_factory=dict)

    def __float__(self):
        return self.value


def _entry_weights(f: MeshFn, fam: CubeFamily, w: MeshFn | None):
    if w is None:
        return fam.overlap, fam.measure
    if not f.same_mesh(w):
        raise ValueError("mesh mismatch between f and w")
    ew = fam.overlap * w.flat[fam.cells]
    den = kernels.cube_sums(w.flat, fam.cells, fam.overlap, fam.indptr)
    if np.any(den <= 0):
        raise ValueError("w(Q) = 0 on some cube")
    return ew, den


def family_norms(f: MeshFn, fam: CubeFamily, phi: YoungFn, w: MeshFn | None = None):
    """Luxemburg norms of ``f`` on every cube of ``fam``: ``(norms, iterations, residuals)``."""
    if fam.box != f.box or fam.J != f.J:
        raise ValueError("cube family built for a different mesh")
    ew, den = _entry_weights(f, fam, w)
    return kernels.lux_norms(f.flat, fam.cells, ew, fam.indptr, den, phi)


def _single(f: MeshFn, Q: DyadicCube) -> CubeFamily:
    fam = CubeFamily(f.box, f.J, [Q])
    return fam


def lux_norm(f: MeshFn, Q: DyadicCube, phi: YoungFn) -> LuxResult:
    """``||f||_{phi,Q}`` over the clipped cube ``Q ∩ box``.

    >>> from mixmax.mesh import Box
    >>> b = Box(1, 0, (0.0,))
    >>> f = MeshFn(b, 2, [1.0, 0, 0, 0])
    >>> from mixmax.young import Power
    >>> round(lux_norm(f, DyadicCube(0, 0, (0,)), Power(2)).norm, 9)
    0.5
    """
    n, it, res = family_norms(f, _single(f, Q), phi)
    return LuxResult(float(n[0]), int(it[0]), float(res[0]))


def weighted_lux_norm(f: MeshFn, Q: DyadicCube, phi: YoungFn, w: MeshFn) -> LuxResult:
    n, it, res = family_norms(f, _single(f, Q), phi, w)
    return LuxResult(float(n[0]), int(it[0]), float(res[0]))


def defining_average(f: MeshFn, Q: DyadicCube, phi: YoungFn, lam: float, w: MeshFn | None = None) -> float:
    """``(1/w(Q)) int_Q phi(f/lam) w`` with ``w = 1`` by default (compensated sums)."""
    fam = _single(f, Q)
    cells, ov = fam.entries(0)
    wt = ov if w is None else ov * w.flat[cells]
    with np.errstate(over="ignore"):
        terms = np.asarray(phi(f.flat[cells] / lam)) * wt
    return math.fsum(terms) / math.fsum(wt)


def lux_infimum_form(f: MeshFn, Q: DyadicCube, phi: YoungFn, w: MeshFn | None = None) -> float:
    """``inf_tau { tau + (tau/w(Q)) int_Q phi(f/tau) w }``.

    ``h(tau)`` is convex in ``tau`` for convex ``phi``, so a bounded scalar
    search over ``log tau`` in ``[1e-6, 1e6] * norm`` finds the minimum.
    """
    norm = (lux_norm(f, Q, phi) if w is None else weighted_lux_norm(f, Q, phi, w)).norm
    if norm == 0.0:
        return 0.0

    def h(s):
        tau = norm * math.exp(s)
        return tau + tau * defining_average(f, Q, phi, tau, w)

    ln = math.log(1e6)
    res = minimize_scalar(h, bounds=(-ln, ln), method="bounded", options={"xatol": 1e-8})
    return float(min(res.fun, h(0.0)))


def inverse_condition(phi: YoungFn, psi: YoungFn, phi2: YoungFn, t_max: float = 1e8, num: int = 60) -> tuple[float, bool]:
    """Sampled ``sup_{t>=1} psi^{-1}(t) phi2^{-1}(t) / phi^{-1}(t)`` and whether it looks bounded.

    Unbounded means the ratio still grows by more than 1% over the last decade.
    """
    ts = np.geomspace(1.0, t_max, num)
    vals = np.array([gen_inverse(psi, t) * gen_inverse(phi2, t) / gen_inverse(phi, t) for t in ts])
    top = vals[ts >= t_max / 10]
    bounded = bool(top[-1] <= 1.01 * top[0] or np.all(np.diff(top) <= 0))
    return float(vals.max()), bounded


def gen_holder_check(f: MeshFn, g: MeshFn, Q: DyadicCube, phi: YoungFn, psi: YoungFn, phi2: YoungFn) -> CheckResult:
    """``||fg||_{phi,Q} / (||f||_{psi,Q} ||g||_{phi2,Q})`` after checking the inverse condition."""
    const, bounded = inverse_condition(phi, psi, phi2)
    if not bounded:
        warnings.warn("inverse condition psi^-1 * phi2^-1 <~ phi^-1 does not look bounded", RuntimeWarning, stacklevel=2)
    fg = f.with_values(f.values * g.values)
    num = lux_norm(fg, Q, phi).norm
    den = lux_norm(f, Q, psi).norm * lux_norm(g, Q, phi2).norm
    detail = {"inverse_const": const, "inverse_bounded": bounded}
    if den == 0.0:
        return CheckResult(0.0, num == 0.0, detail) if num == 0.0 else CheckResult(math.inf, False, detail)
    return CheckResult(num / den, False, detail)


def jensen_bound(phi: YoungFn, r: float) -> float:
    return (float(phi(1.0)) + 1.0) ** r


def jensen_check(f: MeshFn, Q: DyadicCube, phi: YoungFn, r: float) -> CheckResult:
    """``||f||_{phi,Q}**r / ||f**r||_{phi,Q}``; bounded by ``(phi(1) + 1)**r``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    a = lux_norm(f, Q, phi).norm
    b = lux_norm(f.with_values(f.values**r), Q, phi).norm
    if b == 0.0:
        return CheckResult(0.0, True)
    return CheckResult(a**r / b)


def equivalence_constant(phi: YoungFn, psi: YoungFn, t0: float) -> float:
    """Upper factor ``max{1, phi(t0) + C2}`` with ``C2 = sup_{t >= t0} phi/psi``.

    Bounds ``||f||_phi <= factor * ||f||_psi`` on every cube.
    """
    _, c2 = check_equivalence(phi, psi, t0)
    return max(1.0, float(phi(t0)) + c2)
