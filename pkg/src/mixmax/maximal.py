"""Orlicz and fractional maximal operators on meshes, plus pointwise-estimate checks.

``M_{gamma,phi} f(x) = sup_{Q ∋ x} |Q|^{gamma/n} ||f||_{phi,Q}`` where ``Q``
ranges over the cubes of one shifted grid or all ``3**n`` of them, at levels
between the cell size and the box size, and ``x`` is a cell center.  Every
cube's norm is computed once and then max-scattered onto the cells whose
centers it contains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .luxemburg import family_norms
from .mesh import CubeFamily, MeshFn, anchored_family, cube_family, pointwise_map
from .young import LLogL, YoungFn, thm3_params, thm4_params

__all__ = [
    "MaximalField",
    "scope_grids",
    "maximal_field",
    "maximal",
    "field_over",
    "dyadic_control_check",
    "hedberg_xi",
    "hedberg_check",
    "xi_eta_check",
    "sup_ratio",
]


@dataclass(frozen=True)
class MaximalField:
    phi: YoungFn
    gamma: float
    scope: str
    input: MeshFn
    output: MeshFn


def scope_grids(n: int, scope) -> tuple[int, ...] | None:
    """``"all"`` → every grid, ``"grid0"`` → the standard grid, an int → that grid."""
    if scope == "all":
        return None
    if scope == "grid0":
        return (0,)
    if isinstance(scope, (int, np.integer)) and 0 <= scope < 3**n:
        return (int(scope),)
    raise ValueError(f"unknown scope {scope!r}")


def field_over(f: MeshFn, fam: CubeFamily, phi: YoungFn, gamma: float = 0.0) -> MeshFn:
    """Maximal field of ``f`` over an explicit cube family."""
    n = f.box.n
    if not 0.0 <= gamma < n:
        raise ValueError("gamma must lie in [0, n)")
    norms, _, _ = family_norms(f, fam, phi)
    if gamma:
        norms = norms * fam.volume ** (gamma / n)
    out = kernels.scatter_max(f.N**n, fam.centers, fam.c_indptr, norms)
    return f.with_values(out.reshape(f.values.shape))


def maximal_field(f: MeshFn, phi: YoungFn, gamma: float = 0.0, scope="all") -> MeshFn:
    """Cellwise ``max_{Q ∋ center} |Q ∩ box|**(gamma/n) ||f||_{phi,Q}``."""
    fam = cube_family(f.box, f.J, scope_grids(f.box.n, scope))
    return field_over(f, fam, phi, gamma)


def maximal(f: MeshFn, phi: YoungFn, gamma: float = 0.0, scope="all") -> MaximalField:
    return MaximalField(phi, gamma, str(scope), f, maximal_field(f, phi, gamma, scope))


def sup_ratio(num: np.ndarray, den: np.ndarray) -> tuple[float, bool]:
    """``max num/den`` with ``0/0`` counted as 0; the flag says whether any 0/0 occurred."""
    num, den = np.asarray(num, float).ravel(), np.asarray(den, float).ravel()
    zz = (num == 0) & (den == 0)
    if np.any((num > 0) & (den == 0)):
        return math.inf, bool(zz.any())
    ok = den > 0
    val = float(np.max(num[ok] / den[ok])) if ok.any() else 0.0
    return max(val, 0.0), bool(zz.any())


def dyadic_control_check(f: MeshFn, phi: YoungFn) -> float:
    """``sup_x M^{anchored}_phi f(x) / sum_i M_{phi,D_i} f(x)``.

    The numerator ranges over every cube of dyadic side whose corner is a mesh
    node (a surrogate for arbitrary cubes).
    """
    top = field_over(f, anchored_family(f.box, f.J), phi)
    total = np.zeros_like(f.values)
    for g in range(3**f.box.n):
        total = total + maximal_field(f, phi, 0.0, g).values
    return sup_ratio(top.values, total)[0]


def hedberg_xi(n: int, r: float, delta: float, gamma: float, p: float) -> tuple[YoungFn, float]:
    """``(xi, q)`` for the pointwise estimate; ``p == r`` uses ``LLogL(q, delta q / r)``."""
    if p == r:
        t4 = thm4_params(n, r, delta, gamma)
        return t4.xi, t4.q
    t3 = thm3_params(n, r, delta, gamma, p)
    return t3.xi, t3.q


def hedberg_check(f: MeshFn, w: MeshFn, n: int, r: float, delta: float, gamma: float, p: float, scope="all") -> float:
    """``sup_x M_{gamma,phi}(f/w)(x) / (M_xi(f^{p/q}/w)(x) (int f^p)^{gamma/n})`` with ``phi = LLogL(r, delta)``."""
    if not 1 <= p < n / gamma:
        raise ValueError("need 1 <= p < n/gamma")
    if n != f.box.n:
        raise ValueError("dimension mismatch")
    xi, q = hedberg_xi(n, r, delta, gamma, p)
    inv_w = pointwise_map(w, -1.0)
    lhs = maximal_field(pointwise_map(f, inv_w), LLogL(r, delta), gamma, scope)
    mid = maximal_field(pointwise_map(pointwise_map(f, p / q), inv_w), xi, 0.0, scope)
    mass = pointwise_map(f, p).total()
    return sup_ratio(lhs.values, mid.values * mass ** (gamma / n))[0]


def xi_eta_check(v: MeshFn, n: int, r: float, delta: float, gamma: float, p: float, scope="all") -> float:
    """``sup_x (M_xi v^beta)^{1/beta} / M_eta v`` for the exponent ``beta`` of the fractional setting."""
    t3 = thm3_params(n, r, delta, gamma, p)
    top = maximal_field(pointwise_map(v, t3.beta), t3.xi, 0.0, scope).values ** (1.0 / t3.beta)
    bot = maximal_field(v, t3.eta, 0.0, scope).values
    return sup_ratio(top, bot)[0]
