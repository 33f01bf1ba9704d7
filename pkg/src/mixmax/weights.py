"""Muckenhoupt and reverse-Hölder constants over finite cube families, and weight classification.

All constants are maxima over the cubes of a :class:`~mixmax.mesh.CubeFamily`
(clipped averages), so they under-approximate the true suprema.  Membership
verdicts compare estimates across refinements of the mesh (``J -> J+1``) and
of the box (``K -> K+2`` at fixed cell width).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .mesh import Box, CubeFamily, MeshFn, cube_family

AP_EXPONENTS = (1.5, 2.0, 4.0, 8.0)
RH_EXPONENTS = (1.5, 2.0, 4.0)
STABLE = 1.25
GROWING = 2.0
AINF_OBJECTIVE = "maximize eps subject to w(E)/w(Q) <= C (|E|/|Q|)^eps on all samples, C <= 10 * max w(E)/w(Q) at |E|/|Q| ~ 1/2"

__all__ = [
    "WeightReport",
    "averages",
    "ap_constant",
    "a1_constant",
    "rh_constant",
    "ainf_pair",
    "weight_report",
    "classify",
    "verdict",
]


def _family(w: MeshFn, cubes) -> CubeFamily:
    if isinstance(cubes, CubeFamily):
        fam = cubes
    else:
        cubes = list(cubes)
        if not cubes:
            raise ValueError("empty cube list")
        fam = CubeFamily(w.box, w.J, cubes)
    if len(fam) == 0:
        raise ValueError("empty cube list")
    if not w.is_weight():
        raise ValueError("weights must be strictly positive")
    return fam


def averages(vals: np.ndarray, fam: CubeFamily) -> np.ndarray:
    """Clipped averages ``(1/|Q ∩ box|) int_Q vals`` for every cube."""
    return kernels.cube_sums(vals, fam.cells, fam.overlap, fam.indptr) / fam.measure


def ap_constant(w: MeshFn, p: float, cubes) -> float:
    """``max_Q (avg_Q w) (avg_Q w**(1-p'))**(p-1)``."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    fam = _family(w, cubes)
    pp = p / (p - 1.0)
    a = averages(w.flat, fam)
    b = averages(w.flat ** (1.0 - pp), fam)
    return float(np.max(a * b ** (p - 1.0)))


def a1_constant(w: MeshFn, cubes) -> float:
    """``max_Q avg_Q w / essinf_Q w``."""
    fam = _family(w, cubes)
    return float(np.max(averages(w.flat, fam) / kernels.cube_mins(w.flat, fam.cells, fam.indptr)))


def rh_constant(w: MeshFn, s: float, cubes) -> float:
    """``max_Q (avg_Q w**s)**(1/s) / avg_Q w``."""
    if s <= 1:
        raise ValueError("s must exceed 1")
    fam = _family(w, cubes)
    return float(np.max(averages(w.flat**s, fam) ** (1.0 / s) / averages(w.flat, fam)))


def _children(fam: CubeFamily) -> list[list[int]]:
    kids: list[list[int]] = [[] for _ in range(len(fam))]
    for q, p in enumerate(fam.parent):
        if p >= 0:
            kids[p].append(q)
    return kids


def _subset_samples(fam: CubeFamily, q: int, w: np.ndarray, kids, m: int, rng) -> list[tuple[float, float]]:
    """``(|E|/|Q|, w(E)/w(Q))`` for ``m`` sampled ``E ⊆ Q``."""
    cells, ov = fam.entries(q)
    wq = ov * w[cells]
    tot_m, tot_w = math.fsum(ov), math.fsum(wq)
    out = [(1.0, 1.0)]

    def add(idx):
        if 0 < len(idx) < len(cells):
            out.append((math.fsum(ov[idx]) / tot_m, math.fsum(wq[idx]) / tot_w))

    n_union = max(2, m // 3)
    n_desc = max(2, m // 3)
    n_level = max(2, m - n_union - n_desc)
    # random unions, the first ones grown to half the measure
    for j in range(n_union):
        perm = rng.permutation(len(cells))
        if j < 2:
            k = int(np.searchsorted(np.cumsum(ov[perm]), 0.5 * tot_m - 1e-12)) + 1
        else:
            k = int(rng.integers(1, len(cells)))
        add(perm[:k])
    # dyadic descendants along random downward paths
    got = 0
    while got < n_desc and kids[q]:
        node = q
        while kids[node] and got < n_desc:
            node = kids[node][int(rng.integers(len(kids[node])))]
            dc, dov = fam.entries(node)
            out.append((math.fsum(dov) / tot_m, math.fsum(dov * w[dc]) / tot_w))
            got += 1
    # sub- and superlevel sets of w
    order = np.argsort(w[cells], kind="stable")
    sizes = np.unique(np.geomspace(1, max(1, len(cells) - 1), max(1, n_level // 2)).astype(int))
    for k in sizes:
        add(order[:k])
        add(order[::-1][:k])
    return out


def ainf_pair(w: MeshFn, cubes, subsets_per_cube: int = 16, rng_seed: int = 0) -> tuple[float, float]:
    """Fit ``(C, eps)`` with ``w(E)/w(Q) <= C (|E|/|Q|)**eps`` on sampled subsets.

    Subsets are random cell unions, dyadic descendants and level sets of ``w``.
    Among admissible pairs with ``C`` at most ten times the largest ratio seen
    at ``|E|/|Q|`` near one half, the largest ``eps`` (capped at 1) is kept and
    ``C`` is then tightened.  Each cube draws from its own generator seeded by
    ``(rng_seed, cube index)``.
    """
    if subsets_per_cube < 8:
        raise ValueError("subsets_per_cube must be >= 8")
    fam = _family(w, cubes)
    kids = _children(fam)
    wv = w.flat
    xs, ys = [], []
    for q in range(len(fam)):
        if fam.indptr[q + 1] - fam.indptr[q] < 2:
            continue
        rng = np.random.default_rng([rng_seed, q])
        for x, y in _subset_samples(fam, q, wv, kids, subsets_per_cube, rng):
            xs.append(x)
            ys.append(y)
    if not xs:
        return 1.0, 1.0
    x, y = np.array(xs), np.array(ys)
    near_half = np.abs(x - 0.5) <= 0.05
    y_half = y[near_half].max() if near_half.any() else y[x <= 0.55].max(initial=0.5)
    cap = 10.0 * max(y_half, 0.5)
    small = x < 1.0 - 1e-12
    eps = 1.0
    if small.any():
        eps = float(min(1.0, np.min((math.log(cap) - np.log(y[small])) / (-np.log(x[small])))))
    C = float(np.max(y / x**eps))
    return max(C, 1.0), eps


@dataclass
class WeightReport:
    ap_constants: dict
    a1_constant: float
    ainf_pair: tuple
    rh_constants: dict
    verdicts: dict = field(default_factory=dict)
    family: dict = field(default_factory=dict)
    ainf_objective: str = AINF_OBJECTIVE
    trend: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ap_constants"] = {str(k): v for k, v in self.ap_constants.items()}
        d["rh_constants"] = {str(k): v for k, v in self.rh_constants.items()}
        d["ainf_pair"] = {"C": self.ainf_pair[0], "eps": self.ainf_pair[1]}
        return d

    def table(self) -> str:
        rows = [("A1", self.a1_constant, self.verdicts.get("A1", ""))]
        rows += [(f"A_{p:g}", c, self.verdicts.get(f"A_{p:g}", "")) for p, c in self.ap_constants.items()]
        rows += [("A_inf C", self.ainf_pair[0], self.verdicts.get("A_inf", "")), ("A_inf eps", self.ainf_pair[1], "")]
        rows += [(f"RH_{s:g}", c, self.verdicts.get(f"RH_{s:g}", "")) for s, c in self.rh_constants.items()]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {val:>14.6g}  {v}" for name, val, v in rows)


def weight_report(w: MeshFn, fam: CubeFamily | None = None, seed: int = 0, subsets_per_cube: int = 16) -> WeightReport:
    """All constants of ``w`` over ``fam`` (default: every cube of all grids)."""
    fam = cube_family(w.box, w.J) if fam is None else fam
    fam = _family(w, fam)
    return WeightReport(
        ap_constants={p: ap_constant(w, p, fam) for p in AP_EXPONENTS},
        a1_constant=a1_constant(w, fam),
        ainf_pair=ainf_pair(w, fam, subsets_per_cube, seed),
        rh_constants={s: rh_constant(w, s, fam) for s in RH_EXPONENTS},
        family=fam.describe(),
    )


def verdict(growths) -> str:
    """``member`` if every growth factor is within 25%, ``non-member`` if any exceeds 2x."""
    g = [float(x) for x in growths]
    if any(not math.isfinite(x) or x > GROWING for x in g):
        return "non-member"
    if all(1.0 / STABLE <= x <= STABLE for x in g):
        return "member"
    return "inconclusive"


def classify(make, box: Box, J: int, seed: int = 0, subsets_per_cube: int = 16) -> WeightReport:
    """Report at ``(K, J)`` with verdicts from the ``(K, J+1)`` and ``(K+2, J+2)`` trends.

    ``make(box, J)`` builds the weight on a mesh.  The A_inf verdict combines
    the trend of ``[w]_{A_8}`` with the trend of ``1/eps``.
    """
    big = Box(box.n, box.K + 2, tuple(o * 4 for o in box.origin))
    meshes = [(box, J), (box, J + 1), (big, J + 2)]
    reps = [weight_report(make(b, j), seed=seed, subsets_per_cube=subsets_per_cube) for b, j in meshes]
    base = reps[0]

    def growth(get):
        v0 = get(base)
        return [get(r) / v0 for r in reps[1:]]

    verdicts = {"A1": verdict(growth(lambda r: r.a1_constant))}
    for p in AP_EXPONENTS:
        verdicts[f"A_{p:g}"] = verdict(growth(lambda r, p=p: r.ap_constants[p]))
    for s in RH_EXPONENTS:
        verdicts[f"RH_{s:g}"] = verdict(growth(lambda r, s=s: r.rh_constants[s]))
    pmax = max(AP_EXPONENTS)
    verdicts["A_inf"] = verdict(growth(lambda r: r.ap_constants[pmax]) + growth(lambda r: 1.0 / r.ainf_pair[1]))
    base.verdicts = verdicts
    base.trend = {
        "meshes": [{"K": b.K, "J": j} for b, j in meshes],
        "a1": [r.a1_constant for r in reps],
        "ap_max": [r.ap_constants[pmax] for r in reps],
        "inv_eps": [1.0 / r.ainf_pair[1] for r in reps],
    }
    return base
