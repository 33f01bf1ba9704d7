"""Level-set Calderón–Zygmund decomposition, the Λ/Γ stratification and principal cubes.

Everything runs on a single shifted grid.  With ``g = f v`` and the grid's
Orlicz maximal function ``M g``, stratum ``k`` collects the maximal cubes
``Q_j^k`` of ``{M g > a**k}``.  Each is classified by the average of ``v**r``
(class ``l >= 0`` or ``-1``); class ``-1`` cubes are split again by a CZ
decomposition of ``v**r 1_Q`` at height ``a**(k r)``.  Cubes meeting the band
``{a**k < v <= a**(k+1)}`` are flagged (the Γ families).

On grid 0 every cube lies inside the box, so both sandwich bounds hold
exactly; cubes of shifted grids may be clipped at the box edge and
:meth:`Stratification.verify` then reports, rather than hides, violations.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .luxemburg import family_norms
from .mesh import CubeFamily, DyadicCube, MeshFn, cube_family
from .weights import a1_constant, ainf_pair, averages
from .young import YoungFn

__all__ = [
    "Stratum",
    "Stratification",
    "PrincipalForest",
    "cz_levelset",
    "stratify",
    "sparsity_check",
    "sparsity_bound",
    "principal_cubes",
    "claims_check",
    "decay_fit",
    "export_tree",
]

REL = 1e-9


def _level_groups(fam: CubeFamily) -> list[np.ndarray]:
    return [np.flatnonzero(fam.level == L) for L in sorted(set(fam.level.tolist()), reverse=True)]


def _cz_select(fam: CubeFamily, groups, values: np.ndarray, lam: float, roots: np.ndarray | None = None):
    """Maximal cubes with ``values > lam``; with ``roots``, only strict descendants of a root.

    Returns ``(selected indices, owning root per selected cube or -1)``.
    """
    nq = len(fam)
    sel = np.zeros(nq, dtype=bool)
    blocked = np.zeros(nq, dtype=bool)
    owner = np.full(nq, -1, dtype=np.int64)
    for idx in groups:
        par = fam.parent[idx]
        has = par >= 0
        b = np.ones(len(idx), dtype=bool) if roots is not None else np.zeros(len(idx), dtype=bool)
        if roots is None:
            b[has] = blocked[par[has]] | sel[par[has]]
        else:
            p = par[has]
            under_root = roots[p]
            b[has] = ~(under_root | (~blocked[p] & ~sel[p]))
            owner[idx[has]] = np.where(under_root, p, owner[p])
        blocked[idx] = b
        sel[idx] = ~b & (values[idx] > lam)
    chosen = np.flatnonzero(sel)
    return chosen, owner[chosen]


def _grid_family(f: MeshFn, grid_id: int) -> CubeFamily:
    return cube_family(f.box, f.J, (int(grid_id),))


def cz_levelset(g: MeshFn, phi: YoungFn, grid_id: int, lam: float) -> list[DyadicCube]:
    """Maximal cubes of one grid with ``||g||_{phi,Q} > lam``, largest first."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    fam = _grid_family(g, grid_id)
    norms, _, _ = family_norms(g, fam, phi)
    chosen, _ = _cz_select(fam, _level_groups(fam), norms, lam)
    return [fam.cubes[q] for q in chosen]


def _class_of(avg: float, k: int, a: float, r: float) -> int:
    """``l >= 0`` with ``a**((k+l) r) <= avg < a**((k+l+1) r)``, or ``-1`` if ``avg < a**(k r)``."""
    if avg < a ** (k * r):
        return -1
    ell = max(0, int(math.floor(math.log(avg) / (r * math.log(a)))) - k)
    while a ** ((k + ell + 1) * r) <= avg:
        ell += 1
    while ell > 0 and a ** ((k + ell) * r) > avg:
        ell -= 1
    return ell


@dataclass
class Stratum:
    k: int
    cubes: np.ndarray  # family indices of Q_j^k
    ell: np.ndarray  # class per cube, -1 for the low-average class
    gamma: np.ndarray  # band flag per cube (meaningful for ell >= 0)
    sub_cubes: np.ndarray  # family indices of Q_{j,i}^k
    sub_parent: np.ndarray  # family index of the class -1 cube containing each
    sub_gamma: np.ndarray
    omega: np.ndarray  # flat cell mask of {M g > a**k}
    E: np.ndarray  # flat cell mask of {M g > v} ∩ band


@dataclass
class Stratification:
    f: MeshFn
    v: MeshFn
    r: float
    phi: YoungFn
    a: float
    grid_id: int
    fam: CubeFamily
    norms: np.ndarray
    avg_vr: np.ndarray
    Mg: np.ndarray
    N: int | None
    k_max: int | None
    strata: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.f.box.n

    def counts(self) -> dict:
        return {
            "strata": len(self.strata),
            "N": self.N,
            "k_max": self.k_max,
            "cubes": int(sum(len(s.cubes) for s in self.strata)),
            "sub_cubes": int(sum(len(s.sub_cubes) for s in self.strata)),
            "gamma": int(sum(int(np.sum(s.gamma & (s.ell >= 0))) + int(np.sum(s.sub_gamma)) for s in self.strata)),
        }

    def gamma_entries(self) -> list[tuple[int, int, int]]:
        """``(family index, k, class)`` for every cube of every Γ family (class -1 = sub-cube)."""
        out = []
        for s in self.strata:
            for q, ell, gm in zip(s.cubes, s.ell, s.gamma):
                if ell >= 0 and gm:
                    out.append((int(q), s.k, int(ell)))
            for q, gm in zip(s.sub_cubes, s.sub_gamma):
                if gm:
                    out.append((int(q), s.k, -1))
        return out

    def produced_entries(self) -> list[tuple[int, int, int, int]]:
        """``(family index, k, owner, class)`` for every Q_j^k (owner -1) and Q_{j,i}^k (owner = its Q_j^k, class -1)."""
        out = []
        for s in self.strata:
            out += [(int(q), s.k, -1, int(ell)) for q, ell in zip(s.cubes, s.ell)]
            out += [(int(q), s.k, int(p), -1) for q, p in zip(s.sub_cubes, s.sub_parent)]
        return out

    def verify(self) -> dict[str, int]:
        """Count violations of every stratification invariant (all zero on grid 0)."""
        a, r, n = self.a, self.r, self.n
        fam = self.fam
        viol = defaultdict(int)
        for s in self.strata:
            lam = a**s.k
            union = np.zeros(len(self.Mg), dtype=bool)
            for q in s.cubes:
                union[fam.center_cells(q)] = True
            viol["omega_union"] += int(np.any(union != s.omega))
            nq = self.norms[s.cubes]
            viol["sandwich_g"] += int(np.sum(~(nq > lam * (1 - REL)) | ~(nq <= 2**n * lam * (1 + REL))))
            avg = self.avg_vr[s.sub_cubes]
            h = a ** (s.k * r)
            viol["sandwich_vr"] += int(np.sum(~(avg > h * (1 - REL)) | ~(avg <= 2**n * h * (1 + REL))))
            for q, ell in zip(s.cubes, s.ell):
                viol["class"] += int(_class_of(self.avg_vr[q], s.k, a, r) != ell)
            band = ((self.v.flat > lam) & (self.v.flat <= a * lam)).astype(float)
            bs = kernels.cube_sums(band, fam.cells, fam.overlap, fam.indptr)
            viol["gamma_flag"] += int(np.sum((bs[s.cubes] > 0) != s.gamma))
            viol["gamma_flag"] += int(np.sum((bs[s.sub_cubes] > 0) != s.sub_gamma))
            chosen = set(s.cubes.tolist())
            for q in s.cubes:
                p = fam.parent[q]
                while p >= 0:
                    viol["disjoint"] += int(p in chosen)
                    p = fam.parent[p]
            for q, p in zip(s.sub_cubes, s.sub_parent):
                viol["sub_inside"] += int(not _is_ancestor(fam, p, q))
        viol["nesting_level"] = nesting_violations(self)
        return dict(viol)


def _is_ancestor(fam: CubeFamily, anc: int, q: int) -> bool:
    p = fam.parent[q]
    while p >= 0:
        if p == anc:
            return True
        p = fam.parent[p]
    return False


def nesting_violations(strat: Stratification) -> int:
    """Pairs ``Q(k) ⊊ Q'(t)`` of produced cubes with ``k <= t``.

    Skipped: a sub-cube inside its own parent, and a sub-cube inside a main
    cube of class -1 from another stratum (the ordering argument needs the
    container's ``v**r`` average to reach ``a**(t r)``; such containers are
    never Γ cubes).
    """
    fam = strat.fam
    by_cube = defaultdict(list)
    for q, k, owner, ell in strat.produced_entries():
        by_cube[q].append((k, owner, ell))
    bad = 0
    for q, k, owner, _ in strat.produced_entries():
        p = fam.parent[q]
        while p >= 0:
            for t, p_owner, p_ell in by_cube.get(p, ()):
                is_sub = owner >= 0
                if is_sub and owner == p and t == k:
                    continue
                if is_sub and p_owner < 0 and p_ell == -1:
                    continue
                bad += int(not k > t)
            p = fam.parent[p]
    return bad


def _smallest_k_at_least(x: float, a: float) -> int:
    k = int(math.floor(math.log(x) / math.log(a)))
    while a**k < x:
        k += 1
    while a ** (k - 1) >= x:
        k -= 1
    return k


def stratify(f: MeshFn, v: MeshFn, r: float, phi: YoungFn, a: float = 2.0, N: int | None = None, grid_id: int = 0) -> Stratification:
    """Build every stratum ``k`` in ``[N, k_max]`` of ``g = f v`` on one grid.

    ``N`` defaults to the smallest ``k`` with ``a**k`` at least every
    top-level norm, so no top-level cube is ever selected (on a box that is
    itself a cube this is the smallest ``k`` with ``Omega_k`` not the whole
    box); ``k_max`` is the largest ``k`` with ``Omega_k`` nonempty.
    """
    if a <= 1:
        raise ValueError("a must exceed 1")
    if r < 1:
        raise ValueError("r must be >= 1")
    if not v.is_weight():
        raise ValueError("v must be strictly positive")
    if not f.same_mesh(v):
        raise ValueError("mesh mismatch")
    g = f.with_values(f.values * v.values)
    fam = _grid_family(f, grid_id)
    norms, _, _ = family_norms(g, fam, phi)
    avg_vr = averages(v.flat**r, fam)
    Mg = kernels.scatter_max(len(f.flat), fam.centers, fam.c_indptr, norms)
    st = Stratification(f, v, r, phi, a, int(grid_id), fam, norms, avg_vr, Mg, None, None)
    if Mg.max() <= 0:
        return st
    top = fam.level == fam.level.max()
    st.N = _smallest_k_at_least(max(float(norms[top].max()), float(Mg.min())), a) if N is None else int(N)
    st.k_max = _smallest_k_at_least(float(Mg.max()), a) - 1
    groups = _level_groups(fam)
    vf = v.flat
    for k in range(st.N, st.k_max + 1):
        lam = a**k
        cubes, _ = _cz_select(fam, groups, norms, lam)
        ell = np.array([_class_of(avg_vr[q], k, a, r) for q in cubes], dtype=np.int64)
        band = ((vf > lam) & (vf <= a * lam)).astype(float)
        bsum = kernels.cube_sums(band, fam.cells, fam.overlap, fam.indptr)
        roots = np.zeros(len(fam), dtype=bool)
        roots[cubes[ell == -1]] = True
        if roots.any():
            sub, owner = _cz_select(fam, groups, avg_vr, a ** (k * r), roots)
        else:
            sub, owner = np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        st.strata.append(
            Stratum(
                k=k,
                cubes=cubes,
                ell=ell,
                gamma=bsum[cubes] > 0,
                sub_cubes=sub,
                sub_parent=owner,
                sub_gamma=bsum[sub] > 0,
                omega=Mg > lam,
                E=(Mg > vf) & (band > 0),
            )
        )
    return st


def sparsity_bound(n: int, a: float) -> float:
    return 2**n / (a - 1.0)


def _gamma_forest(strat: Stratification) -> tuple[list[int], dict[int, int]]:
    """Distinct Γ cubes and, for each, its nearest strict Γ ancestor (or -1)."""
    fam = strat.fam
    cubes = sorted({q for q, _, _ in strat.gamma_entries()})
    members = set(cubes)
    up = {}
    for q in cubes:
        p = fam.parent[q]
        while p >= 0 and p not in members:
            p = fam.parent[p]
        up[q] = int(p)
    return cubes, up


def sparsity_check(strat: Stratification) -> float:
    """``max_{Q ∈ Γ} |⋃ strict Γ-subcubes of Q| / |Q|``.

    Cubes of one grid are nested or disjoint, so the union is the disjoint
    union of the maximal strict subcubes.
    """
    cubes, up = _gamma_forest(strat)
    covered = defaultdict(float)
    for q in cubes:
        if up[q] >= 0:
            covered[up[q]] += strat.fam.measure[q]
    ratios = [covered[q] / strat.fam.measure[q] for q in cubes]
    return float(max(ratios, default=0.0))


@dataclass
class PrincipalForest:
    beta: float
    eps: float
    # per class l (l = -1 for sub-cubes): lists of entries (family index, k)
    entries: dict = field(default_factory=dict)
    principal: dict = field(default_factory=dict)  # l -> list of entry positions
    assigned: dict = field(default_factory=dict)  # l -> principal ancestor position per entry
    generator: dict = field(default_factory=dict)  # l -> principal parent position (or -1) per principal entry
    h1: dict = field(default_factory=dict)  # l >= 0 -> MeshFn
    h2: MeshFn | None = None
    avg_u: np.ndarray | None = None
    violations: int = 0

    def chain_lengths(self, fam: CubeFamily, ell: int) -> list[int]:
        """Length of the longest nested chain of principal cubes through each principal cube."""
        pos = self.principal.get(ell, [])
        depth = {}
        gen = self.generator[ell]
        for p in pos:
            d, g = 1, gen[p]
            while g >= 0:
                d += 1
                g = gen[g]
            depth[p] = d
        return list(depth.values())


def principal_cubes(strat: Stratification, u: MeshFn, beta: float | None = None, eps: float | None = None, seed: int = 0) -> PrincipalForest:
    """Principal cubes of every Δ_l and assembled ``h1`` (per ``l >= 0``) and ``h2``.

    A cube becomes principal when its ``u``-average exceeds ``factor`` times
    that of its nearest principal ancestor; ``factor = 2`` for ``l >= 0`` and
    ``a**((k - t) beta r)`` for the sub-cubes.  ``eps`` defaults to the fitted
    A_inf exponent of ``v**r`` and ``beta`` to ``eps / 2``.
    """
    fam = strat.fam
    if not u.is_weight():
        raise ValueError("u must be strictly positive")
    if eps is None:
        vr = strat.v.with_values(strat.v.values**strat.r)
        eps = ainf_pair(vr, fam, 16, seed)[1]
    beta = eps / 2 if beta is None else beta
    if not 0 < beta < eps:
        raise ValueError(f"beta must lie in (0, eps) = (0, {eps})")
    a, r = strat.a, strat.r
    avg_u = averages(u.flat, fam)
    forest = PrincipalForest(beta=beta, eps=eps, avg_u=avg_u)
    per_class = defaultdict(list)
    owner_of = {}
    for s in strat.strata:
        for q, ell, gm in zip(s.cubes, s.ell, s.gamma):
            if ell >= 0 and gm:
                per_class[int(ell)].append((int(q), s.k))
        for q, p, gm in zip(s.sub_cubes, s.sub_parent, s.sub_gamma):
            if gm:
                per_class[-1].append((int(q), s.k))
                owner_of[(int(q), s.k)] = int(p)
    N = len(u.flat)
    for ell, ents in sorted(per_class.items()):
        ents.sort(key=lambda e: (-fam.level[e[0]], e[1]))
        where = defaultdict(list)
        for i, (q, _) in enumerate(ents):
            where[q].append(i)
        assigned = np.full(len(ents), -1, dtype=np.int64)
        generator = np.full(len(ents), -1, dtype=np.int64)
        principal = []
        for i, (q, k) in enumerate(ents):
            same = [j for j in where[q] if j < i]
            if same:
                parent = same[-1]
            else:
                p = fam.parent[q]
                while p >= 0 and p not in where:
                    p = fam.parent[p]
                parent = where[p][-1] if p >= 0 else -1
            if parent < 0:
                assigned[i] = i
                principal.append(i)
                continue
            S = assigned[parent]
            t = ents[S][1]
            factor = 2.0 if ell >= 0 else a ** ((k - t) * beta * r)
            if avg_u[q] > factor * avg_u[ents[S][0]]:
                assigned[i] = i
                generator[i] = S
                principal.append(i)
            else:
                assigned[i] = S
        forest.entries[ell] = ents
        forest.principal[ell] = principal
        forest.assigned[ell] = assigned
        forest.generator[ell] = generator
        h = np.zeros(N)
        for i in principal:
            q, k = ents[i]
            if ell >= 0:
                h[fam.center_cells(q)] += avg_u[q]
            else:
                root = owner_of[(q, k)]
                h[fam.center_cells(root)] += avg_u[q] * fam.measure[q] / fam.measure[root]
        hf = u.with_values(h.reshape(u.values.shape))
        if ell >= 0:
            forest.h1[ell] = hf
        else:
            forest.h2 = hf
        # re-verify both defining conditions
        for i, (q, k) in enumerate(ents):
            S = generator[i] if assigned[i] == i else assigned[i]
            if S < 0:
                continue
            t = ents[S][1]
            factor = 2.0 if ell >= 0 else a ** ((k - t) * beta * r)
            grew = avg_u[q] > factor * avg_u[ents[S][0]]
            forest.violations += int(grew != (assigned[i] == i))
    if forest.h2 is None:
        forest.h2 = u.with_values(np.zeros_like(u.values))
    return forest


def decay_fit(strat: Stratification, u: MeshFn) -> dict:
    """Fit ``u(E_k ∩ Q)/u(Q) <= c1 exp(-c2 l r)`` on the Γ cubes with ``l >= 0``.

    Regresses the log of the per-class maximum ratio on ``l r``; ``c1`` is
    raised so the fitted curve bounds every point.  ``residual`` is the largest
    absolute log deviation from the regression line.
    """
    fam = strat.fam
    best = defaultdict(float)
    for s in strat.strata:
        if not len(s.cubes):
            continue
        uE = kernels.cube_sums(u.flat * s.E, fam.cells, fam.overlap, fam.indptr)
        uQ = kernels.cube_sums(u.flat, fam.cells, fam.overlap, fam.indptr)
        for q, ell, gm in zip(s.cubes, s.ell, s.gamma):
            if ell >= 0 and gm:
                best[int(ell)] = max(best[int(ell)], float(uE[q] / uQ[q]))
    pts = sorted((ell, y) for ell, y in best.items() if y > 0)
    out = {"per_class": {str(l): y for l, y in sorted(best.items())}, "points": len(pts)}
    if not pts:
        return out | {"c1": 0.0, "c2": 0.0, "residual": 0.0}
    x = np.array([l * strat.r for l, _ in pts], dtype=float)
    y = np.log([y for _, y in pts])
    if len(pts) == 1:
        slope, icpt = 0.0, float(y[0])
    else:
        slope, icpt = np.polyfit(x, y, 1)
    dev = y - (icpt + slope * x)
    return out | {"c1": float(math.exp(icpt + max(0.0, dev.max()))), "c2": float(-slope), "residual": float(np.abs(dev).max())}


def claims_check(strat: Stratification, forest: PrincipalForest, u: MeshFn, v: MeshFn, r: float, phi: YoungFn, f: MeshFn) -> dict:
    """Largest observed ratios of the per-cube estimates, plus the decay fit.

    ``main_mass`` and ``low_mass``: ``a**(k r) |Q| / int_Q phi(f) v**r`` over
    the Γ cubes of class ``l >= 0`` and over the class ``-1`` cubes;
    ``h1_over_u`` and ``h2_over_u``: ``max h/u`` for the assembled principal
    sums.  Finite values are the pass condition.
    """
    fam = strat.fam
    a = strat.a
    phif_vr = np.asarray(phi(f.flat)) * v.flat**r
    integ = kernels.cube_sums(phif_vr, fam.cells, fam.overlap, fam.indptr)

    def ratio(qs, k):
        num = a ** (k * r) * fam.measure[qs]
        den = integ[qs]
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)

    c1 = c3 = 0.0
    for s in strat.strata:
        m1 = (s.ell >= 0) & s.gamma
        if m1.any():
            c1 = max(c1, float(ratio(s.cubes[m1], s.k).max()))
        m3 = s.ell == -1
        if m3.any():
            c3 = max(c3, float(ratio(s.cubes[m3], s.k).max()))
    uf = u.flat
    c2 = max((float(np.max(h.flat / uf)) for h in forest.h1.values()), default=0.0)
    c4 = float(np.max(forest.h2.flat / uf))
    a1u = a1_constant(u, fam)
    h1_ok = all(bool(np.all(h.flat <= 2 * a1u * uf * (1 + 1e-12))) for h in forest.h1.values())
    chain_bound = {}
    for ell in forest.h1:
        lens = forest.chain_lengths(fam, ell)
        low = min((forest.avg_u[forest.entries[ell][i][0]] for i in forest.principal[ell] if forest.generator[ell][i] < 0), default=1.0)
        bound = math.log2(max(1.0, a1u * float(uf.max()) / low)) + 2
        chain_bound[str(ell)] = {"longest": max(lens, default=0), "bound": bound, "ok": max(lens, default=0) <= bound}
    return {
        "main_mass": c1,
        "h1_over_u": c2,
        "low_mass": c3,
        "h2_over_u": c4,
        "a1_u": a1u,
        "h1_bound_ok": h1_ok,
        "chains": chain_bound,
        "decay": decay_fit(strat, u),
        "forest_violations": forest.violations,
    }


def export_tree(strat: Stratification, forest: PrincipalForest | None = None) -> str:
    """JSON cube tree: one record per produced cube with its averages and classes."""
    fam = strat.fam
    principal = set()
    if forest is not None:
        for ell, pos in forest.principal.items():
            principal |= {(forest.entries[ell][i][0], forest.entries[ell][i][1], ell) for i in pos}
    recs = []
    for s in strat.strata:
        for q, ell, gm in zip(s.cubes, s.ell, s.gamma):
            recs.append(_record(fam, strat, q, s.k, int(ell), "main", bool(gm), -1, (int(q), s.k, int(ell)) in principal, forest))
        for q, p, gm in zip(s.sub_cubes, s.sub_parent, s.sub_gamma):
            recs.append(_record(fam, strat, q, s.k, -1, "sub", bool(gm), int(p), (int(q), s.k, -1) in principal, forest))
    meta = {"a": strat.a, "r": strat.r, "grid_id": strat.grid_id, "N": strat.N, "k_max": strat.k_max, "phi": strat.phi.to_dict(), "family": fam.describe()}
    return json.dumps({"meta": meta, "cubes": recs}, indent=1, sort_keys=True)


def _record(fam, strat, q, k, ell, kind, gm, owner, principal, forest):
    c = fam.cubes[q]
    p = fam.parent[q]
    rec = {
        "id": int(q),
        "level": c.k,
        "coords": list(c.coords),
        "k": int(k),
        "class": ell,
        "kind": kind,
        "gamma": gm,
        "parent": int(p),
        "owner": owner,
        "norm": float(strat.norms[q]),
        "avg_vr": float(strat.avg_vr[q]),
        "principal": principal,
    }
    if forest is not None and forest.avg_u is not None:
        rec["avg_u"] = float(forest.avg_u[q])
    return rec
