"""Sweep harness for the mixed weak-type inequalities.

Every variant computes, along a geometric sweep of levels ``t``, a left-hand
side (the ``u v**r``-type measure of a superlevel set of a quotient of
maximal fields) and a right-hand side (a modular integral of ``f/t``), then
reports ``sup_t LHS/RHS`` together with its relative change when the mesh is
refined (``J -> J+1``) and when the box grows (``K -> K+2`` at the same cell
width, with ``f`` fixed in physical space).
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .catalog import make_function, make_weight, resolve_function
from .maximal import maximal_field
from .mesh import Box, MeshFn, pointwise_map
from .weights import classify
from .young import NotInFrError, Power, YoungFn, certify_Fr, equivalent_at_infinity, thm3_params, thm4_params, young_from_dict

__all__ = [
    "VARIANTS",
    "STABILITY",
    "PreconditionError",
    "MixedExperiment",
    "RatioReport",
    "ModularResult",
    "t_sweep",
    "build_experiment",
    "evaluate",
    "verify_theorem1",
    "verify_strong_form",
    "verify_sawyer",
    "verify_corollary",
    "verify_theorem3",
    "verify_theorem4",
    "verify_modular_lemma",
    "modular_check",
    "support_threshold_operator",
    "run_experiment",
    "run_experiments",
    "refinement_meshes",
]

VARIANTS = ("theorem1", "strong_form", "sawyer", "corollary", "theorem3", "theorem4", "modular_lemma")
STABILITY = 0.25
COROLLARY_C2 = (1.0, 2.0, 4.0, 8.0)
LINF_SLACK = 1e-8
EXPERIMENT_KEYS = {"name", "variant", "u", "v", "f", "r", "phi", "psi", "params", "sweep", "scope", "ceiling", "refine", "check_preconditions"}
SWEEP_KEYS = {"t_min", "t_max", "count", "relative"}
PARAM_KEYS = {"theorem3": {"delta", "gamma", "p"}, "theorem4": {"delta", "gamma"}}


class PreconditionError(RuntimeError):
    """A hypothesis of the inequality failed; ``report`` holds the evidence."""

    def __init__(self, reason: str, message: str, report: dict | None = None):
        super().__init__(message)
        self.reason = reason
        self.report = report or {}


@dataclass
class MixedExperiment:
    variant: str
    u: MeshFn
    v: MeshFn
    f: MeshFn
    r: float
    phi: YoungFn
    t_sweep: np.ndarray
    psi: YoungFn | None = None
    params: dict = field(default_factory=dict)
    scope: object = "all"
    name: str = ""

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        t = np.asarray(self.t_sweep, dtype=float)
        if t.size and (np.any(t <= 0) or np.any(np.diff(t) <= 0)):
            raise ValueError("t_sweep must be positive and increasing")
        self.t_sweep = t
        if not (self.u.is_weight() and self.v.is_weight()):
            raise ValueError("u and v must be strictly positive")
        if not (self.u.same_mesh(self.v) and self.u.same_mesh(self.f)):
            raise ValueError("u, v and f must live on the same mesh")
        if self.r < 1:
            raise ValueError("r must be >= 1")


@dataclass
class RatioReport:
    name: str
    variant: str
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    clamped: np.ndarray
    sup_ratio: float
    refinement_deltas: dict = field(default_factory=dict)
    sup_by_mesh: dict = field(default_factory=dict)
    passed: bool = True
    ceiling: float | None = None
    reasons: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def ratio(self) -> np.ndarray:
        """``LHS/RHS`` with NaN where both sides vanish (row omitted)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.lhs / self.rhs
        out[(self.lhs == 0) & (self.rhs == 0)] = np.nan
        return out

    def rows(self) -> list[dict]:
        return [
            {"t": float(t), "lhs": float(a), "rhs": float(b), "ratio": None if math.isnan(q) else float(q), "clamped": bool(c)}
            for t, a, b, q, c in zip(self.t, self.lhs, self.rhs, self.ratio, self.clamped)
        ]

    def to_csv(self) -> str:
        """RFC-4180 text, one row per ``t``; an omitted ratio is an empty field."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["t", "lhs", "rhs", "ratio", "clamped"])
        for row in self.rows():
            q = "" if row["ratio"] is None else _num(row["ratio"])
            w.writerow([_num(row["t"]), _num(row["lhs"]), _num(row["rhs"]), q, int(row["clamped"])])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "name": self.name,
            "variant": self.variant,
            "sup_ratio": _json_num(self.sup_ratio),
            "refinement_deltas": {k: _json_num(v) for k, v in self.refinement_deltas.items()},
            "sup_by_mesh": {k: _json_num(v) for k, v in self.sup_by_mesh.items()},
            "pass": self.passed,
            "ceiling": self.ceiling,
            "reasons": list(self.reasons),
            "rows": len(self.t),
            "clamped_rows": int(np.count_nonzero(self.clamped)),
            "info": _jsonable(self.info),
        }


def _num(x: float) -> str:
    return "%.17g" % x


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return _json_num(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, YoungFn):
        return obj.to_dict()
    return obj


def t_sweep(fmax: float, t_min: float = 1e-3, t_max: float = 1e3, count: int = 48, relative: bool = True) -> np.ndarray:
    """Geometric levels ``[t_min, t_max]``, scaled by ``fmax`` when relative (and ``fmax > 0``)."""
    if count < 0 or not 0 < t_min <= t_max:
        raise ValueError("need count >= 0 and 0 < t_min <= t_max")
    if count == 0:
        return np.empty(0)
    scale = fmax if relative and fmax > 0 else 1.0
    return np.geomspace(t_min, t_max, count) * scale


def _measure(vals: np.ndarray, mask: np.ndarray | None, cell_volume: float) -> float:
    sel = vals if mask is None else vals[mask]
    return math.fsum(sel.ravel()) * cell_volume


def _superlevel_measures(quot: np.ndarray, mu: np.ndarray, ts: np.ndarray, cell_volume: float) -> np.ndarray:
    return np.array([_measure(mu, quot > t, cell_volume) for t in ts])


def _modular(phi: YoungFn, f: np.ndarray, weight: np.ndarray, ts: np.ndarray, cell_volume: float, scale: float = 1.0) -> np.ndarray:
    out = np.empty(len(ts))
    for i, t in enumerate(ts):
        with np.errstate(over="ignore"):
            out[i] = math.fsum((np.asarray(phi(scale * f / t)) * weight).ravel()) * cell_volume
    return out


def _quotient(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return num / den


def _maximal_quotient(exp: MixedExperiment, phi: YoungFn, denominator: str) -> np.ndarray:
    fv = pointwise_map(exp.f, exp.v)
    num = maximal_field(fv, phi, 0.0, exp.scope).values
    den = exp.v.values if denominator == "v" else maximal_field(exp.v, phi, 0.0, exp.scope).values
    return _quotient(num, den)


def _mixed_measure(exp: MixedExperiment, power: float) -> np.ndarray:
    return exp.u.values * exp.v.values**power


def _linf_contract(exp: MixedExperiment, quot: np.ndarray) -> float:
    fmax = float(exp.f.values.max())
    top = float(quot.max())
    return 0.0 if top == 0 else (math.inf if fmax == 0 else top / fmax)


def evaluate(exp: MixedExperiment, ceiling: float | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    """``(LHS, RHS, clamped, info)`` along ``exp.t_sweep`` for the experiment's variant.

    ``ceiling`` only matters for the corollary, where it selects ``C2``.
    """
    ts = exp.t_sweep
    vol = exp.f.cell_volume
    f = exp.f.values
    clamped = np.zeros(len(ts), dtype=bool)
    info: dict = {}
    v = exp.variant
    if v in ("theorem1", "strong_form", "sawyer"):
        phi = Power(1.0) if v == "sawyer" else exp.phi
        r = 1.0 if v == "sawyer" else exp.r
        quot = _maximal_quotient(exp, phi, "M" if v == "theorem1" else "v")
        mu = _mixed_measure(exp, r)
        return _superlevel_measures(quot, mu, ts, vol), _modular(phi, f, mu, ts, vol), clamped, info
    if v == "corollary":
        psi = exp.psi if exp.psi is not None else exp.phi
        quot = _maximal_quotient(exp, psi, "M")
        info["linf_ratio"] = _linf_contract(exp, quot)
        mu = _mixed_measure(exp, exp.r)
        lhs = _superlevel_measures(quot, mu, ts, vol)
        # smallest C2 whose sweep holds (finite, under the ceiling if any);
        # otherwise the one with the smallest C1
        best = None
        for c2 in COROLLARY_C2:
            rhs = _modular(psi, f, mu, ts, vol, c2)
            s = _sup(lhs, rhs)
            if math.isfinite(s) and (ceiling is None or s <= ceiling):
                best = (s, c2, rhs)
                break
            if best is None or s < best[0]:
                best = (s, c2, rhs)
        info["C2"] = best[1]
        info["C1"] = best[0]
        return lhs, best[2], clamped, info
    n = exp.f.box.n
    p3 = exp.params
    if v == "theorem3":
        t3 = thm3_params(n, exp.r, p3.get("delta", 0.0), p3["gamma"], p3["p"])
        info.update(q=t3.q, weight_exponent=t3.weight_exponent, eta=t3.eta.to_dict())
        num = maximal_field(pointwise_map(exp.f, exp.v), t3.phi, p3["gamma"], exp.scope).values
        den = maximal_field(exp.v, t3.eta, 0.0, exp.scope).values
        mu = _mixed_measure(exp, t3.weight_exponent)
        lhs = _superlevel_measures(num / den, mu, ts, vol) ** (1.0 / t3.q)
        rw = exp.u.values ** (t3.p / t3.q) * exp.v.values ** (1.0 + t3.p * t3.inv_r_prime)
        rhs = _modular(Power(t3.p), f, rw, ts, vol) ** (1.0 / t3.p)
        return lhs, rhs, clamped, info
    if v == "theorem4":
        t4 = thm4_params(n, exp.r, p3.get("delta", 0.0), p3["gamma"])
        info.update(q=t4.q, eta=t4.eta.to_dict(), phi_mod=t4.phi_mod.to_dict())
        num = maximal_field(pointwise_map(exp.f, exp.v), t4.phi, p3["gamma"], exp.scope).values
        den = maximal_field(exp.v, t4.eta, 0.0, exp.scope).values
        lhs = _superlevel_measures(num / den, _mixed_measure(exp, t4.q), ts, vol)
        with np.errstate(over="ignore"):
            w = np.asarray(t4.psi_w(exp.u.values ** (1.0 / t4.q) * exp.v.values))
        inner = _modular(t4.phi_gamma, f, w, ts, vol)
        with np.errstate(over="ignore"):
            rhs = np.asarray(t4.phi_mod(inner), dtype=float)
        clamped = ~np.isfinite(rhs)
        rhs = np.where(clamped, sys.float_info.max, rhs)
        return lhs, rhs, clamped, info
    raise ValueError(f"variant {v!r} is not a ratio sweep; use modular_check")


def _sup(lhs: np.ndarray, rhs: np.ndarray) -> float:
    if np.any((lhs > 0) & (rhs == 0)):
        return math.inf
    ok = rhs > 0
    return float(np.max(lhs[ok] / rhs[ok])) if ok.any() else 0.0


def _nonincreasing(x: np.ndarray) -> bool:
    return bool(np.all(np.diff(x) <= 0))


def _report(exp: MixedExperiment, ceiling: float | None = None) -> RatioReport:
    lhs, rhs, clamped, info = evaluate(exp, ceiling)
    rep = RatioReport(exp.name, exp.variant, exp.t_sweep, lhs, rhs, clamped, _sup(lhs, rhs), ceiling=ceiling, info=info)
    if np.any((lhs > 0) & (rhs == 0)):
        rep.reasons.append("rhs_zero_with_positive_lhs")
    if not (_nonincreasing(lhs) and _nonincreasing(rhs)):
        rep.reasons.append("non_monotone")
    if not math.isfinite(rep.sup_ratio):
        rep.reasons.append("infinite_ratio")
    if exp.variant == "corollary" and info["linf_ratio"] > 1.0 + LINF_SLACK:
        rep.reasons.append("linf_contract")
    if ceiling is not None and rep.sup_ratio > ceiling:
        rep.reasons.append("ceiling_exceeded")
    rep.passed = not rep.reasons
    return rep


def verify_theorem1(exp: MixedExperiment, ceiling: float | None = None) -> RatioReport:
    """``uv^r({M_phi(fv)/M_phi v > t})`` against ``int phi(f/t) u v^r``."""
    return _report(_as_variant(exp, "theorem1"), ceiling)


def verify_strong_form(exp: MixedExperiment, ceiling: float | None = None) -> RatioReport:
    """As :func:`verify_theorem1` with denominator ``v``."""
    return _report(_as_variant(exp, "strong_form"), ceiling)


def verify_sawyer(exp: MixedExperiment, ceiling: float | None = None) -> RatioReport:
    """``uv({M(fv)/v > t})`` against ``(1/t) int f u v``."""
    return _report(_as_variant(exp, "sawyer"), ceiling)


def verify_corollary(exp: MixedExperiment, ceiling: float | None = None) -> RatioReport:
    """Sweep with ``psi`` in place of ``phi`` and ``f`` scaled by ``C2``.

    ``C2`` is the smallest of ``{1, 2, 4, 8}`` whose sweep is finite and under
    ``ceiling`` (when given); the resulting sup is reported as ``C1``.
    """
    return _report(_as_variant(exp, "corollary"), ceiling)


def verify_theorem3(exp: MixedExperiment, ceiling: float | None = None) -> RatioReport:
    return _report(_as_variant(exp, "theorem3"), ceiling)


def verify_theorem4(exp: MixedExperiment, ceiling: float | None = None) -> RatioReport:
    return _report(_as_variant(exp, "theorem4"), ceiling)


def _as_variant(exp: MixedExperiment, variant: str) -> MixedExperiment:
    if exp.variant == variant:
        return exp
    return MixedExperiment(variant, exp.u, exp.v, exp.f, exp.r, exp.phi, exp.t_sweep, exp.psi, exp.params, exp.scope, exp.name)


# ---------------------------------------------------------------- modular lemma


@dataclass
class ModularResult:
    passed: bool
    C: float
    c: float
    C0: float
    t: np.ndarray
    lhs: np.ndarray
    restricted_rhs: np.ndarray
    violations: int = 0

    def __bool__(self) -> bool:
        return self.passed


def verify_modular_lemma(
    T: Callable[[MeshFn], np.ndarray],
    f: MeshFn,
    mu: np.ndarray,
    phi: YoungFn,
    ts: np.ndarray,
    C0: float = 1.0,
    c: float = 1.0,
    rtol: float = 1e-9,
) -> ModularResult:
    """Check the truncated weak modular bound for a candidate operator ``T``.

    The weak constant ``C`` is measured first: the largest ratio
    ``mu({Tg > s}) / int phi(c g/s) dmu`` over ``g = f`` at every ``s`` and over
    the truncations ``g = f 1_{f > t/(2 C0)}`` at ``s = t/2``.  The check then
    requires ``mu({Tf > t}) <= C int_{f > t/(2 C0)} phi(2 c f/t) dmu`` at every
    ``t``, which holds whenever ``T`` is sub-additive with ``||Tg||_inf <= C0 ||g||_inf``.
    """
    ts = np.asarray(ts, dtype=float)
    vol = f.cell_volume
    fv = f.values
    tf = np.asarray(T(f))
    lhs = _superlevel_measures(tf, mu, ts, vol)
    C = _sup(lhs, _modular(phi, fv, mu, ts, vol, c))
    restricted = np.empty(len(ts))
    for i, t in enumerate(ts):
        keep = fv > t / (2.0 * C0)
        if not keep.any():
            restricted[i] = 0.0
            continue
        g = f.with_values(np.where(keep, fv, 0.0))
        lg = _measure(mu, np.asarray(T(g)) > t / 2.0, vol)
        C = max(C, _sup(np.array([lg]), _modular(phi, g.values, mu, np.array([t / 2.0]), vol, c)))
        with np.errstate(over="ignore"):
            restricted[i] = math.fsum((np.asarray(phi(2.0 * c * fv[keep] / t)) * mu[keep]).ravel()) * vol
    bound = C * restricted
    bad = lhs > bound * (1.0 + rtol)
    return ModularResult(not bad.any(), C, c, C0, ts, lhs, bound, int(bad.sum()))


def modular_check(exp: MixedExperiment) -> ModularResult:
    """:func:`verify_modular_lemma` for ``T f = M_psi(f v)/M_psi v`` against ``u v^r``."""
    psi = exp.psi if exp.psi is not None else exp.phi
    den = maximal_field(exp.v, psi, 0.0, exp.scope).values

    def T(g: MeshFn) -> np.ndarray:
        return maximal_field(pointwise_map(g, exp.v), psi, 0.0, exp.scope).values / den

    return verify_modular_lemma(T, exp.f, _mixed_measure(exp, exp.r), psi, exp.t_sweep)


def support_threshold_operator(fraction: float = 0.5) -> Callable[[MeshFn], np.ndarray]:
    """``T g = max g`` everywhere when ``g > 0`` on at least ``fraction`` of the cells, else 0.

    Bounded on ``L^inf`` with constant 1 but not sub-additive: two functions
    with small supports can add up to one with a large support.
    """

    def T(g: MeshFn) -> np.ndarray:
        on = np.count_nonzero(g.values > 0) >= fraction * g.values.size
        return np.full(g.values.shape, float(g.values.max()) if on else 0.0)

    return T


# ---------------------------------------------------------------- configs and runs


def _check_keys(d: dict, allowed: set, what: str):
    extra = set(d) - allowed
    if extra:
        raise ValueError(f"unknown keys in {what}: {sorted(extra)}")


def refinement_meshes(box: Box, J: int) -> dict[str, tuple[Box, int]]:
    big = Box(box.n, box.K + 2, tuple(o * 4 for o in box.origin))
    return {"base": (box, J), "J+1": (box, J + 1), "K+2": (big, J + 2)}


def build_experiment(entry: dict, box: Box, J: int, resolved_f: dict | None = None, seed: int = 0) -> MixedExperiment:
    """Instantiate a config entry on the mesh ``(box, J)``.

    ``resolved_f`` is the function descriptor after random draws; pass the
    same one for every mesh so that ``f`` stays fixed in physical space.
    """
    _check_keys(entry, EXPERIMENT_KEYS, "experiment")
    variant = entry.get("variant")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    params = dict(entry.get("params", {}))
    _check_keys(params, PARAM_KEYS.get(variant, set()), f"{variant} params")
    if variant in PARAM_KEYS and "gamma" not in params:
        raise ValueError(f"{variant} needs params.gamma")
    if variant == "theorem3" and "p" not in params:
        raise ValueError("theorem3 needs params.p")
    sweep = dict(entry.get("sweep", {}))
    _check_keys(sweep, SWEEP_KEYS, "sweep")
    if resolved_f is None:
        resolved_f = resolve_function(entry.get("f", {"kind": "zero"}), box, np.random.default_rng(seed))
    f = make_function(resolved_f, box, J)
    u = make_weight(entry.get("u", {"kind": "constant", "c": 1}), box, J)
    v = make_weight(entry.get("v", {"kind": "constant", "c": 1}), box, J)
    r = float(entry.get("r", 1.0))
    phi = young_from_dict(entry.get("phi", {"kind": "llogl", "r": r, "delta": 1.0}))
    psi = young_from_dict(entry["psi"]) if "psi" in entry else None
    ts = t_sweep(float(f.values.max()), **sweep)
    return MixedExperiment(variant, u, v, f, r, phi, ts, psi, params, entry.get("scope", "all"), entry.get("name", variant))


@lru_cache(maxsize=64)
def _cached_verdicts(desc_json: str, power: float, n: int, K: int, origin: tuple, J: int, seed: int) -> dict:
    desc = json.loads(desc_json)
    rep = classify(lambda b, j: pointwise_map(make_weight(desc, b, j), power), Box(n, K, origin), J, seed=seed)
    return rep.to_dict()


def _weight_verdicts(desc: dict, power: float, box: Box, J: int, seed: int) -> dict:
    return _cached_verdicts(json.dumps(desc, sort_keys=True), float(power), box.n, box.K, tuple(box.origin), J, seed)


def check_preconditions(entry: dict, box: Box, J: int, seed: int = 0) -> dict:
    """Hypotheses of the chosen variant; raises :class:`PreconditionError` on a definite failure.

    Weight classes fail only on a ``non-member`` verdict; ``inconclusive``
    trends are recorded and let through.
    """
    variant = entry["variant"]
    r = float(entry.get("r", 1.0))
    out: dict = {}
    phi = young_from_dict(entry.get("phi", {"kind": "llogl", "r": r, "delta": 1.0}))
    params = entry.get("params", {})
    if variant in ("theorem1", "strong_form", "corollary", "modular_lemma"):
        try:
            out["Fr"] = certify_Fr(phi, r).__dict__
        except NotInFrError as exc:
            raise PreconditionError("phi_not_in_Fr", str(exc)) from exc
        v_power = r
    elif variant == "sawyer":
        v_power = 1.0
    elif variant == "theorem3":
        try:
            t3 = thm3_params(box.n, r, params.get("delta", 0.0), params["gamma"], params["p"])
        except (ValueError, ArithmeticError) as exc:
            raise PreconditionError("parameters", str(exc)) from exc
        v_power = t3.weight_exponent
    else:
        try:
            t4 = thm4_params(box.n, r, params.get("delta", 0.0), params["gamma"])
        except (ValueError, ArithmeticError) as exc:
            raise PreconditionError("parameters", str(exc)) from exc
        v_power = t4.q
    if variant == "corollary" and "psi" in entry:
        ok, A, B = equivalent_at_infinity(phi, young_from_dict(entry["psi"]), math.e)
        out["equivalence"] = {"A": A, "B": B}
        if not ok:
            raise PreconditionError("psi_not_equivalent", f"psi is not equivalent to phi for large t (A={A}, B={B})", out)
    u_desc = entry.get("u", {"kind": "constant", "c": 1})
    v_desc = entry.get("v", {"kind": "constant", "c": 1})
    u_rep = _weight_verdicts(u_desc, 1.0, box, J, seed)
    v_rep = _weight_verdicts(v_desc, v_power, box, J, seed)
    out["u"] = {"class": "A1", "verdict": u_rep["verdicts"]["A1"], "constant": u_rep["a1_constant"]}
    out["v_power"] = {"power": v_power, "class": "A_inf", "verdict": v_rep["verdicts"]["A_inf"], "ainf_pair": v_rep["ainf_pair"]}
    if u_rep["verdicts"]["A1"] == "non-member":
        raise PreconditionError("u_not_A1", "u is not an A1 weight", {"checks": out, "weight_report": u_rep})
    if v_rep["verdicts"]["A_inf"] == "non-member":
        raise PreconditionError("v_power_not_Ainf", f"v^{v_power:g} is not an A_inf weight", {"checks": out, "weight_report": v_rep})
    return out


def _relative_change(new: float, old: float) -> float:
    if old == new:
        return 0.0
    if old == 0 or not math.isfinite(old) or not math.isfinite(new):
        return math.inf
    return abs(new - old) / old


def run_experiment(entry: dict, box: Box, J: int, seed: int = 0, refine: bool | None = None) -> RatioReport:
    """Run one config entry: preconditions, base sweep, and refinement deltas.

    Modular-lemma entries return a report whose right-hand side is the
    truncated bound and whose pass flag is the lemma's conclusion.
    """
    exp_seed = seed
    resolved = resolve_function(entry.get("f", {"kind": "zero"}), box, np.random.default_rng(exp_seed))
    pre = check_preconditions(entry, box, J, seed) if entry.get("check_preconditions", True) else {}
    ceiling = entry.get("ceiling")
    refine = entry.get("refine", True) if refine is None else refine
    base = build_experiment(entry, box, J, resolved, seed)
    if base.variant == "modular_lemma":
        res = modular_check(base)
        rep = RatioReport(base.name, base.variant, res.t, res.lhs, res.restricted_rhs, np.zeros(len(res.t), bool), _sup(res.lhs, res.restricted_rhs))
        rep.info = {"C": res.C, "c": res.c, "C0": res.C0, "violations": res.violations}
        rep.passed = res.passed
        if not res.passed:
            rep.reasons.append("modular_bound_violated")
    else:
        rep = _report(base, ceiling)
        rep.sup_by_mesh["base"] = rep.sup_ratio
        if refine:
            meshes = refinement_meshes(box, J)
            for key in ("J+1", "K+2"):
                b, j = meshes[key]
                other = _report(build_experiment(entry, b, j, resolved, seed), ceiling)
                rep.sup_by_mesh[key] = other.sup_ratio
                rep.refinement_deltas[key] = _relative_change(other.sup_ratio, rep.sup_ratio)
            if any(d >= STABILITY for d in rep.refinement_deltas.values()):
                rep.reasons.append("refinement_unstable")
                rep.passed = False
    rep.info["preconditions"] = pre
    rep.info["f"] = resolved
    return rep


def run_experiments(entries: list[dict], box: Box, J: int, seed: int = 0, workers: int = 1) -> list:
    """Run entries (in parallel when ``workers > 1``); results keep config order.

    A failed precondition yields the :class:`PreconditionError` in place of a report.
    """

    def one(entry):
        try:
            return run_experiment(entry, box, J, seed)
        except PreconditionError as exc:
            return exc

    if workers <= 1 or len(entries) <= 1:
        return [one(s) for s in entries]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, entries))
