"""Young functions: closed families, generalized inverses and sampled property checks.

Only the closed families needed by the mixed-inequality experiments are
representable:

``Power(p)``
    ``t**p``
``LLogL(r, delta, log_scale=1)``
    ``t**r * (1 + log+(t**log_scale))**delta``; ``log_scale=1`` is the usual
    ``L log L`` family, a negative scale gives weight-type functions such as
    ``t**r (1 + log+(t**(1 - q/r)))**nu``.
``Spliced(low, high, t0)``
    ``low`` on ``[0, t0]`` and ``high`` above; must be continuous at ``t0``.
``Powered(base, exponent)``
    ``base(t)**exponent``.

Every descriptor round-trips through a small JSON schema, see
:func:`young_from_dict`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "YoungFn",
    "Power",
    "LLogL",
    "Spliced",
    "Powered",
    "FrCertificate",
    "NotInFrError",
    "Thm3Params",
    "Thm4Params",
    "young_from_dict",
    "young_from_json",
    "evaluate",
    "gen_inverse",
    "inverse_closed_form",
    "check_type",
    "check_submultiplicative",
    "certify_Fr",
    "check_equivalence",
    "equivalent_at_infinity",
    "is_convex_sampled",
    "thm3_params",
    "thm4_params",
    "ratio_lemma_f",
    "log_grid",
    "product_grid",
]

INVERSE_RTOL = 1e-10
# a sampled constant that moves by more than this when the sample range is
# extended by several decades is treated as divergent
TREND_FACTOR = 1.5


class YoungFn:
    """Base class; subclasses are frozen dataclasses."""

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = self._eval(t)
        return out if out.ndim else float(out)

    def _eval(self, t: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def to_dict(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def inverse(self, t: float) -> float:
        return gen_inverse(self, t)

    @property
    def is_identity(self) -> bool:
        return False


@dataclass(frozen=True)
class Power(YoungFn):
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 1.0):
            raise ValueError(f"Power exponent must be >= 1, got {self.p}")

    def _eval(self, t):
        return t**self.p

    def to_dict(self):
        return {"kind": "power", "p": self.p}

    @property
    def is_identity(self):
        return self.p == 1.0


@dataclass(frozen=True)
class LLogL(YoungFn):
    r: float
    delta: float = 0.0
    log_scale: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r >= 1.0):
            raise ValueError(f"LLogL needs r >= 1, got {self.r}")
        if not (math.isfinite(self.delta) and self.delta >= 0.0):
            raise ValueError(f"LLogL needs delta >= 0, got {self.delta}")
        if not math.isfinite(self.log_scale) or self.log_scale == 0.0:
            raise ValueError("log_scale must be finite and nonzero")

    def _eval(self, t):
        if self.delta == 0.0:
            return t**self.r
        logp = np.maximum(0.0, self.log_scale * np.log(t))
        out = t**self.r * (1.0 + logp) ** self.delta
        # t = 0 with a negative log scale gives 0 * inf
        return np.where(t == 0.0, 0.0, out)

    def to_dict(self):
        d = {"kind": "llogl", "r": self.r, "delta": self.delta}
        if self.log_scale != 1.0:
            d["log_scale"] = self.log_scale
        return d

    @property
    def is_identity(self):
        return self.r == 1.0 and self.delta == 0.0


@dataclass(frozen=True)
class Spliced(YoungFn):
    low: YoungFn
    high: YoungFn
    t0: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.t0) and self.t0 > 0):
            raise ValueError("splice point must be positive and finite")
        a, b = self.low(self.t0), self.high(self.t0)
        if abs(a - b) > 1e-12 * max(1.0, abs(a), abs(b)):
            raise ValueError(f"splice is discontinuous at t0={self.t0}: {a} != {b}")

    def _eval(self, t):
        return np.where(t <= self.t0, self.low._eval(t), self.high._eval(t))

    def to_dict(self):
        return {"kind": "spliced", "low": self.low.to_dict(), "high": self.high.to_dict(), "t0": self.t0}


@dataclass(frozen=True)
class Powered(YoungFn):
    base: YoungFn
    exponent: float

    def __post_init__(self):
        if not (math.isfinite(self.exponent) and self.exponent > 0):
            raise ValueError("exponent must be positive")

    def _eval(self, t):
        return self.base._eval(t) ** self.exponent

    def to_dict(self):
        return {"kind": "powered", "base": self.base.to_dict(), "exponent": self.exponent}


def young_from_dict(d: dict) -> YoungFn:
    """Build a Young function from its JSON descriptor.

    >>> young_from_dict({"kind": "llogl", "r": 2, "delta": 1})
    LLogL(r=2.0, delta=1.0, log_scale=1.0)
    """
    if isinstance(d, YoungFn):
        return d
    d = dict(d)
    kind = d.pop("kind", None)
    allowed = {
        "power": {"p"},
        "llogl": {"r", "delta", "log_scale"},
        "spliced": {"low", "high", "t0"},
        "powered": {"base", "exponent"},
    }
    if kind not in allowed:
        raise ValueError(f"unknown Young function kind {kind!r}")
    extra = set(d) - allowed[kind]
    if extra:
        raise ValueError(f"unknown keys for {kind}: {sorted(extra)}")
    if kind == "power":
        return Power(float(d["p"]))
    if kind == "llogl":
        return LLogL(float(d["r"]), float(d.get("delta", 0.0)), float(d.get("log_scale", 1.0)))
    if kind == "spliced":
        return Spliced(young_from_dict(d["low"]), young_from_dict(d["high"]), float(d.get("t0", 1.0)))
    return Powered(young_from_dict(d["base"]), float(d["exponent"]))


def young_from_json(text: str) -> YoungFn:
    import json

    return young_from_dict(json.loads(text))


def evaluate(phi: YoungFn, t: float) -> float:
    """Exact closed-form value ``phi(t)``; negative or non-finite ``t`` is a domain error."""
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"Young functions are evaluated on [0, inf), got {t}")
    return float(phi(t))


def gen_inverse(phi: YoungFn, t: float, rtol: float = INVERSE_RTOL) -> float:
    """``inf{s >= 0 : phi(s) >= t}`` by bracketing bisection.

    The returned value is the upper end of the final bracket, so
    ``phi(result) >= t`` always holds.
    """
    t = float(t)
    if t < 0 or math.isnan(t):
        raise ValueError("generalized inverse needs t >= 0")
    if t == 0.0:
        return 0.0
    hi = 1.0
    while phi(hi) < t:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    lo = hi / 2.0
    while phi(lo) >= t:
        hi = lo
        lo /= 2.0
        if lo < 1e-300:
            return hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if phi(mid) >= t:
            hi = mid
        else:
            lo = mid
    return hi


def inverse_closed_form(r: float, delta: float, t):
    """Comparison profile ``t**(1/r) (1 + log+ t)**(-delta/r)`` for ``LLogL(r, delta)``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return t ** (1.0 / r) * (1.0 + np.maximum(0.0, np.log(t))) ** (-delta / r)


def log_grid(lo: float, hi: float, num: int) -> np.ndarray:
    return np.geomspace(lo, hi, num)


def product_grid(s: Sequence[float], t: Sequence[float]) -> np.ndarray:
    """All pairs ``(s_i, t_j)`` as an ``(m, 2)`` array."""
    ss, tt = np.meshgrid(np.asarray(s, float), np.asarray(t, float), indexing="ij")
    return np.column_stack([ss.ravel(), tt.ravel()])


def _as_pairs(sample_grid) -> np.ndarray:
    pairs = np.asarray(list(sample_grid) if not isinstance(sample_grid, np.ndarray) else sample_grid, dtype=float)
    if pairs.size == 0:
        raise ValueError("empty sample grid")
    return pairs.reshape(-1, 2)


def check_type(phi: YoungFn, p: float, side: str, sample_grid) -> float:
    """Smallest constant ``C`` with ``phi(st) <= C s**p phi(t)`` on the samples.

    ``side='lower'`` expects ``0 < s <= 1``, ``side='upper'`` expects ``s >= 1``.
    """
    pairs = _as_pairs(sample_grid)
    s, t = pairs[:, 0], pairs[:, 1]
    if side == "lower":
        if np.any((s <= 0) | (s > 1)):
            raise ValueError("lower type samples need 0 < s <= 1")
    elif side == "upper":
        if np.any(s < 1):
            raise ValueError("upper type samples need s >= 1")
    else:
        raise ValueError("side must be 'lower' or 'upper'")
    if np.any(t <= 0):
        raise ValueError("type samples need t > 0")
    return float(np.max(phi(s * t) / (s**p * phi(t))))


def check_submultiplicative(phi: YoungFn, sample_grid) -> float:
    """Max of ``phi(st) / (phi(s) phi(t))`` over the samples."""
    pairs = _as_pairs(sample_grid)
    s, t = pairs[:, 0], pairs[:, 1]
    if np.any((s <= 0) | (t <= 0)):
        raise ValueError("submultiplicativity samples need s, t > 0")
    return float(np.max(phi(s * t) / (phi(s) * phi(t))))


def is_convex_sampled(phi: YoungFn, lo: float = 0.0, hi: float = 1e3, num: int = 4001, rtol: float = 1e-9) -> bool:
    """Second differences on a uniform grid are nonnegative (up to rounding)."""
    t = np.linspace(lo, hi, num)
    y = phi(t)
    d2 = y[2:] - 2 * y[1:-1] + y[:-2]
    return bool(np.all(d2 >= -rtol * np.maximum(1.0, np.abs(y[1:-1]))) and np.all(np.diff(y) >= 0))


class NotInFrError(ValueError):
    """Raised when a Young function cannot be certified in the family F_r."""


@dataclass(frozen=True)
class FrCertificate:
    r: float
    C0: float
    delta: float
    t_star: float
    submult_const: float
    lower_type_const: float


def _growth(phi: YoungFn) -> tuple[float, float]:
    """(power, log-power) of ``phi`` at infinity."""
    if isinstance(phi, Power):
        return phi.p, 0.0
    if isinstance(phi, LLogL):
        return phi.r, (phi.delta if phi.log_scale > 0 else 0.0)
    if isinstance(phi, Spliced):
        return _growth(phi.high)
    if isinstance(phi, Powered):
        a, b = _growth(phi.base)
        return a * phi.exponent, b * phi.exponent
    raise TypeError(type(phi))


def certify_Fr(phi: YoungFn, r: float, t_star: float = math.e, t_max: float = 1e6, num: int = 400) -> FrCertificate:
    """Empirical certificate that ``phi`` is submultiplicative, of lower type ``r``,
    and ``phi(t)/t**r <= C0 (log t)**delta`` for ``t >= t_star``.

    Raises :class:`NotInFrError` when the growth ratio keeps increasing over
    the top decade of samples, or a sampled constant is not finite.
    """
    if r < 1:
        raise ValueError("F_r needs r >= 1")
    if t_star < math.e:
        raise ValueError("t_star must be at least e so that log t >= 1")
    power, logpow = _growth(phi)
    delta = logpow if abs(power - r) <= 1e-12 else 0.0
    t = log_grid(t_star, t_max, num)
    ratio = phi(t) / (t**r * np.log(t) ** delta)
    top = ratio[t >= t_max / 10.0]
    if not np.all(np.isfinite(ratio)) or (top.size > 1 and np.all(np.diff(top) > 0)):
        raise NotInFrError(f"{phi} grows faster than t^{r} (log t)^{delta}")
    C0 = float(np.max(ratio))
    s = log_grid(1e-3, 1.0, 40)
    tt = log_grid(1e-3, 1e6, 60)
    lower = check_type(phi, r, "lower", product_grid(s, tt))
    # a constant that keeps growing as s shrinks is infinite, not large
    lower_wide = check_type(phi, r, "lower", product_grid(log_grid(1e-6, 1.0, 60), tt))
    if lower_wide > TREND_FACTOR * lower:
        raise NotInFrError(f"{phi} is not of lower type {r}: constant grows from {lower:.3g} to {lower_wide:.3g} as s shrinks")
    sub_s = log_grid(1e-3, 1e3, 60)
    submult = check_submultiplicative(phi, product_grid(sub_s, sub_s))
    if not (math.isfinite(lower) and math.isfinite(submult)):
        raise NotInFrError("sampled type/submultiplicative constants are not finite")
    return FrCertificate(r=r, C0=C0, delta=delta, t_star=t_star, submult_const=submult, lower_type_const=lower)


def check_equivalence(phi: YoungFn, psi: YoungFn, t0: float, t_max: float = 1e6, num: int = 400) -> tuple[float, float]:
    """Tightest sampled ``A, B`` with ``A psi(t) <= phi(t) <= B psi(t)`` for ``t >= t0``."""
    if t0 < 0:
        raise ValueError("t0 must be nonnegative")
    t = log_grid(max(t0, 1e-6), t_max, num)
    q = phi(t) / psi(t)
    return float(np.min(q)), float(np.max(q))


def equivalent_at_infinity(phi: YoungFn, psi: YoungFn, t0: float, t_max: float = 1e6) -> tuple[bool, float, float]:
    """``(ok, A, B)``: sampled constants of :func:`check_equivalence` and whether they are stable.

    The bounds are resampled up to ``t_max**2``; a bound that moves by more
    than ``TREND_FACTOR`` is taken to drift to 0 or infinity.
    """
    A, B = check_equivalence(phi, psi, t0, t_max)
    A2, B2 = check_equivalence(phi, psi, t0, t_max**2)
    ok = A > 0 and math.isfinite(B2) and A2 * TREND_FACTOR >= A and B2 <= TREND_FACTOR * B
    return ok, A2, B2


def _inverse_ratio_range(num_fn, den_fn, ts: Iterable[float]) -> tuple[float, float]:
    vals = [num_fn(t) / den_fn(t) for t in ts]
    return float(min(vals)), float(max(vals))


@dataclass(frozen=True)
class Thm3Params:
    n: int
    r: float
    delta: float
    gamma: float
    p: float
    q: float
    sigma: float
    nu: float
    beta: float
    inv_r_prime: float
    phi: YoungFn
    xi: YoungFn
    eta: YoungFn
    inverse_ratio: tuple[float, float]

    @property
    def weight_exponent(self) -> float:
        """``q (1/p + 1/r')``, the power of ``v`` in the left-hand measure."""
        return self.q * (1.0 / self.p + self.inv_r_prime)


def thm3_params(n: int, r: float, delta: float, gamma: float, p: float) -> Thm3Params:
    """Derived exponents and auxiliary functions for the ``r < p < n/gamma`` estimate."""
    if not (0 < gamma < n / r):
        raise ValueError(f"need 0 < gamma < n/r = {n / r}")
    if not (r < p < n / gamma):
        raise ValueError(f"need r < p < n/gamma, got r={r}, p={p}, n/gamma={n / gamma}")
    q = 1.0 / (1.0 / p - gamma / n)
    inv_rp = 1.0 - 1.0 / r
    sigma = n * r / (n - r * gamma)
    nu = n * delta / (n - r * gamma)
    beta = (q / sigma) * (1.0 / p + inv_rp)
    if not beta > 1:
        raise ArithmeticError(f"beta={beta} should exceed 1")
    phi = LLogL(r, delta)
    xi = Spliced(Power(q / beta), LLogL(sigma, nu), 1.0)
    eta = LLogL(q / p + q * inv_rp, nu)
    ts = log_grid(1.0, 1e12, 49)
    ratio = _inverse_ratio_range(lambda t: gen_inverse(xi, t) * t ** (gamma / n), lambda t: gen_inverse(phi, t), ts)
    return Thm3Params(n, r, delta, gamma, p, q, sigma, nu, beta, inv_rp, phi, xi, eta, ratio)


@dataclass(frozen=True)
class Thm4Params:
    n: int
    r: float
    delta: float
    gamma: float
    q: float
    nu: float
    phi: YoungFn
    xi: YoungFn
    eta: YoungFn
    phi_mod: YoungFn
    psi_w: YoungFn
    phi_gamma: YoungFn
    xi_vs_phi_gamma: float
    outer_ratio: float


def thm4_params(n: int, r: float, delta: float, gamma: float) -> Thm4Params:
    """Derived functions for the endpoint case ``p = r``.

    Two sampled checks are stored: ``xi(t**(r/q)) / Phi_gamma(t)`` (must not
    exceed 1) and ``t Phi_gamma(t**(gamma q/(n r))) / phi_mod(t)`` (bounded).
    """
    if not (0 < gamma < n / r):
        raise ValueError(f"need 0 < gamma < n/r = {n / r}")
    q = 1.0 / (1.0 / r - gamma / n)
    nu = delta * q / r
    phi = LLogL(r, delta)
    xi = LLogL(q, nu)
    phi_mod = Powered(LLogL(1.0, delta), q / r)
    psi_w = LLogL(r, n * delta / (n - r * gamma), log_scale=1.0 - q / r)
    phi_gamma = LLogL(r, delta + delta * r * gamma / (n - r * gamma))
    t = log_grid(1e-6, 1e6, 241)
    xi_ratio = float(np.max(xi(t ** (r / q)) / phi_gamma(t)))
    if xi_ratio > 1.0 + 1e-12:
        raise ArithmeticError(f"xi(t^(r/q)) exceeds Phi_gamma(t) by factor {xi_ratio}")
    outer = float(np.max(t * phi_gamma(t ** (gamma * q / (n * r))) / phi_mod(t)))
    return Thm4Params(n, r, delta, gamma, q, nu, phi, xi, xi, phi_mod, psi_w, phi_gamma, xi_ratio, outer)


def ratio_lemma_f(x):
    """``(1 + 1/x)**(x/(1+x))`` for ``x > 0`` and ``1`` at ``x = 0``; values lie in ``[1, e**(1/e)]``."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("ratio_lemma_f is defined on x >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(arr / (1.0 + arr) * np.log1p(1.0 / arr))
    out = np.where(arr == 0.0, 1.0, out)
    # x = inf: exponent -> 1, base -> 1
    out = np.where(np.isinf(arr), 1.0, out)
    return out if out.ndim else float(out)
