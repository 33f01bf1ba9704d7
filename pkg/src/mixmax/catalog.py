"""JSON descriptors for test weights and test functions.

Weights
    ``{"kind": "constant", "c": 1}``
    ``{"kind": "power", "beta": -0.5}``  (``|x|**beta`` at cell centers)
    ``{"kind": "bump", "base": <weight>, "lo": [..], "hi": [..], "height": h}``
    (``base * (1 + h * indicator of [lo, hi))``)
    ``{"kind": "product", "factors": [<weight>, ...]}``

Functions
    ``{"kind": "zero"}``, ``{"kind": "constant", "c": 2}``
    ``{"kind": "indicator", "lo": [..], "hi": [..], "height": 1}``
    ``{"kind": "indicator_mix", "count": 4, "resolution": 4, "extent": [lo, hi], "max_length": 8}``

``indicator_mix`` draws ``count`` boxes with log-uniform heights and endpoints
on multiples of ``2**(K0 - resolution)`` inside ``extent`` (default: the base
box), at most ``max_length`` of those units long, so the function is the same
set in physical space on every finer or larger mesh.
"""

from __future__ import annotations

import numpy as np

from .mesh import Box, MeshFn, cell_centers, power_weight

WEIGHT_KINDS = {
    "constant": {"c"},
    "power": {"beta"},
    "bump": {"base", "lo", "hi", "height"},
    "product": {"factors"},
}
FUNCTION_KINDS = {
    "zero": set(),
    "constant": {"c"},
    "indicator": {"lo", "hi", "height"},
    "indicator_mix": {"count", "resolution", "extent", "min_height", "max_height", "max_length"},
}


def _check_keys(d: dict, allowed: dict[str, set], what: str) -> str:
    if not isinstance(d, dict) or "kind" not in d:
        raise ValueError(f"{what} descriptor needs a 'kind'")
    kind = d["kind"]
    if kind not in allowed:
        raise ValueError(f"unknown {what} kind {kind!r}")
    extra = set(d) - allowed[kind] - {"kind"}
    if extra:
        raise ValueError(f"unknown keys for {what} kind {kind!r}: {sorted(extra)}")
    return kind


def _box_indicator(box: Box, J: int, lo, hi) -> np.ndarray:
    axes = np.meshgrid(*cell_centers(box, J), indexing="ij")
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (box.n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (box.n,))
    mask = np.ones(axes[0].shape, dtype=bool)
    for a in range(box.n):
        mask &= (axes[a] >= lo[a]) & (axes[a] < hi[a])
    return mask.astype(float)


def make_weight(desc: dict, box: Box, J: int) -> MeshFn:
    kind = _check_keys(desc, WEIGHT_KINDS, "weight")
    if kind == "constant":
        c = float(desc.get("c", 1.0))
        if c <= 0:
            raise ValueError("constant weight must be positive")
        return MeshFn.constant(box, J, c)
    if kind == "power":
        return power_weight(box, J, float(desc["beta"]))
    if kind == "bump":
        base = make_weight(desc["base"], box, J)
        h = float(desc.get("height", 1.0))
        if h <= -1:
            raise ValueError("bump height must exceed -1")
        return base.with_values(base.values * (1.0 + h * _box_indicator(box, J, desc["lo"], desc["hi"])))
    vals = np.ones((2**J,) * box.n)
    for fd in desc["factors"]:
        vals = vals * make_weight(fd, box, J).values
    return MeshFn(box, J, vals)


def resolve_function(desc: dict, base_box: Box, rng: np.random.Generator) -> dict:
    """Replace random descriptors by explicit ones (drawn once, in physical coordinates)."""
    kind = _check_keys(desc, FUNCTION_KINDS, "function")
    if kind != "indicator_mix":
        return dict(desc)
    count = int(desc.get("count", 4))
    res = int(desc.get("resolution", 4))
    lo_ext, hi_ext = desc.get("extent", [base_box.origin[0], base_box.origin[0] + base_box.side])
    width = base_box.side / 2**res
    slots = int(round((hi_ext - lo_ext) / width))
    if slots < 1:
        raise ValueError("extent shorter than one resolution cell")
    h_lo, h_hi = float(desc.get("min_height", 0.5)), float(desc.get("max_height", 2.0))
    max_len = int(desc.get("max_length", slots))
    pieces = []
    for _ in range(count):
        lo, hi = [], []
        for _a in range(base_box.n):
            if max_len >= slots:
                i, j = sorted(rng.choice(slots + 1, size=2, replace=False))
            else:
                i = int(rng.integers(0, slots - max_len + 1))
                j = i + int(rng.integers(1, max_len + 1))
            lo.append(lo_ext + i * width)
            hi.append(lo_ext + j * width)
        pieces.append({"kind": "indicator", "lo": lo, "hi": hi, "height": float(np.exp(rng.uniform(np.log(h_lo), np.log(h_hi))))})
    return {"kind": "sum", "pieces": pieces}


def make_function(desc: dict, box: Box, J: int) -> MeshFn:
    """Sample a resolved function descriptor at cell centers."""
    if desc.get("kind") == "sum":
        vals = np.zeros((2**J,) * box.n)
        for p in desc["pieces"]:
            vals = vals + make_function(p, box, J).values
        return MeshFn(box, J, vals)
    kind = _check_keys(desc, FUNCTION_KINDS, "function")
    if kind == "zero":
        return MeshFn.constant(box, J, 0.0)
    if kind == "constant":
        return MeshFn.constant(box, J, float(desc.get("c", 1.0)))
    if kind == "indicator":
        h = float(desc.get("height", 1.0))
        return MeshFn(box, J, h * _box_indicator(box, J, desc["lo"], desc["hi"]))
    raise ValueError("indicator_mix must be resolved first (see resolve_function)")


def random_indicator_mix(
    box: Box, J: int, rng: np.random.Generator, count: int = 4, resolution: int | None = None, heights=(0.5, 2.0), max_length: int | None = None
) -> MeshFn:
    """Convenience: a random sum of weighted indicators aligned to the mesh."""
    res = J if resolution is None else min(resolution, J)
    desc = {"kind": "indicator_mix", "count": count, "resolution": res, "min_height": heights[0], "max_height": heights[1]}
    if max_length is not None:
        desc["max_length"] = max_length
    desc = resolve_function(desc, box, rng)
    return make_function(desc, box, J)
