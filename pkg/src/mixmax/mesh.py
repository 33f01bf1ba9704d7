"""Uniform dyadic meshes, cell-constant functions and the 3**n shifted dyadic grids.

Geometry is exact: every cube endpoint is an integer number of *thirds of a
cell*.  A cube of level ``k`` has side ``2**k``, that is ``L = 2**(k - K + J)``
cells, and on grid digit ``i`` (per axis) its start is ``3 L m + (-1)**k i L``
thirds from the lattice anchor.  The alternating sign keeps cubes of one grid
nested across levels.  The anchor is the physical origin whenever the box
origin is a whole number of cells away from it, so boxes of different sizes
see the same cubes; otherwise it is the box origin.

Cubes that stick out of the box are clipped: integrals run over ``Q ∩ box``
and averages divide by ``|Q ∩ box|``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .young import YoungFn

__all__ = [
    "Box",
    "MeshFn",
    "DyadicCube",
    "CubeFamily",
    "grid_count",
    "grid_digits",
    "cube_bounds",
    "lattice_offset",
    "enumerate_cubes",
    "integrate",
    "essential_inf",
    "power_weight",
    "pointwise_map",
    "cube_family",
    "anchored_family",
]

MAGIC = b"MXMF"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Box:
    """Half-open box ``origin + [0, 2**K)**n``."""

    n: int
    K: int
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("only n = 1 and n = 2 are supported")
        if len(self.origin) != self.n:
            raise ValueError("origin must have n coordinates")
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @classmethod
    def centered(cls, n: int, K: int) -> "Box":
        return cls(n, K, (-(2.0 ** (K - 1)),) * n)

    @property
    def side(self) -> float:
        return 2.0**self.K

    @property
    def volume(self) -> float:
        return self.side**self.n


@dataclass(frozen=True)
class DyadicCube:
    grid_id: int
    k: int
    coords: tuple[int, ...]


class MeshFn:
    """Nonnegative cell-constant function on a ``2**J`` per axis mesh of ``box``.

    ``values`` has shape ``(2**J,) * n`` with axis ``a`` indexing coordinate
    ``a``; it is stored read-only.
    """

    __slots__ = ("box", "J", "values")

    def __init__(self, box: Box, J: int, values):
        if J < 0:
            raise ValueError("mesh level must be >= 0")
        vals = np.array(values, dtype=float)
        N = 2**J
        if vals.shape != (N,) * box.n:
            raise ValueError(f"expected shape {(N,) * box.n}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("mesh values must be finite")
        if np.any(vals < 0):
            raise ValueError("mesh values must be nonnegative")
        vals.setflags(write=False)
        self.box = box
        self.J = int(J)
        self.values = vals

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, box: Box, J: int, c: float) -> "MeshFn":
        return cls(box, J, np.full((2**J,) * box.n, float(c)))

    @classmethod
    def from_centers(cls, box: Box, J: int, fn) -> "MeshFn":
        """Sample ``fn(*center_coordinate_arrays)`` at cell centers."""
        axes = np.meshgrid(*cell_centers(box, J), indexing="ij")
        return cls(box, J, fn(*axes))

    def with_values(self, values) -> "MeshFn":
        return MeshFn(self.box, self.J, values)

    # geometry ---------------------------------------------------------------
    @property
    def N(self) -> int:
        return 2**self.J

    @property
    def h(self) -> float:
        return 2.0 ** (self.box.K - self.J)

    @property
    def cell_volume(self) -> float:
        return self.h**self.box.n

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def same_mesh(self, other: "MeshFn") -> bool:
        return self.box == other.box and self.J == other.J

    def total(self) -> float:
        return math.fsum(self.flat) * self.cell_volume

    def is_weight(self) -> bool:
        return bool(np.all(self.values > 0))

    def __repr__(self):
        return f"MeshFn(n={self.box.n}, K={self.box.K}, J={self.J}, max={self.values.max():.6g})"

    # serialization ----------------------------------------------------------
    def to_bytes(self) -> bytes:
        head = struct.pack("<4sIIiI", MAGIC, FORMAT_VERSION, self.box.n, self.box.K, self.J)
        head += struct.pack(f"<{self.box.n}d", *self.box.origin)
        return head + self.values.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "MeshFn":
        magic, version, n, K, J = struct.unpack_from("<4sIIiI", data, 0)
        if magic != MAGIC:
            raise ValueError("not a mesh file")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported mesh format version {version}")
        off = struct.calcsize("<4sIIiI")
        origin = struct.unpack_from(f"<{n}d", data, off)
        off += 8 * n
        N = 2**J
        payload = np.frombuffer(data, dtype="<f8", offset=off)
        if payload.size != N**n:
            raise ValueError("mesh payload has the wrong length")
        return cls(Box(n, K, origin), J, payload.reshape((N,) * n))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "MeshFn":
        return cls.from_bytes(Path(path).read_bytes())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        n = self.box.n
        w.writerow([f"i{a}" for a in range(n)] + [f"x{a}" for a in range(n)] + ["value"])
        centers = cell_centers(self.box, self.J)
        for idx in itertools.product(range(self.N), repeat=n):
            w.writerow(list(idx) + [repr(float(centers[a][idx[a]])) for a in range(n)] + [repr(float(self.values[idx]))])
        return buf.getvalue()


def cell_centers(box: Box, J: int) -> list[np.ndarray]:
    h = 2.0 ** (box.K - J)
    return [box.origin[a] + (np.arange(2**J) + 0.5) * h for a in range(box.n)]


def grid_count(n: int) -> int:
    return 3**n


def grid_digits(grid_id: int, n: int) -> tuple[int, ...]:
    if not 0 <= grid_id < 3**n:
        raise ValueError(f"grid_id must lie in [0, {3**n})")
    return tuple((grid_id // 3**a) % 3 for a in range(n))


def _cells_per_side(box: Box, J: int, k: int) -> int:
    if not box.K - J <= k <= box.K:
        raise ValueError(f"level {k} outside [{box.K - J}, {box.K}]")
    return 2 ** (k - box.K + J)


def _shift(k: int, digit: int, L: int) -> int:
    return (-1 if k % 2 else 1) * digit * L


def lattice_offset(box: Box, J: int) -> tuple[int, ...]:
    """Box origin in cells from the lattice anchor (zero when the origin is off the cell lattice)."""
    h = 2.0 ** (box.K - J)
    out = []
    for o in box.origin:
        c = o / h
        out.append(int(c) if c == int(c) else 0)
    return tuple(out)


def cube_bounds(box: Box, J: int, cube: DyadicCube) -> list[tuple[int, int]]:
    """Per-axis ``[start, end)`` of the cube in thirds of a cell from the box origin."""
    L = _cells_per_side(box, J, cube.k)
    digits = grid_digits(cube.grid_id, box.n)
    off = lattice_offset(box, J)
    out = []
    for a in range(box.n):
        s = 3 * L * cube.coords[a] + _shift(cube.k, digits[a], L) - 3 * off[a]
        out.append((s, s + 3 * L))
    return out


def _axis_range(N: int, L: int, shift: int) -> range:
    # cubes [3Lm + shift, 3L(m+1) + shift) meeting (0, 3N)
    m_lo = math.floor((-shift - 3 * L) / (3 * L)) + 1
    m_hi = math.ceil((3 * N - shift) / (3 * L)) - 1
    return range(m_lo, m_hi + 1)


def enumerate_cubes(box: Box, J: int, grid_id: int, k_min: int | None = None, k_max: int | None = None) -> list[DyadicCube]:
    """All cubes of grid ``grid_id`` with levels in ``[k_min, k_max]`` meeting the box.

    Ordered from the largest level down; within a level lexicographically.
    """
    k_min = box.K - J if k_min is None else k_min
    k_max = box.K if k_max is None else k_max
    digits = grid_digits(grid_id, box.n)
    off = lattice_offset(box, J)
    N = 2**J
    out = []
    for k in range(k_max, k_min - 1, -1):
        L = _cells_per_side(box, J, k)
        ranges = [_axis_range(N, L, _shift(k, digits[a], L) - 3 * off[a]) for a in range(box.n)]
        out.extend(DyadicCube(grid_id, k, tuple(m)) for m in itertools.product(*ranges))
    return out


@lru_cache(maxsize=4096)
def _axis_table(N: int, start: int, end: int):
    """Cells meeting ``[start, end)`` (thirds), overlaps in cell units, and center-contained cells."""
    c0 = max(0, start // 3)
    c1 = min(N - 1, -(-end // 3) - 1)
    if c1 < c0:
        cells = np.zeros(0, dtype=np.int64)
        ov = np.zeros(0)
    else:
        cells = np.arange(c0, c1 + 1, dtype=np.int64)
        lo = np.maximum(start, 3 * cells)
        hi = np.minimum(end, 3 * cells + 3)
        ov = (hi - lo) / 3.0
        keep = ov > 0
        cells, ov = cells[keep], ov[keep]
    # center 3c + 1.5 lies in [start, end)
    k0 = max(0, -(-(start - 1) // 3))
    k1 = min(N - 1, (end - 2) // 3)
    centers = np.arange(k0, k1 + 1, dtype=np.int64) if k1 >= k0 else np.zeros(0, dtype=np.int64)
    cells.setflags(write=False)
    ov.setflags(write=False)
    centers.setflags(write=False)
    return cells, ov, centers


class CubeFamily:
    """A finite family of clipped cubes in compressed (CSR) form.

    For cube ``q`` the entries ``indptr[q]:indptr[q+1]`` of ``cells`` and
    ``overlap`` list the flat cell indices meeting it and ``|c ∩ Q|`` in cell
    units.  ``centers`` / ``c_indptr`` list the cells whose centers the cube
    contains.  ``parent[q]`` is the index of the next larger cube of the same
    grid when it belongs to the family, else ``-1``.
    """

    def __init__(self, box: Box, J: int, cubes: Sequence[DyadicCube]):
        self.box = box
        self.J = J
        self.cubes = list(cubes)
        n, N = box.n, 2**J
        nq = len(self.cubes)
        self.index = {c: q for q, c in enumerate(self.cubes)}
        if len(self.index) != nq:
            raise ValueError("duplicate cubes in family")
        self.grid_id = np.array([c.grid_id for c in self.cubes], dtype=np.int64)
        self.level = np.array([c.k for c in self.cubes], dtype=np.int64)
        self.coords = np.array([c.coords for c in self.cubes], dtype=np.int64).reshape(nq, n)
        cell_parts, ov_parts, cen_parts = [], [], []
        for c in self.cubes:
            tabs = [_axis_table(N, s, e) for s, e in cube_bounds(box, J, c)]
            if n == 1:
                cells, ov, cen = tabs[0]
            else:
                (c0, o0, k0), (c1, o1, k1) = tabs
                cells = (c0[:, None] * N + c1[None, :]).ravel()
                ov = (o0[:, None] * o1[None, :]).ravel()
                cen = (k0[:, None] * N + k1[None, :]).ravel()
            cell_parts.append(cells)
            ov_parts.append(ov)
            cen_parts.append(cen)
        self.indptr = _indptr(cell_parts)
        self.cells = _concat(cell_parts, np.int64)
        self.overlap = _concat(ov_parts, float)
        self.c_indptr = _indptr(cen_parts)
        self.centers = _concat(cen_parts, np.int64)
        self.measure = np.array([math.fsum(o) for o in ov_parts]) if nq else np.zeros(0)
        if np.any(self.measure <= 0):
            raise ValueError("family contains a cube disjoint from the box")
        self.parent = np.full(nq, -1, dtype=np.int64)
        for q, c in enumerate(self.cubes):
            if c.k < box.K:
                p = self.index.get(parent_cube(box, J, c))
                if p is not None:
                    self.parent[q] = p

    def __len__(self):
        return len(self.cubes)

    @property
    def cell_volume(self) -> float:
        return 2.0 ** ((self.box.K - self.J) * self.box.n)

    @property
    def volume(self) -> np.ndarray:
        """Physical clipped measure ``|Q ∩ box|``."""
        return self.measure * self.cell_volume

    @property
    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(len(self)), np.diff(self.indptr))

    @property
    def center_owner(self) -> np.ndarray:
        return np.repeat(np.arange(len(self)), np.diff(self.c_indptr))

    def entries(self, q: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.indptr[q], self.indptr[q + 1]
        return self.cells[a:b], self.overlap[a:b]

    def center_cells(self, q: int) -> np.ndarray:
        return self.centers[self.c_indptr[q] : self.c_indptr[q + 1]]

    def subset(self, mask) -> "CubeFamily":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        return CubeFamily(self.box, self.J, [self.cubes[i] for i in idx])

    def describe(self) -> dict:
        return {
            "n": self.box.n,
            "K": self.box.K,
            "J": self.J,
            "grids": sorted({int(g) for g in self.grid_id}),
            "levels": [int(self.level.min()), int(self.level.max())] if len(self) else [],
            "cubes": len(self),
        }


def _indptr(parts) -> np.ndarray:
    ptr = np.zeros(len(parts) + 1, dtype=np.int64)
    if parts:
        np.cumsum([len(p) for p in parts], out=ptr[1:])
    return ptr


def _concat(parts, dtype) -> np.ndarray:
    return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)


def parent_cube(box: Box, J: int, cube: DyadicCube) -> DyadicCube:
    """The level ``k+1`` cube of the same grid containing ``cube``."""
    L = _cells_per_side(box, J, cube.k)
    digits = grid_digits(cube.grid_id, box.n)
    off = lattice_offset(box, J)
    coords = []
    for a, (s, _) in enumerate(cube_bounds(box, J, cube)):
        sp = _shift(cube.k + 1, digits[a], 2 * L)
        coords.append((s + 3 * off[a] - sp) // (6 * L))
    return DyadicCube(cube.grid_id, cube.k + 1, tuple(coords))


@lru_cache(maxsize=64)
def cube_family(box: Box, J: int, grids: tuple[int, ...] | None = None, k_min: int | None = None, k_max: int | None = None) -> CubeFamily:
    """Cached family of every cube of the given grids (default: all ``3**n``) between levels."""
    grids = tuple(range(3**box.n)) if grids is None else tuple(grids)
    cubes = []
    for g in grids:
        cubes.extend(enumerate_cubes(box, J, g, k_min, k_max))
    return CubeFamily(box, J, cubes)


@lru_cache(maxsize=16)
def anchored_family(box: Box, J: int) -> "AnchoredFamily":
    """Every axis-parallel cube of dyadic side whose corner sits on a mesh node.

    Used as the arbitrary-cube surrogate; cubes are clipped to the box.
    """
    return AnchoredFamily(box, J)


class AnchoredFamily(CubeFamily):
    def __init__(self, box: Box, J: int):
        # reuse CSR machinery by constructing the arrays directly
        self.box, self.J = box, J
        n, N = box.n, 2**J
        cell_parts, ov_parts, cen_parts, levels, starts = [], [], [], [], []
        for k in range(box.K, box.K - J - 1, -1):
            L = _cells_per_side(box, J, k)
            for corner in itertools.product(range(-L + 1, N), repeat=n):
                tabs = [_axis_table(N, 3 * c, 3 * (c + L)) for c in corner]
                if n == 1:
                    cells, ov, cen = tabs[0]
                else:
                    (c0, o0, k0), (c1, o1, k1) = tabs
                    cells = (c0[:, None] * N + c1[None, :]).ravel()
                    ov = (o0[:, None] * o1[None, :]).ravel()
                    cen = (k0[:, None] * N + k1[None, :]).ravel()
                cell_parts.append(cells)
                ov_parts.append(ov)
                cen_parts.append(cen)
                levels.append(k)
                starts.append(corner)
        self.cubes = []
        self.index = {}
        nq = len(levels)
        self.grid_id = np.full(nq, -1, dtype=np.int64)
        self.level = np.array(levels, dtype=np.int64)
        self.coords = np.array(starts, dtype=np.int64).reshape(nq, n)
        self.indptr = _indptr(cell_parts)
        self.cells = _concat(cell_parts, np.int64)
        self.overlap = _concat(ov_parts, float)
        self.c_indptr = _indptr(cen_parts)
        self.centers = _concat(cen_parts, np.int64)
        self.measure = np.array([math.fsum(o) for o in ov_parts])
        self.parent = np.full(nq, -1, dtype=np.int64)

    def __len__(self):
        return len(self.level)


def _as_family(box: Box, J: int, Q) -> CubeFamily:
    if isinstance(Q, CubeFamily):
        return Q
    if isinstance(Q, DyadicCube):
        return CubeFamily(box, J, [Q])
    return CubeFamily(box, J, list(Q))


def integrate(f: MeshFn, Q: DyadicCube) -> float:
    """Exact ``∫_Q f`` for a cell-constant ``f`` (compensated summation); 0 if ``Q`` misses the box."""
    N = f.N
    parts = [_axis_table(N, s, e) for s, e in cube_bounds(f.box, f.J, Q)]
    if any(p[0].size == 0 for p in parts):
        return 0.0
    if f.box.n == 1:
        cells, ov, _ = parts[0]
        terms = f.flat[cells] * ov
    else:
        (c0, o0, _), (c1, o1, _) = parts
        terms = (f.values[np.ix_(c0, c1)] * np.outer(o0, o1)).ravel()
    return math.fsum(terms) * f.cell_volume


def essential_inf(f: MeshFn, Q: DyadicCube) -> float:
    """Minimum over cells meeting ``Q`` in positive measure."""
    parts = [_axis_table(f.N, s, e) for s, e in cube_bounds(f.box, f.J, Q)]
    if any(p[0].size == 0 for p in parts):
        raise ValueError("cube does not meet the box")
    if f.box.n == 1:
        return float(f.flat[parts[0][0]].min())
    return float(f.values[np.ix_(parts[0][0], parts[1][0])].min())


def power_weight(box: Box, J: int, beta: float) -> MeshFn:
    """``|center(c)|**beta`` per cell (Euclidean norm in 2D)."""
    axes = np.meshgrid(*cell_centers(box, J), indexing="ij")
    radius = np.sqrt(sum(a * a for a in axes))
    if beta == 0:
        return MeshFn(box, J, np.ones_like(radius))
    if np.any(radius == 0):
        raise ValueError("a cell center sits at the origin; shift the box")
    return MeshFn(box, J, radius**beta)


def pointwise_map(f: MeshFn, op) -> MeshFn:
    """Cellwise ``phi(f)``, ``f**p`` or ``f * g``.

    ``op`` is a :class:`~mixmax.young.YoungFn`, a real exponent, or another
    :class:`MeshFn` on the same mesh.  ``None`` is the identity.
    """
    if op is None:
        return f
    if isinstance(op, YoungFn):
        return f.with_values(op(f.values))
    if isinstance(op, MeshFn):
        if not f.same_mesh(op):
            raise ValueError("mesh mismatch")
        return f.with_values(f.values * op.values)
    if isinstance(op, (int, float, np.floating)):
        p = float(op)
        if p < 0 and np.any(f.values == 0):
            raise ValueError("negative power of a function with zeros")
        return f.with_values(f.values**p)
    raise TypeError(f"unsupported pointwise operation {op!r}")
