import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixmax.mesh import (
    Box,
    CubeFamily,
    DyadicCube,
    MeshFn,
    anchored_family,
    cube_bounds,
    cube_family,
    enumerate_cubes,
    essential_inf,
    integrate,
    lattice_offset,
    parent_cube,
    pointwise_map,
    power_weight,
)
from mixmax.young import Power

BOXES = [Box(1, 0, (0.0,)), Box.centered(1, 2), Box(2, 1, (0.0, 0.0)), Box.centered(2, 2)]


def _physical(box, J, cube):
    """Exact physical bounds of a cube as fractions."""
    h = Fraction(2) ** (box.K - J)
    return [(Fraction(box.origin[a]) + Fraction(s, 3) * h, Fraction(box.origin[a]) + Fraction(e, 3) * h) for a, (s, e) in enumerate(cube_bounds(box, J, cube))]


@pytest.mark.parametrize("box", BOXES, ids=repr)
def test_levels_partition_the_box(box):
    J = 4 if box.n == 1 else 3
    N = 2**J
    for g in range(3**box.n):
        for k in range(box.K - J, box.K + 1):
            fam = CubeFamily(box, J, enumerate_cubes(box, J, g, k, k))
            cover = np.zeros(N**box.n)
            np.add.at(cover, fam.cells, fam.overlap)
            assert np.allclose(cover, 1.0, rtol=0, atol=1e-12)
            centers = np.bincount(fam.centers, minlength=N**box.n)
            assert np.all(centers == 1)


@pytest.mark.parametrize("box", BOXES, ids=repr)
def test_grids_nest(box):
    J = 4 if box.n == 1 else 3
    for g in range(3**box.n):
        for c in enumerate_cubes(box, J, g, box.K - J, box.K - 1):
            p = parent_cube(box, J, c)
            cb, pb = _physical(box, J, c), _physical(box, J, p)
            assert p.k == c.k + 1
            assert all(plo <= clo and chi <= phi for (clo, chi), (plo, phi) in zip(cb, pb))


def test_one_third_shift():
    box = Box(1, 0, (0.0,))
    J = 3
    h = Fraction(1, 8)
    for g, sign in [(1, 1), (2, 2)]:
        c = DyadicCube(g, -3, (0,))  # level -3 is odd: shift is negative
        lo, _ = _physical(box, J, c)[0]
        assert lo == -sign * h / 3
        c = DyadicCube(g, -2, (0,))
        lo, _ = _physical(box, J, c)[0]
        assert lo == sign * 2 * h / 3


def test_lattice_is_anchored_at_zero():
    small, big = Box.centered(1, 2), Box.centered(1, 4)
    assert lattice_offset(small, 8) == (-128,)
    for g in range(3):
        cubes = {(c.k, _physical(small, 8, c)[0]) for c in enumerate_cubes(small, 8, g, -4, 1)}
        big_cubes = {(c.k, _physical(big, 10, c)[0]) for c in enumerate_cubes(big, 10, g, -4, 1)}
        assert cubes <= big_cubes


def test_family_measures_and_parents():
    box = Box.centered(1, 2)
    fam = cube_family(box, 5)
    assert len(fam) > 0 and np.all(fam.measure > 0)
    assert fam.volume.sum() > 0
    for q in range(len(fam)):
        p = fam.parent[q]
        if p >= 0:
            assert fam.level[p] == fam.level[q] + 1
            assert set(fam.entries(q)[0]) <= set(fam.entries(p)[0])


def test_anchored_family_contains_every_window():
    box = Box(1, 0, (0.0,))
    fam = anchored_family(box, 3)
    assert np.all(fam.measure > 0)
    # one cube per (level, corner) with the corner in [-L+1, N-1]
    assert len(fam) == sum(8 + 2**j - 1 for j in range(4))


def test_integrate_exact():
    box = Box(1, 0, (0.0,))
    f = MeshFn(box, 2, [1.0, 2.0, 3.0, 4.0])
    assert integrate(f, DyadicCube(0, 0, (0,))) == 2.5
    assert integrate(f, DyadicCube(0, -1, (1,))) == 1.75
    assert integrate(f, DyadicCube(0, 0, (5,))) == 0.0
    # odd level: grid 1 is shifted left by a third of the side
    c = DyadicCube(1, -1, (1,))
    assert _physical(box, 2, c)[0] == (Fraction(1, 3), Fraction(5, 6))
    assert integrate(f, c) == pytest.approx(17 / 12, rel=1e-15)
    assert essential_inf(f, c) == 2.0
    with pytest.raises(ValueError):
        essential_inf(f, DyadicCube(0, 0, (5,)))


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.floats(0, 1e6), min_size=16, max_size=16))
def test_binary_round_trip(vals):
    f = MeshFn(Box.centered(1, 3), 4, vals)
    g = MeshFn.from_bytes(f.to_bytes())
    assert g.box == f.box and g.J == f.J
    assert np.array_equal(g.values, f.values)


def test_binary_rejects_garbage(tmp_path):
    with pytest.raises(ValueError):
        MeshFn.from_bytes(b"XXXX" + bytes(40))
    f = power_weight(Box.centered(2, 1), 2, 0.5)
    f.save(tmp_path / "w.mxm")
    assert np.array_equal(MeshFn.load(tmp_path / "w.mxm").values, f.values)


def test_csv_layout():
    f = MeshFn(Box(1, 0, (0.0,)), 1, [0.5, 2.0])
    lines = f.to_csv().split("\r\n")
    assert lines[0] == "i0,x0,value"
    assert lines[1] == "0,0.25,0.5"
    assert len(lines) == 4 and lines[-1] == ""


def test_validation():
    box = Box(1, 0, (0.0,))
    with pytest.raises(ValueError):
        MeshFn(box, 2, [1.0, -1.0, 0, 0])
    with pytest.raises(ValueError):
        MeshFn(box, 2, [1.0, math.nan, 0, 0])
    with pytest.raises(ValueError):
        MeshFn(box, 2, [1.0, 2.0])
    f = MeshFn(box, 2, [1.0, 0, 0, 0])
    with pytest.raises(ValueError):
        f.values[0] = 3.0
    with pytest.raises(ValueError):
        Box(3, 0, (0.0, 0.0, 0.0))


def test_pointwise_map():
    box = Box(1, 0, (0.0,))
    f = MeshFn(box, 2, [1.0, 2.0, 0.0, 4.0])
    assert np.array_equal(pointwise_map(f, 2.0).values, [1, 4, 0, 16])
    assert np.array_equal(pointwise_map(f, Power(2)).values, [1, 4, 0, 16])
    assert np.array_equal(pointwise_map(f, f).values, [1, 4, 0, 16])
    assert pointwise_map(f, None) is f
    with pytest.raises(ValueError):
        pointwise_map(f, -1.0)


def test_power_weight():
    w = power_weight(Box.centered(1, 1), 2, 1.0)
    assert np.allclose(w.values, [0.75, 0.25, 0.25, 0.75])
    assert np.all(power_weight(Box.centered(2, 1), 2, 0.0).values == 1.0)
