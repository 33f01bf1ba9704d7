import math

import numpy as np
import pytest

from mixmax.catalog import make_weight
from mixmax.mesh import Box, DyadicCube, MeshFn, cube_family, power_weight
from mixmax.weights import (
    a1_constant,
    ainf_pair,
    ap_constant,
    averages,
    classify,
    rh_constant,
    verdict,
    weight_report,
)

UNIT = Box(1, 0, (0.0,))
TOP = [DyadicCube(0, 0, (0,))]


def test_two_cell_constants():
    w = MeshFn(UNIT, 1, [1.0, 4.0])
    assert ap_constant(w, 2, TOP) == pytest.approx(2.5 * 0.625)
    assert a1_constant(w, TOP) == pytest.approx(2.5)
    assert rh_constant(w, 2, TOP) == pytest.approx(math.sqrt(8.5) / 2.5)
    # A_p constants decrease in p
    cs = [ap_constant(w, p, TOP) for p in (1.5, 2, 4, 8)]
    assert all(a >= b for a, b in zip(cs, cs[1:]))


def test_constant_weight_is_trivial():
    w = MeshFn.constant(Box.centered(1, 2), 6, 3.0)
    rep = weight_report(w)
    assert rep.a1_constant == pytest.approx(1.0)
    assert all(c == pytest.approx(1.0) for c in rep.ap_constants.values())
    assert all(c == pytest.approx(1.0) for c in rep.rh_constants.values())
    C, eps = rep.ainf_pair
    assert eps == 1.0 and C == pytest.approx(1.0)


def test_ainf_pair_is_admissible(rng):
    w = power_weight(Box.centered(1, 2), 6, 0.5)
    fam = cube_family(w.box, 6)
    C, eps = ainf_pair(w, fam, 16, 0)
    assert 0 < eps <= 1 and C >= 1
    # the pair bounds every dyadic descendant ratio
    sums = averages(w.flat, fam) * fam.measure
    for q in range(len(fam)):
        p = fam.parent[q]
        if p >= 0:
            x = fam.measure[q] / fam.measure[p]
            assert sums[q] / sums[p] <= C * x**eps * (1 + 1e-12)


def test_ainf_pair_deterministic():
    w = power_weight(Box.centered(1, 2), 6, -0.5)
    assert ainf_pair(w, cube_family(w.box, 6), 16, 7) == ainf_pair(w, cube_family(w.box, 6), 16, 7)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        ap_constant(MeshFn(UNIT, 1, [0.0, 1.0]), 2, TOP)
    with pytest.raises(ValueError):
        ap_constant(MeshFn(UNIT, 1, [1.0, 1.0]), 1, TOP)
    with pytest.raises(ValueError):
        a1_constant(MeshFn(UNIT, 1, [1.0, 1.0]), [])


@pytest.mark.parametrize(
    "growths,expected",
    [([1.0, 1.1], "member"), ([1.0, 3.0], "non-member"), ([1.0, 1.5], "inconclusive"), ([math.inf], "non-member")],
)
def test_verdict(growths, expected):
    assert verdict(growths) == expected


def _classify(desc):
    return classify(lambda b, j: make_weight(desc, b, j), Box.centered(1, 2), 6)


def test_classify_sqrt():
    rep = _classify({"kind": "power", "beta": 0.5})
    assert rep.verdicts["A_inf"] == "member"
    assert rep.verdicts["A_2"] == "member"
    assert len(rep.trend["a1"]) == 3


def test_classify_steep_singularity():
    rep = _classify({"kind": "power", "beta": -2})
    assert rep.verdicts["A_inf"] == "non-member"


def test_classify_linear_not_a1():
    rep = _classify({"kind": "power", "beta": 1})
    assert rep.verdicts["A1"] == "non-member"
    assert rep.verdicts["A_inf"] == "member"


def test_report_table_and_dict():
    rep = weight_report(MeshFn.constant(Box.centered(1, 1), 4, 1.0))
    text = rep.table()
    assert "A1" in text and "RH_2" in text
    d = rep.to_dict()
    assert set(d["ainf_pair"]) == {"C", "eps"}
