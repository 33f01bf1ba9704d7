import csv
import io
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixmax.catalog import random_indicator_mix
from mixmax.experiments import (
    COROLLARY_C2,
    MixedExperiment,
    PreconditionError,
    build_experiment,
    check_preconditions,
    modular_check,
    refinement_meshes,
    run_experiment,
    run_experiments,
    support_threshold_operator,
    t_sweep,
    verify_corollary,
    verify_modular_lemma,
    verify_sawyer,
    verify_strong_form,
    verify_theorem1,
    verify_theorem3,
    verify_theorem4,
)
from mixmax.mesh import Box, MeshFn, power_weight
from mixmax.young import LLogL, Power, Spliced

BOX = Box(1, 2, (0.0,))
J = 7
PHI = LLogL(1.0, 1.0)
U_CAT = {"kind": "power", "beta": -0.5}
V_CAT = {"kind": "power", "beta": 1}


def ones(box=BOX, J=J):
    return MeshFn.constant(box, J, 1.0)


def indicator_mix(seed, box=BOX, J=J, count=6):
    return random_indicator_mix(box, J, np.random.default_rng(seed), count=count)


def catalog_experiment(seed=1, variant="theorem1", **kw):
    f = indicator_mix(seed)
    u, v = power_weight(BOX, J, -0.5), power_weight(BOX, J, 1.0)
    return MixedExperiment(variant, u, v, f, 1.0, PHI, t_sweep(float(f.values.max())), **kw)


def entry(variant="theorem1", **kw):
    d = {"name": variant, "variant": variant, "u": U_CAT, "v": V_CAT, "r": 1, "f": {"kind": "indicator_mix", "count": 4, "resolution": 5}}
    d.update(kw)
    return d


# ---------------------------------------------------------------- sweeps and validation


def test_t_sweep_is_geometric_and_relative():
    ts = t_sweep(5.0)
    assert len(ts) == 48
    assert ts[0] == pytest.approx(5e-3) and ts[-1] == pytest.approx(5e3)
    assert np.allclose(ts[1:] / ts[:-1], ts[1] / ts[0])
    assert np.allclose(t_sweep(5.0, relative=False), t_sweep(1.0))
    assert len(t_sweep(0.0)) == 48 and t_sweep(0.0)[0] == pytest.approx(1e-3)
    assert t_sweep(1.0, count=0).size == 0


@pytest.mark.parametrize("kw", [{"count": -1}, {"t_min": 0.0}, {"t_min": 2.0, "t_max": 1.0}])
def test_t_sweep_rejects_bad_ranges(kw):
    with pytest.raises(ValueError):
        t_sweep(1.0, **kw)


def test_experiment_validation():
    f = indicator_mix(0)
    with pytest.raises(ValueError):
        MixedExperiment("theorem9", ones(), ones(), f, 1.0, PHI, t_sweep(1.0))
    with pytest.raises(ValueError):
        MixedExperiment("theorem1", ones(), ones(), f, 1.0, PHI, np.array([2.0, 1.0]))
    with pytest.raises(ValueError):
        MixedExperiment("theorem1", ones().with_values(np.zeros((2**J,))), ones(), f, 1.0, PHI, t_sweep(1.0))
    with pytest.raises(ValueError):
        MixedExperiment("theorem1", ones(J=6), ones(), f, 1.0, PHI, t_sweep(1.0))
    with pytest.raises(ValueError):
        MixedExperiment("theorem1", ones(), ones(), f, 0.5, PHI, t_sweep(1.0))


def test_build_experiment_rejects_unknown_keys():
    with pytest.raises(ValueError):
        build_experiment(entry(colour="red"), BOX, 5)
    with pytest.raises(ValueError):
        build_experiment(entry("theorem3", params={"gamma": 0.5, "p": 1.5, "eps": 1}), BOX, 5)
    with pytest.raises(ValueError):
        build_experiment(entry("theorem4", params={"delta": 0}), BOX, 5)
    with pytest.raises(ValueError):
        build_experiment(entry(sweep={"t_min": 1e-3, "steps": 4}), BOX, 5)


# ---------------------------------------------------------------- ratio sweeps


def test_zero_function_gives_empty_ratio_rows():
    f = MeshFn.constant(BOX, J, 0.0)
    exp = MixedExperiment("theorem1", ones(), ones(), f, 1.0, PHI, t_sweep(0.0))
    rep = verify_theorem1(exp)
    assert rep.sup_ratio == 0.0 and rep.passed
    assert np.all(rep.lhs == 0) and np.all(rep.rhs == 0)
    assert np.all(np.isnan(rep.ratio))
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert all(row[3] == "" for row in rows[1:])


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_classical_weak_type_constant_is_at_most_one(seed):
    f = indicator_mix(seed)
    exp = MixedExperiment("theorem1", ones(), ones(), f, 1.0, Power(1.0), t_sweep(float(f.values.max())), scope="grid0")
    rep = verify_theorem1(exp)
    assert rep.sup_ratio <= 1.0
    assert rep.passed


@pytest.mark.parametrize("verify", [verify_theorem1, verify_strong_form, verify_sawyer, verify_corollary])
def test_sweeps_are_monotone_and_finite(verify):
    rep = verify(catalog_experiment())
    assert np.all(np.diff(rep.lhs) <= 0) and np.all(np.diff(rep.rhs) <= 0)
    assert np.isfinite(rep.sup_ratio)
    assert rep.passed, rep.reasons


def test_joint_scaling_of_f_and_t_leaves_the_sweep_unchanged():
    exp = catalog_experiment()
    scaled = MixedExperiment("theorem1", exp.u, exp.v, exp.f.with_values(4.0 * exp.f.values), 1.0, PHI, 4.0 * exp.t_sweep)
    a, b = verify_theorem1(exp), verify_theorem1(scaled)
    assert np.allclose(a.lhs, b.lhs, rtol=1e-12)
    assert np.allclose(a.rhs, b.rhs, rtol=1e-12)


def test_maximal_denominator_is_smaller_than_strong_form():
    exp = catalog_experiment()
    weak, strong = verify_theorem1(exp), verify_strong_form(exp)
    # M_phi v >= v, so the theorem-1 quotient never exceeds the strong-form quotient
    assert np.all(weak.lhs <= strong.lhs)
    assert np.array_equal(weak.rhs, strong.rhs)


def test_corollary_with_psi_equal_phi_reduces_to_theorem1():
    exp = catalog_experiment()
    a, c = verify_theorem1(exp), verify_corollary(exp)
    assert c.info["C2"] == 1
    assert np.array_equal(a.lhs, c.lhs) and np.array_equal(a.rhs, c.rhs)
    assert c.sup_ratio == a.sup_ratio == c.info["C1"]


def test_corollary_with_distinct_splice():
    psi = Spliced(Power(2.0), LLogL(1.0, 1.0), 1.0)
    exp = catalog_experiment(psi=psi)
    rep = verify_corollary(exp)
    assert np.isfinite(rep.sup_ratio) and rep.info["C2"] == 1
    assert rep.info["linf_ratio"] <= 1.0 + 1e-8
    tight = verify_corollary(exp, ceiling=0.5 * rep.sup_ratio)
    assert tight.info["C2"] in COROLLARY_C2 and tight.info["C2"] > 1
    assert tight.sup_ratio <= 0.5 * rep.sup_ratio or "ceiling_exceeded" in tight.reasons


def test_ceiling_is_reported():
    rep = verify_theorem1(catalog_experiment(), ceiling=1e-6)
    assert not rep.passed and "ceiling_exceeded" in rep.reasons


def test_theorem3_with_unit_weights():
    f = indicator_mix(2)
    exp = MixedExperiment("theorem3", ones(), ones(), f, 1.0, PHI, t_sweep(float(f.values.max())), params={"delta": 0.0, "gamma": 0.5, "p": 4 / 3})
    rep = verify_theorem3(exp)
    assert rep.passed and 0 < rep.sup_ratio < np.inf
    assert rep.info["q"] == pytest.approx(4.0)


def test_theorem4_clamps_overflowing_right_hand_side():
    f = indicator_mix(2)
    exp = MixedExperiment("theorem4", ones(), ones(), f, 1.0, PHI, t_sweep(float(f.values.max())), params={"delta": 50.0, "gamma": 0.5})
    rep = verify_theorem4(exp)
    assert rep.clamped.any()
    assert np.all(rep.rhs[rep.clamped] == sys.float_info.max)
    assert np.isfinite(rep.sup_ratio)
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert sum(row[4] == "1" for row in rows[1:]) == int(rep.clamped.sum())
    assert rep.summary()["clamped_rows"] == int(rep.clamped.sum())


def test_csv_layout():
    rep = verify_theorem1(catalog_experiment())
    text = rep.to_csv()
    assert text.endswith("\r\n") and "\n" not in text.replace("\r\n", "")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["t", "lhs", "rhs", "ratio", "clamped"]
    assert len(rows) == len(rep.t) + 1
    assert float(rows[1][0]) == rep.t[0]


# ---------------------------------------------------------------- modular lemma


def test_modular_lemma_holds_for_mixed_quotient():
    res = modular_check(catalog_experiment())
    assert res.passed and res.violations == 0
    assert 0 < res.C < np.inf


def test_modular_lemma_holds_for_identity():
    f = indicator_mix(3)
    res = verify_modular_lemma(lambda g: g.values, f, np.ones(2**J), Power(1.0), t_sweep(float(f.values.max())))
    assert res.passed


def test_modular_lemma_detects_non_subadditive_operator():
    # the spikes alone cover too little to switch the operator on, the full
    # function does, so the truncated bound at t = 0.065 fails
    vals = np.full(2**J, 0.03)
    vals[::10] = 0.07
    f = MeshFn(BOX, J, vals)
    res = verify_modular_lemma(support_threshold_operator(0.5), f, np.ones(2**J), Power(1.0), np.array([0.065]))
    assert not res.passed and res.violations == 1


# ---------------------------------------------------------------- runs and preconditions


def test_refinement_meshes():
    m = refinement_meshes(Box(1, 2, (-2.0,)), 8)
    assert m["base"] == (Box(1, 2, (-2.0,)), 8)
    assert m["J+1"] == (Box(1, 2, (-2.0,)), 9)
    assert m["K+2"] == (Box(1, 4, (-8.0,)), 10)


def test_run_is_deterministic():
    box = Box.centered(1, 2)
    a = run_experiment(entry(), box, 6, seed=3)
    b = run_experiment(entry(), box, 6, seed=3)
    c = run_experiment(entry(), box, 6, seed=4)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() != c.to_csv()
    assert set(a.refinement_deltas) == {"J+1", "K+2"}


def test_run_experiments_keeps_order_and_matches_serial():
    box = Box.centered(1, 2)
    bad_v = {"kind": "power", "beta": -2}
    entries = [entry("strong_form", name="a"), entry("sawyer", name="b", refine=False), entry("theorem1", name="c", v=bad_v)]
    serial = run_experiments(entries, box, 6, seed=1)
    threaded = run_experiments(entries, box, 6, seed=1, workers=3)
    assert [getattr(r, "name", None) for r in serial[:2]] == ["a", "b"]
    assert isinstance(serial[2], PreconditionError) and isinstance(threaded[2], PreconditionError)
    assert serial[0].to_csv() == threaded[0].to_csv() and serial[1].to_csv() == threaded[1].to_csv()
    assert serial[1].refinement_deltas == {}


@pytest.mark.parametrize(
    "config_entry, reason",
    [
        (entry("theorem1", v={"kind": "power", "beta": -2}), "v_power_not_Ainf"),
        (entry("theorem1", r=2, phi={"kind": "power", "p": 1}), "phi_not_in_Fr"),
        (entry("theorem3", params={"delta": 0, "gamma": 0.5, "p": 3}), "parameters"),
        (entry("corollary", phi={"kind": "llogl", "r": 1, "delta": 1}, psi={"kind": "power", "p": 2}), "psi_not_equivalent"),
    ],
)
def test_precondition_failures(config_entry, reason):
    with pytest.raises(PreconditionError) as exc:
        check_preconditions(config_entry, Box.centered(1, 2), 6)
    assert exc.value.reason == reason


def test_preconditions_pass_for_catalog_pair():
    out = check_preconditions(entry("theorem1", phi={"kind": "llogl", "r": 1, "delta": 1}), Box.centered(1, 2), 6)
    assert out["u"]["verdict"] != "non-member" and out["v_power"]["verdict"] != "non-member"
    assert "Fr" in out
