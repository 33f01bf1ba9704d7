"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The lines are printed again at the end of the run under "acceptance criteria".
"""

import hashlib
import json
import math
import time
from importlib import resources

import numpy as np
import pytest

from instances import random_instance
from mixmax.catalog import make_function, make_weight, resolve_function
from mixmax.cli import main
from mixmax.decomposition import claims_check, cz_levelset, principal_cubes, sparsity_bound, sparsity_check, stratify
from mixmax.experiments import MixedExperiment, refinement_meshes, run_experiment, t_sweep, verify_theorem1
from mixmax.luxemburg import jensen_bound, jensen_check, lux_norm
from mixmax.maximal import hedberg_check, maximal_field
from mixmax.mesh import Box, DyadicCube, MeshFn
from mixmax.young import LLogL, Power, Spliced, ratio_lemma_f
from oracles import dense_luxemburg, dyadic_maximal_1d

STABILITY = 0.25


def bundled(name):
    return json.loads((resources.files("mixmax") / "configs" / name).read_text())


def bundled_box(cfg):
    mesh = cfg["mesh"]
    return Box.centered(mesh["n"], mesh["K"]), mesh["J"]


def rel_change(new, old):
    return 0.0 if new == old else abs(new - old) / old


def test_criterion_01_decomposition_invariants(criterion):
    t0 = time.perf_counter()
    violations, cubes, checked_cz = 0, 0, 0
    for seed in range(50):
        f, v, u, phi, r = random_instance(seed)
        for a in (2.0, 4.0):
            strat = stratify(f, v, r, phi, a)
            rep = strat.verify()
            violations += rep.get("sandwich_g", 0) + rep.get("sandwich_vr", 0) + rep.get("omega_union", 0) + rep.get("disjoint", 0)
            cubes += strat.counts()["cubes"] + strat.counts()["sub_cubes"]
            if seed % 10 == 0:
                # the strata are exactly the level-set decompositions of g = f v
                g = f.with_values(f.values * v.values)
                for s in strat.strata:
                    got = {strat.fam.cubes[q] for q in s.cubes}
                    violations += int(got != set(cz_levelset(g, phi, 0, a**s.k)))
                    checked_cz += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 60 and cubes > 0
    criterion(1, ok, f"{cubes} cubes, {checked_cz} level sets cross-checked, {violations} sandwich violations, {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_02_sparsity(criterion):
    worst = {2.0: 0.0, 4.0: 0.0}
    for seed in range(50):
        f, v, u, phi, r = random_instance(seed)
        for a in worst:
            worst[a] = max(worst[a], sparsity_check(stratify(f, v, r, phi, a)))
    ok = all(worst[a] <= sparsity_bound(1, a) + 1e-9 for a in worst)
    criterion(2, ok, ", ".join(f"a={a:g}: max {worst[a]:.4f} <= {sparsity_bound(1, a):.4f}" for a in worst))
    assert ok


def test_criterion_03_luxemburg_oracle(criterion):
    rng = np.random.default_rng(2024)
    box, J = Box(1, 0, (0.0,)), 6
    phis = [Power(1), Power(2), Power(3.5), LLogL(1, 1), LLogL(2, 1), LLogL(1, 2), Spliced(Power(2), LLogL(1, 1), 1.0)]
    worst, homog, mono = 0.0, 0.0, 0
    for i in range(200):
        phi = phis[i % len(phis)]
        vals = rng.exponential(size=2**J) * (rng.random(2**J) < 0.6) * 10 ** rng.uniform(-3, 3)
        f = MeshFn(box, J, vals)
        k = int(rng.integers(-J, 1))
        Q = DyadicCube(int(rng.integers(0, 3)), k, (int(rng.integers(0, 2 ** (-k))),))
        got = lux_norm(f, Q, phi).norm
        ref = dense_luxemburg(f, Q, phi)
        worst = max(worst, 0.0 if got == ref else abs(got - ref) / ref)
        c = 10 ** rng.uniform(-2, 2)
        scaled = lux_norm(f.with_values(c * vals), Q, phi).norm
        homog = max(homog, 0.0 if got == 0 else abs(scaled - c * got) / (c * got))
        bigger = lux_norm(f.with_values(vals + rng.exponential(size=2**J)), Q, phi).norm
        mono += int(bigger < got * (1 - 1e-10))
    ok = worst <= 1e-6 and homog <= 1e-6 and mono == 0
    criterion(3, ok, f"200 triples: max rel error {worst:.2e} (<= 1e-6), homogeneity {homog:.2e}, {mono} monotonicity violations")
    assert ok


def test_criterion_04_classical_oracle(criterion):
    rng = np.random.default_rng(4)
    mismatches = 0
    for J in range(1, 9):
        for _ in range(5):
            f = MeshFn(Box(1, 0, (0.0,)), J, rng.exponential(size=2**J) * (rng.random(2**J) < 0.5))
            M = maximal_field(f, Power(1.0), 0.0, "grid0").values
            mismatches += int(not np.array_equal(M, dyadic_maximal_1d(f.values)))
    box = Box(1, 2, (0.0,))
    one = MeshFn.constant(box, 8, 1.0)
    sups = []
    for seed in range(5):
        f = make_function(resolve_function({"kind": "indicator_mix", "count": 6, "resolution": 8}, box, np.random.default_rng(seed)), box, 8)
        exp = MixedExperiment("theorem1", one, one, f, 1.0, Power(1.0), t_sweep(float(f.values.max())), scope="grid0")
        sups.append(verify_theorem1(exp).sup_ratio)
    ok = mismatches == 0 and max(sups) <= 1.0
    criterion(4, ok, f"{mismatches} mismatches vs exact prefix-sum oracle (J=1..8), theorem 1 with u=v=1: max sup_ratio {max(sups):.4f} (<= 1)")
    assert ok


def test_criterion_05_ratio_lemma(criterion):
    x = np.concatenate([np.geomspace(1e-9, 1e9, 50_000), np.linspace(1e-4, 20.0, 49_999), [1.0 / (math.e - 1.0)]])
    fx = ratio_lemma_f(x)
    top, bottom = float(fx.max()), float(fx.min())
    ok = x.size == 100_000 and top <= math.exp(1 / math.e) + 1e-12 and bottom >= 1 - 1e-12
    criterion(5, ok, f"1e5 points: max {top:.12f} (bound e^(1/e) = {math.exp(1 / math.e):.12f}), min {bottom:.12f}")
    assert ok


def test_criterion_06_jensen(criterion):
    rng = np.random.default_rng(6)
    box, J = Box(1, 0, (0.0,)), 6
    worst = {}
    for phi in (LLogL(1, 1), LLogL(2, 1)):
        for r in (1, 2):
            ratios = []
            for _ in range(200):
                f = MeshFn(box, J, rng.exponential(size=2**J) * (rng.random(2**J) < 0.7) * 10 ** rng.uniform(-2, 2))
                k = int(rng.integers(-J, 1))
                Q = DyadicCube(int(rng.integers(0, 3)), k, (int(rng.integers(0, 2 ** (-k))),))
                ratios.append(jensen_check(f, Q, phi, r).value / jensen_bound(phi, r))
            worst[(str(phi), r)] = max(ratios)
    ok = all(w <= 1.0 for w in worst.values())
    criterion(6, ok, "max ratio / (phi(1)+1)^r over 4 x 200 trials: " + f"{max(worst.values()):.4f} (<= 1)")
    assert ok


def test_criterion_07_mixed_inequality_stability(criterion):
    cfg = bundled("catalog_pair.json")
    box, J = bundled_box(cfg)
    t0 = time.perf_counter()
    parts, ok = [], True
    for entry in cfg["experiments"]:
        if entry["variant"] not in ("theorem1", "strong_form", "corollary", "sawyer"):
            continue
        rep = run_experiment(entry, box, J, cfg["seed"])
        good = math.isfinite(rep.sup_ratio) and all(d < STABILITY for d in rep.refinement_deltas.values())
        ok &= good
        deltas = ", ".join(f"{k} {v:.3f}" for k, v in rep.refinement_deltas.items())
        parts.append(f"{entry['name']} sup {rep.sup_ratio:.3f} ({deltas}){'' if good else ' unstable'}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    criterion(7, ok, "; ".join(parts) + f"; {elapsed:.0f} s")
    assert ok


def test_criterion_08_fractional_stability(criterion):
    cfg = bundled("fractional.json")
    box, J = bundled_box(cfg)
    parts, ok = [], True
    entries = {e["name"]: e for e in cfg["experiments"]}
    for name in ("theorem3", "theorem4_delta1"):
        t0 = time.perf_counter()
        rep = run_experiment(entries[name], box, J, cfg["seed"])
        elapsed = time.perf_counter() - t0
        good = math.isfinite(rep.sup_ratio) and all(d < STABILITY for d in rep.refinement_deltas.values()) and elapsed < 600
        ok &= good
        parts.append(f"{name} sup {rep.sup_ratio:.3f} max delta {max(rep.refinement_deltas.values()):.3f}")
    entry3 = entries["theorem3"]
    fdesc = resolve_function(entry3["f"], box, np.random.default_rng(cfg["seed"]))
    for params in ((1, 1, 0, 0.5, 4 / 3), (1, 1, 1, 0.5, 1.0)):
        vals = {}
        for key, (b, j) in refinement_meshes(box, J).items():
            vals[key] = hedberg_check(make_function(fdesc, b, j), make_weight(entry3["v"], b, j), *params)
        deltas = [rel_change(vals[k], vals["base"]) for k in ("J+1", "K+2")]
        good = math.isfinite(vals["base"]) and max(deltas) < STABILITY
        ok &= good
        parts.append(f"hedberg delta={params[2]} sup {vals['base']:.3f} max delta {max(deltas):.3f}")
    criterion(8, ok, "; ".join(parts))
    assert ok


def test_criterion_09_claims(criterion):
    catalog = bundled("catalog_pair.json")["experiments"][0]
    box = Box(1, 2, (0.0,))
    u, v = make_weight(catalog["u"], box, 8), make_weight(catalog["v"], box, 8)
    phi = LLogL(1, 1)
    instances = []
    for seed in range(10):
        fdesc = resolve_function(catalog["f"], box, np.random.default_rng(seed))
        instances.append((make_function(fdesc, box, 8), v, u, phi, 1.0))
    instances += [random_instance(seed) for seed in range(50)]
    finite, h1_ok, residual, fitted = True, True, 0.0, 0
    for f, vv, uu, ph, r in instances:
        strat = stratify(f, vv, r, ph)
        forest = principal_cubes(strat, uu)
        c = claims_check(strat, forest, uu, vv, r, ph, f)
        finite &= all(math.isfinite(c[k]) for k in ("main_mass", "h1_over_u", "low_mass", "h2_over_u"))
        h1_ok &= c["h1_bound_ok"]
        residual = max(residual, c["decay"]["residual"])
        fitted += c["decay"]["points"] >= 2
    ok = finite and h1_ok and residual < 1.0
    criterion(9, ok, f"{len(instances)} instances: claims finite={finite}, h1 <= 2[u]_A1 u: {h1_ok}, max lemma fit residual {residual:.3f} (< 1, {fitted} multi-point fits)")
    assert ok


def test_criterion_10_determinism(criterion, tmp_path, capsys):
    digests = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["run", "--config", "theorem1_sawyer.json", "--out-dir", str(out)]) == 0
        digests.append({p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(out.glob("*.csv"))})
    capsys.readouterr()
    ok = digests[0] == digests[1] and len(digests[0]) == 2
    criterion(10, ok, f"{len(digests[0])} CSVs byte-identical across two runs: {ok}")
    assert ok
