"""Command-line front end.

Subcommands: ``run``, ``classify-weight``, ``maximal``, ``export-plot``, ``self-test``.

Exit codes: 0 success / every report passed, 1 some report failed, 2 a
precondition failed (the weight report is written next to the summary),
3 bad input (schema, missing file).  Every failure also prints one JSON line
``{"reason": ..., "detail": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .catalog import make_function, make_weight, resolve_function
from .experiments import PreconditionError, RatioReport, run_experiment
from .maximal import maximal_field
from .mesh import Box, cell_centers, pointwise_map
from .weights import classify
from .young import young_from_dict

SCHEMA_VERSION = 1
TOP_KEYS = {"schema_version", "seed", "mesh", "experiments"}
MESH_KEYS = {"n", "K", "J", "origin"}

EXIT_OK, EXIT_FAIL, EXIT_PRECONDITION, EXIT_INPUT = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


def _emit_reason(reason: str, detail) -> None:
    print(json.dumps({"reason": reason, "detail": detail}, sort_keys=True), file=sys.stderr)


def bundled_configs() -> list[str]:
    root = resources.files("mixmax") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def _resolve_config_path(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("mixmax") / "configs" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError("missing_file", f"config {path!r} not found")


def load_config(path: str) -> dict:
    p = _resolve_config_path(path)
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("invalid_json", str(exc)) from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    """Structural checks; entry-level keys are checked when the entry is built."""
    if not isinstance(cfg, dict):
        raise ConfigError("schema", "config must be a JSON object")
    extra = set(cfg) - TOP_KEYS
    if extra:
        raise ConfigError("schema", f"unknown top-level keys: {sorted(extra)}")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"schema_version must be {SCHEMA_VERSION}")
    mesh = cfg.get("mesh", {})
    if not isinstance(mesh, dict) or set(mesh) - MESH_KEYS:
        raise ConfigError("schema", f"mesh accepts only {sorted(MESH_KEYS)}")
    exps = cfg.get("experiments", [])
    if not isinstance(exps, list) or not all(isinstance(e, dict) for e in exps):
        raise ConfigError("schema", "experiments must be a list of objects")
    names = [e.get("name", e.get("variant")) for e in exps]
    if len(set(names)) != len(names):
        raise ConfigError("schema", "experiment names must be unique")


def _box(mesh: dict) -> tuple[Box, int]:
    n, K, J = int(mesh.get("n", 1)), int(mesh.get("K", 2)), int(mesh.get("J", 8))
    if "origin" in mesh:
        return Box(n, K, tuple(mesh["origin"])), J
    return Box.centered(n, K), J


def _threads(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("MIXMAX_THREADS")
    return int(env) if env else 1


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _emit_reason(exc.reason, str(exc))
        return EXIT_INPUT
    mesh = dict(cfg.get("mesh", {}))
    if args.mesh_level is not None:
        mesh["J"] = args.mesh_level
    if args.box_level is not None:
        mesh["K"] = args.box_level
    seed = int(cfg.get("seed", 0) if args.seed is None else args.seed)
    try:
        box, J = _box(mesh)
    except (ValueError, TypeError) as exc:
        _emit_reason("schema", str(exc))
        return EXIT_INPUT
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = dict(cfg, mesh={"n": box.n, "K": box.K, "J": J, "origin": list(box.origin)}, seed=seed)
    timings = {"load": time.perf_counter() - t0}
    summaries, code = [], EXIT_OK
    for entry in cfg.get("experiments", []):
        name = entry.get("name", entry.get("variant"))
        ts = time.perf_counter()
        try:
            rep = run_experiment(entry, box, J, seed)
        except PreconditionError as exc:
            _write(out / f"{name}.weight_report.json", json.dumps(exc.report, indent=2, sort_keys=True, default=_default))
            _emit_reason(exc.reason, {"experiment": name, "message": str(exc)})
            summaries.append({"name": name, "variant": entry.get("variant"), "pass": False, "reasons": [exc.reason]})
            code = max(code, EXIT_PRECONDITION)
            timings[name] = time.perf_counter() - ts
            continue
        except (ValueError, KeyError, TypeError) as exc:
            _emit_reason("schema", {"experiment": name, "message": str(exc)})
            return EXIT_INPUT
        timings[name] = time.perf_counter() - ts
        _write(out / f"{name}.csv", rep.to_csv())
        summaries.append(rep.summary())
        if not rep.passed:
            _emit_reason(rep.reasons[0] if rep.reasons else "failed", {"experiment": name})
            code = max(code, EXIT_FAIL)
    summary = {"schema_version": SCHEMA_VERSION, "pass": code == EXIT_OK, "experiments": summaries}
    _write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    manifest = {
        "config": str(args.config),
        "resolved": resolved,
        "version": __version__,
        "seed": seed,
        "backend": kernels.backend(),
        "threads": kernels.threads(),
        "timing_s": timings,
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=_default) + "\n")
    for s in summaries:
        print(f"{s['name']:<28} {'pass' if s['pass'] else 'FAIL'}  sup_ratio={s.get('sup_ratio', '-')}")
    return code


def _default(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _json_arg(text: str, what: str) -> dict:
    try:
        p = Path(text)
        if p.suffix == ".json" and p.exists():
            return json.loads(p.read_text(encoding="utf-8"))
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("invalid_json", f"{what}: {exc}") from exc


def cmd_classify(args) -> int:
    try:
        desc = _json_arg(args.weight, "weight")
        box = Box.centered(args.n, 2 if args.box_level is None else args.box_level)
        J = 7 if args.mesh_level is None else args.mesh_level
        make_weight(desc, box, J)
    except (ConfigError, ValueError, KeyError) as exc:
        _emit_reason(getattr(exc, "reason", "schema"), str(exc))
        return EXIT_INPUT
    rep = classify(lambda b, j: make_weight(desc, b, j), box, J, seed=args.seed or 0)
    if args.json:
        print(json.dumps(rep.to_dict(), indent=2, sort_keys=True, default=_default))
    else:
        print(rep.table())
    return EXIT_OK


def cmd_maximal(args) -> int:
    try:
        fdesc = _json_arg(args.function, "function")
        phi = young_from_dict(_json_arg(args.phi, "phi"))
        box = Box.centered(args.n, 2 if args.box_level is None else args.box_level)
        J = 8 if args.mesh_level is None else args.mesh_level
        f = make_function(resolve_function(fdesc, box, np.random.default_rng(args.seed or 0)), box, J)
        if args.weight:
            f = pointwise_map(f, make_weight(_json_arg(args.weight, "weight"), box, J))
        scope = int(args.scope) if args.scope.isdigit() else args.scope
        M = maximal_field(f, phi, args.gamma, scope)
    except (ConfigError, ValueError, KeyError) as exc:
        _emit_reason(getattr(exc, "reason", "schema"), str(exc))
        return EXIT_INPUT
    axes = np.meshgrid(*cell_centers(box, J), indexing="ij")
    cols = [a.ravel() for a in axes] + [f.flat, M.flat]
    names = ["x", "y"][: box.n] + ["f", "maximal"]
    lines = [",".join(names)] + [",".join("%.17g" % c for c in row) for row in zip(*cols)]
    text = "\r\n".join(lines) + "\r\n"
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def export_plot_text(csv_text: str) -> str:
    """Whitespace-separated columns ``t lhs rhs ratio clamped`` from a report CSV."""
    import csv
    import io

    rows = list(csv.reader(io.StringIO(csv_text)))
    if not rows or rows[0][:4] != ["t", "lhs", "rhs", "ratio"]:
        raise ValueError("not a ratio report CSV")
    out = ["# t lhs rhs ratio clamped"]
    for row in rows[1:]:
        t, lhs, rhs, ratio = row[:4]
        clamped = row[4] if len(row) > 4 else "0"
        out.append(" ".join([t, lhs, rhs, ratio if ratio else "nan", clamped]))
    return "\n".join(out) + "\n"


def cmd_export_plot(args) -> int:
    p = Path(args.report)
    if not p.is_file():
        _emit_reason("missing_report", str(p))
        return EXIT_INPUT
    try:
        text = export_plot_text(p.read_text(encoding="utf-8"))
    except ValueError as exc:
        _emit_reason("invalid_report", str(exc))
        return EXIT_INPUT
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def self_test() -> dict[str, bool]:
    """Fast internal checks: kernel backends agree, classical oracle, lemma bound, bundled config."""
    from .luxemburg import family_norms
    from .mesh import MeshFn, cube_family
    from .young import LLogL, Power, ratio_lemma_f

    out = {}
    rng = np.random.default_rng(0)
    box = Box(1, 0, (0.0,))
    f = MeshFn(box, 6, rng.exponential(size=64))
    fam = cube_family(box, 6)
    results = []
    for name in kernels.available_backends():
        with kernels.use_backend(name):
            results.append(family_norms(f, fam, LLogL(1.0, 1.0))[0])
    out["backends_agree"] = all(np.allclose(r, results[0], rtol=1e-12, atol=0) for r in results)
    # classical dyadic maximal function via prefix sums
    vals, N = f.values, 64
    pref = np.concatenate([[0.0], np.cumsum(vals)])
    oracle = np.zeros(N)
    L = 1
    while L <= N:
        for s in range(0, N, L):
            oracle[s : s + L] = np.maximum(oracle[s : s + L], (pref[s + L] - pref[s]) / L)
        L *= 2
    M = maximal_field(f, Power(1.0), 0.0, "grid0").values
    out["classical_oracle"] = bool(np.allclose(M, oracle, rtol=1e-12, atol=0))
    x = np.geomspace(1e-6, 1e6, 10001)
    fx = ratio_lemma_f(x)
    out["ratio_lemma"] = bool(fx.max() <= math.exp(1 / math.e) + 1e-12 and fx.min() >= 1 - 1e-12)
    return out


def cmd_self_test(args) -> int:
    res = self_test()
    for k, v in res.items():
        print(f"{k:<20} {'pass' if v else 'FAIL'}")
    if not all(res.values()):
        _emit_reason("self_test", [k for k, v in res.items() if not v])
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mixmax", description="Mixed weak-type inequality verification on dyadic meshes.")
    ap.add_argument("--version", action="version", version=f"mixmax {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: $MIXMAX_THREADS or 1)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--mesh-level", type=int, default=None, help="J: 2**J cells per side")
    common.add_argument("--box-level", type=int, default=None, help="K: box side 2**K")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run the experiments of a config file")
    p.add_argument("--config", required=True, help="config path or bundled config name")
    p.add_argument("--out-dir", default="mixmax-out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("classify-weight", parents=[common], help="constants and verdicts for a weight descriptor")
    p.add_argument("--weight", required=True, help='JSON descriptor or .json file, e.g. \'{"kind": "power", "beta": 0.5}\'')
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("maximal", parents=[common], help="cellwise maximal field of a function")
    p.add_argument("--function", required=True)
    p.add_argument("--phi", default='{"kind": "power", "p": 1}')
    p.add_argument("--weight", default=None, help="multiply the function by this weight first")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--scope", default="all", help="all, grid0 or a grid id")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_maximal)

    p = sub.add_parser("export-plot", parents=[common], help="columnar plot data from a report CSV")
    p.add_argument("--report", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_plot)

    p = sub.add_parser("self-test", parents=[common], help="quick internal consistency checks")
    p.set_defaults(func=cmd_self_test)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        kernels.set_threads(_threads(args.threads))
    except ValueError as exc:
        _emit_reason("invalid_threads", str(exc))
        return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
