"""Command-line front end: config parsing, pipeline orchestration, file output.

Configuration is a single JSON file; individual fields can be overridden on
the command line with dotted paths (``--set physical.g=9.81``).  All floats
are printed with 17 significant digits so identical configs give
byte-identical outputs.

Exit codes: 0 ok, 1 config error, 2 solvability condition failed,
3 numerical failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import continuation, laminar, oracles, reconstruct, sturm
from .errors import ConditionFailedError, DomainError, IceWaveError, NumericalError
from .laminar import PhysicalParams
from .vorticity import VorticityProfile

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CONDITION = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4

_ENV_OUTDIR = "ICEWAVE_OUTDIR"

_NUMERICS_DEFAULTS = {
    "N_q": 64,
    "N_p": 129,
    "N_p_laminar": 257,
    "newton_tol": 1e-10,
    "max_iter": 30,
    "s_max": 1e-3,
    "n_steps": 4,
}


class ConfigError(IceWaveError):
    """Bad or missing configuration field; carries the field name."""

    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


@dataclass
class RunConfig:
    params: PhysicalParams
    profile: VorticityProfile
    numerics: dict
    outdir: Path
    write_fields: bool
    raw: dict


def _require(mapping, field, context):
    if field not in mapping:
        raise ConfigError(f"{context}.{field}", "missing")
    return mapping[field]


def parse_config(raw: dict, outdir_override=None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    phys = _require(raw, "physical", "<root>")
    try:
        params = PhysicalParams(
            g=float(_require(phys, "g", "physical")),
            d=float(_require(phys, "depth", "physical")),
            p0=float(_require(phys, "p0", "physical")),
            alpha=float(_require(phys, "alpha", "physical")),
        )
    except (TypeError, ValueError, DomainError) as exc:
        raise ConfigError("physical", str(exc))

    vort = _require(raw, "vorticity", "<root>")
    kind = _require(vort, "kind", "vorticity")
    try:
        if kind == "zero":
            profile = VorticityProfile.zero(params.p0)
        elif kind == "constant":
            profile = VorticityProfile.constant(
                float(_require(vort, "gamma0", "vorticity")), params.p0
            )
        elif kind == "tabulated":
            if "csv" in vort:
                profile = VorticityProfile.from_csv(vort["csv"])
            else:
                samples = np.asarray(_require(vort, "samples", "vorticity"), dtype=float)
                profile = VorticityProfile.tabulated(samples[:, 0], samples[:, 1])
        else:
            raise ConfigError("vorticity.kind", f"unknown kind '{kind}'")
        if abs(profile.p0 - params.p0) > 1e-14:
            raise ConfigError("vorticity", "profile p0 must equal physical.p0")
    except (TypeError, ValueError, OSError, DomainError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("vorticity", str(exc))

    numerics = dict(_NUMERICS_DEFAULTS)
    numerics.update(raw.get("numerics", {}))
    for key in ("newton_tol",):
        if not numerics[key] > 0.0:
            raise ConfigError(f"numerics.{key}", "must be positive")
    n_q = int(numerics["N_q"])
    if n_q < 4 or n_q & (n_q - 1):
        raise ConfigError("numerics.N_q", f"must be a power of two >= 4, got {n_q}")
    for key in ("N_p", "N_p_laminar"):
        if int(numerics[key]) % 2 == 0:
            raise ConfigError(f"numerics.{key}", f"must be odd, got {numerics[key]}")

    outputs = raw.get("outputs", {})
    outdir = outdir_override or outputs.get("dir") or os.environ.get(_ENV_OUTDIR) \
        or "icewave_out"
    return RunConfig(
        params=params,
        profile=profile,
        numerics=numerics,
        outdir=Path(outdir),
        write_fields=bool(outputs.get("write_fields", True)),
        raw=raw,
    )


def load_config(path, overrides=(), outdir_override=None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON in {path}: {exc}")
    for item in overrides:
        raw = _apply_override(raw, item)
    return parse_config(raw, outdir_override=outdir_override)


def _apply_override(raw: dict, item: str) -> dict:
    if "=" not in item:
        raise ConfigError("<override>", f"expected key=value, got '{item}'")
    key, _, value = item.partition("=")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    node = raw
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "path collides with a non-object value")
    node[parts[-1]] = parsed
    return raw


# ----------------------------------------------------------------------------
# JSON/CSV helpers (17 significant digits, deterministic key order)
# ----------------------------------------------------------------------------

def _fmt(x) -> str:
    return f"{x:.17g}"


def _json_value(x):
    if isinstance(x, float) and np.isinf(x):
        return "inf"
    return x


def _write_json(payload: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

def cmd_laminar(cfg: RunConfig) -> int:
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    exists, limit = laminar.check_existence(cfg.profile, cfg.params.d)
    conditions = {"cond1": bool(exists), "limit": _json_value(limit)}
    if not exists:
        conditions.update({"theta": None, "cond2_value": None, "cond2": None})
        _write_json(conditions, cfg.outdir / "conditions.json")
        print(f"laminar: existence condition failed (limit {limit} <= d)")
        return EXIT_CONDITION
    flow = laminar.build_laminar(cfg.profile, cfg.params,
                                 n_p=int(cfg.numerics["N_p_laminar"]))
    val, ok = laminar.cond2_value(flow, cfg.params)
    conditions.update({"theta": flow.theta, "cond2_value": val, "cond2": bool(ok)})
    _write_json(conditions, cfg.outdir / "conditions.json")
    laminar.to_csv(flow, cfg.outdir / "laminar.csv")
    print(f"laminar: theta={_fmt(flow.theta)} cond2={_fmt(val)} ({'ok' if ok else 'fails'})")
    return EXIT_OK


def _flow_or_exit(cfg: RunConfig):
    exists, limit = laminar.check_existence(cfg.profile, cfg.params.d)
    if not exists:
        raise ConditionFailedError(
            f"existence condition failed: limit {limit} <= d", value=limit
        )
    flow = laminar.build_laminar(cfg.profile, cfg.params,
                                 n_p=int(cfg.numerics["N_p_laminar"]))
    val, ok = laminar.cond2_value(flow, cfg.params)
    if not ok:
        raise ConditionFailedError(
            f"bifurcation condition failed: g int a^-3 = {val} >= 1", value=val
        )
    return flow


def cmd_bifurcate(cfg: RunConfig) -> int:
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    flow = _flow_or_exit(cfg)
    bif = sturm.bifurcation_point(flow, cfg.params)
    trans = continuation.transversality(flow, cfg.params, bif,
                                        n_q=int(cfg.numerics["N_q"]))
    _write_json(
        {"C0": bif.C0, "lambda_star": bif.lambda_star, "transversality": trans},
        cfg.outdir / "bifurcation.json",
    )
    mus = {}
    for lam in (1.0, bif.lambda_star):
        mu_root = bif.C0 * lam**2
        mus[lam] = np.linspace(0.0, 2.5 * mu_root, 26)
    scan = np.vstack([
        sturm.scan_wronskian(flow, cfg.params, [lam], mus[lam])
        for lam in (1.0, bif.lambda_star)
    ])
    sturm.scan_to_csv(scan, cfg.outdir / "wronskian_scan.csv")
    print(f"bifurcate: C0={_fmt(bif.C0)} lambda*={_fmt(bif.lambda_star)} "
          f"transversality={_fmt(trans)}")
    return EXIT_OK


def cmd_branch(cfg: RunConfig) -> int:
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    flow = _flow_or_exit(cfg)
    bif = sturm.bifurcation_point(flow, cfg.params)
    points, truncated = continuation.continue_branch(
        bif,
        s_max=float(cfg.numerics["s_max"]),
        n_steps=int(cfg.numerics["n_steps"]),
        flow=flow,
        params=cfg.params,
        n_q=int(cfg.numerics["N_q"]),
        n_p=int(cfg.numerics["N_p"]),
        tol=float(cfg.numerics["newton_tol"]),
    )
    rows = []
    all_pass = True
    for idx, pt in enumerate(points):
        sol = reconstruct.fields_from_height(pt.field, flow, cfg.params)
        report = reconstruct.euler_residual(sol, cfg.profile)
        all_pass = all_pass and report.passed()
        rows.append((pt.s, pt.lam, float(np.max(sol.eta)), float(np.min(sol.eta)),
                     pt.residual_norm))
        if cfg.write_fields:
            reconstruct.solution_to_csv(sol, cfg.outdir / f"point_{idx:03d}_grid.csv")
            reconstruct.summary_to_json(
                sol, report, cfg.outdir / f"point_{idx:03d}_summary.json",
                extra={"s": pt.s, "newton_residual": pt.residual_norm},
            )
    with open(cfg.outdir / "branch.csv", "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(["s", "lambda", "eta_crest", "eta_trough", "residual"])
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    if truncated:
        print(f"branch: truncated after {len(points)} converged points")
        return EXIT_NUMERICAL
    print(f"branch: {len(points)} points, lambda range "
          f"[{_fmt(min(r[1] for r in rows))}, {_fmt(max(r[1] for r in rows))}]")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    outdir = cfg.outdir
    if not outdir.exists():
        print(f"verify: output directory {outdir} not found")
        return EXIT_CONFIG
    flow = None
    failures = []
    checks = []

    laminar_csv = outdir / "laminar.csv"
    if laminar_csv.exists():
        try:
            data = np.genfromtxt(laminar_csv, delimiter=",", names=True)
        except OSError as exc:
            print(f"verify: cannot read {laminar_csv}: {exc}")
            return EXIT_CONFIG
        flow = laminar.build_laminar(cfg.profile, cfg.params,
                                     n_p=int(cfg.numerics["N_p_laminar"]))
        dev_a = float(np.max(np.abs(np.asarray(data["a"]) - flow.a_of(data["p"]))))
        dev_H = float(np.max(np.abs(np.asarray(data["H"]) - flow.H_of(data["p"]))))
        checks.append(("laminar_a", dev_a, 1e-9))
        checks.append(("laminar_H", dev_H, 1e-9))

    summaries = sorted(outdir.glob("point_*_summary.json"))
    for summary_path in summaries:
        try:
            with open(summary_path) as fh:
                meta = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"verify: cannot read {summary_path}: {exc}")
            return EXIT_CONFIG
        grid_path = outdir / summary_path.name.replace("_summary.json", "_grid.csv")
        if not grid_path.exists():
            print(f"verify: missing grid dump {grid_path}")
            return EXIT_CONFIG
        try:
            sol = reconstruct.solution_from_csv(grid_path, float(meta["lambda"]),
                                                cfg.params)
        except (OSError, DomainError, ValueError) as exc:
            print(f"verify: cannot parse {grid_path}: {exc}")
            return EXIT_CONFIG
        if flow is None:
            flow = laminar.build_laminar(cfg.profile, cfg.params,
                                         n_p=int(cfg.numerics["N_p_laminar"]))
        try:
            report = reconstruct.euler_residual(sol, cfg.profile)
        except DomainError as exc:
            failures.append((grid_path.name, "admissibility", str(exc)))
            continue
        # Recomputed velocity/pressure fields must match the stored ones.
        field = continuation.HeightField(
            w=sol.h - flow.H_of(sol.p)[:, None], lam=sol.lam, p0=cfg.params.p0,
        )
        fresh = reconstruct.fields_from_height(field, flow, cfg.params)
        stored_dev = max(
            float(np.max(np.abs(fresh.u - sol.u))),
            float(np.max(np.abs(fresh.v - sol.v))),
            float(np.max(np.abs(fresh.P - sol.P))),
        )
        checks.append((f"{grid_path.name}:stored_fields", stored_dev, 1e-8))
        for name, value in sorted(report.values.items()):
            checks.append((f"{grid_path.name}:{name}", value,
                           report.tolerances[name]))

    width = max((len(name) for name, _, _ in checks), default=20)
    for name, value, tol in checks:
        ok = value <= tol
        if not ok:
            failures.append((name, value, tol))
        print(f"{name:<{width}}  {value:.3e}  tol {tol:.3e}  "
              f"{'PASS' if ok else 'FAIL'}")
    if failures:
        print(f"verify: {len(failures)} check(s) failed: "
              + ", ".join(f"{f[0]} ({f[1]})" for f in failures))
        return EXIT_VERIFICATION
    print(f"verify: all {len(checks)} checks passed")
    return EXIT_OK


def _sweep_worker(args):
    base_raw, assignments, command, run_dir = args
    raw = copy.deepcopy(base_raw)
    for key, value in assignments:
        _apply_override(raw, f"{key}={json.dumps(value)}")
    raw.setdefault("outputs", {})["dir"] = run_dir
    try:
        cfg = parse_config(raw)
        return run_dir, _COMMANDS[command](cfg)
    except ConfigError as exc:
        return run_dir, _fail(exc, EXIT_CONFIG)
    except ConditionFailedError as exc:
        return run_dir, _fail(exc, EXIT_CONDITION)
    except (NumericalError, DomainError) as exc:
        return run_dir, _fail(exc, EXIT_NUMERICAL)


def _fail(exc, code):
    print(f"error: {exc}")
    return code


def cmd_sweep(sweep_path: str, jobs: int) -> int:
    try:
        with open(sweep_path) as fh:
            sweep = json.load(fh)
        base = sweep["base"]
        grid = sweep.get("grid", {})
        command = sweep.get("command", "laminar")
        out_root = Path(sweep.get("dir", "sweep_out"))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: bad sweep config: {exc}")
        return EXIT_CONFIG
    if command not in _COMMANDS:
        print(f"error: unknown sweep command '{command}'")
        return EXIT_CONFIG
    keys = sorted(grid)
    combos = list(product(*(grid[k] for k in keys)))
    out_root.mkdir(parents=True, exist_ok=True)
    tasks = []
    for idx, combo in enumerate(combos):
        run_dir = str(out_root / f"run_{idx:03d}")
        tasks.append((base, list(zip(keys, combo)), command, run_dir))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, tasks))
    else:
        results = [_sweep_worker(t) for t in tasks]
    worst = EXIT_OK
    for run_dir, code in results:
        print(f"sweep: {run_dir} -> exit {code}")
        worst = max(worst, code)
    return worst


_COMMANDS = {
    "laminar": cmd_laminar,
    "bifurcate": cmd_bifurcate,
    "branch": cmd_branch,
    "verify": cmd_verify,
}

_EPILOG = """\
file formats (see FORMATS.md for details):
  laminar.csv         p,H,a
  conditions.json     {cond1, limit, theta, cond2_value, cond2}
  bifurcation.json    {C0, lambda_star, transversality}
  wronskian_scan.csv  lambda,mu,W
  branch.csv          s,lambda,eta_crest,eta_trough,residual
  point_NNN_grid.csv  q,p,h,u,v,P  (long format, one row per node)
All floats carry 17 significant digits; outputs are byte-deterministic.
"""


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="icewave",
        description="Laminar flows, bifurcation points and wave branches for "
                    "steady hydroelastic waves with vorticity.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("laminar", "solve the trivial flow and evaluate both conditions"),
        ("bifurcate", "locate (C0, lambda*) and the transversality number"),
        ("branch", "continue the local wave branch and dump solutions"),
        ("verify", "re-run residual suites on stored solution files"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field by dotted path")
        p.add_argument("--out", default=None, help="output directory "
                       f"(default: config, then ${_ENV_OUTDIR})")
    p = sub.add_parser("sweep", help="run a grid of configs in a worker pool")
    p.add_argument("--config", required=True, help="sweep JSON: {base, grid, command, dir}")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    args = parser.parse_args(argv)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.jobs)
    try:
        cfg = load_config(args.config, overrides=args.set, outdir_override=args.out)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    except ConditionFailedError as exc:
        return _fail(exc, EXIT_CONDITION)
    except (NumericalError, DomainError) as exc:
        return _fail(exc, EXIT_NUMERICAL)


if __name__ == "__main__":
    sys.exit(main())
