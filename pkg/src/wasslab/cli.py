"""Command line front end: ``simulate``, ``verify`` and ``reference``.

Exit codes: 0 success, 1 at least one failed check, 2 configuration or
input error, 3 numeric failure (including truncated runs under ``--strict``).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from typing import Sequence

import numpy as np

from .config import ConfigError, load_config
from .entropy import entropy_series, rhs_integrals
from .errors import ConfigurationError, DomainError, NumericError
from .flows import FlowTrajectory
from .reference import model_closed_forms, solve_u_beta
from .scenario import Scenario, parse_coupling, run_scenario
from .verify import CHECKS, make_spec, run_check, run_suite, summary_table

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# right-hand sides that can be tabulated per snapshot from (m, t, c) alone
_STATEWISE_RHS = {
    "geodesic": {"geo_wm": "geo_wm", "geo_dissipation": "geo_dissipation"},
    "heat": {"heat_wm": "heat_wm"},
    "langevin": {"hamiltonian_2nd": "hamiltonian_2nd", "hamiltonian_1st": "hamiltonian_1st"},
}


def _write_csv(path: str, header: Sequence[str], rows) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    return path


def _emit_plots(paths: Sequence[str], args, columns=None) -> None:
    from .plotting import plot_csv, write_gnuplot

    for p in paths:
        if args.gnuplot:
            print(f"wrote {write_gnuplot(p, columns)}")
        if args.plot:
            try:
                print(f"wrote {plot_csv(p, columns)}")
            except RuntimeError as exc:
                print(f"warning: {exc}", file=sys.stderr)


def _check_ids(items) -> list[str]:
    return [it if isinstance(it, str) else it["id"] for it in items]


# -- simulate --------------------------------------------------------------------


def _entropy_mode(sc: Scenario) -> str | None:
    if sc.kind == "geodesic" and float(sc.flow.get("solver", {}).get("t_start", 0.0)) > 0:
        return "geodesic"
    if sc.kind == "heat":
        return "heat"
    return None


def _simulate_flow(sc: Scenario, traj: FlowTrajectory, checks, out: str, dump_fields: bool) -> list[str]:
    written = []
    diag = traj.diagnostic_table()
    keys = list(diag)
    written.append(_write_csv(os.path.join(out, "diagnostics.csv"), keys, zip(*(diag[k] for k in keys))))
    m = sc.geometry.get("m")
    mode = _entropy_mode(sc) if m is not None else None
    es = entropy_series(traj, m, mode)
    rhs = {}
    table = _STATEWISE_RHS.get(sc.kind, {})
    for cid in _check_ids(checks):
        name = table.get(cid)
        if name is None:
            continue
        if name in ("geo_wm", "heat_wm") and m is None:
            continue
        vals = []
        for st in traj.states:
            if name in ("geo_wm", "heat_wm") and st.t <= 0:
                vals.append(math.nan)
                continue
            phi = None if sc.kind == "heat" else st.phi
            vals.append(rhs_integrals(st.rho, phi, {"m": m, "t": st.t, "c": traj.c}, [name])[name])
        rhs[name] = np.array(vals)
    path = os.path.join(out, "entropy.csv")
    es.to_csv(path, rhs)
    written.append(path)
    if dump_fields:
        written.append(_dump_fields(traj, os.path.join(out, "fields.csv")))
    return written


def _dump_fields(traj: FlowTrajectory, path: str) -> str:
    geo = traj.geometry
    axes = ["x", "y"][: geo.dim]
    header = ["t", *axes, "rho"]
    first = traj.states[0]
    if first.phi is not None:
        header.append("phi")
    if first.u is not None:
        header += [f"u_{a}" for a in axes]
    coords = [c.ravel() for c in geo.coords]

    def rows():
        for st in traj.states:
            cols = [np.full(geo.size, st.t), *coords, st.rho.values.ravel()]
            if st.phi is not None:
                cols.append(st.phi.values.ravel())
            if st.u is not None:
                cols += [c.ravel() for c in st.u.components]
            yield from zip(*cols)

    return _write_csv(path, header, rows())


def _reference_rows(model):
    cf = model_closed_forms(model)
    return zip(model.t, model.u, model.up, model.alpha, model.beta, cf["Ent"], cf["Fisher"], cf["Kin"], cf["dW_model"])


REFERENCE_HEADER = ["t", "u", "up", "alpha", "beta", "Ent", "Fisher", "Kin", "dW_model"]


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    out = args.out or cfg.output or "."
    os.makedirs(out, exist_ok=True)
    sc = cfg.scenario
    traj = run_scenario(sc)
    if sc.kind == "reference":
        written = [_write_csv(os.path.join(out, "reference.csv"), REFERENCE_HEADER, _reference_rows(traj))]
    elif sc.kind == "finite_dim":
        d = traj.x.shape[1]
        header = ["t", *(f"x{i}" for i in range(d)), *(f"v{i}" for i in range(d)), "H", "V"]
        V = np.array([traj.potential.value(x) for x in traj.x])
        H = 0.5 * np.sum(traj.v**2, axis=1) + V
        rows = np.column_stack([traj.times, traj.x, traj.v, H, V])
        written = [_write_csv(os.path.join(out, "trajectory.csv"), header, rows)]
    else:
        written = _simulate_flow(sc, traj, cfg.checks, out, args.dump_fields)
        print(f"termination: {traj.termination} at t={traj.times[-1]:.6g}")
    for p in written:
        print(f"wrote {p}")
    _emit_plots([p for p in written if not p.endswith("fields.csv")], args, None)
    if args.strict and getattr(traj, "termination", "completed") != "completed":
        print(f"error: run truncated ({traj.termination})", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# -- verify -----------------------------------------------------------------------


def _specs_from_config(cfg, wrong_sign: bool):
    if not cfg.checks:
        raise ConfigError("config lists no checks", None, None)
    specs = []
    for item in cfg.checks:
        if isinstance(item, str):
            item = {"id": item}
        cid = item["id"]
        d = CHECKS[cid]
        params = dict(item.get("params", {}))
        if cid == "model_residual":
            if wrong_sign:
                params["sign"] = -1.0
            scenario = None
        else:
            if cfg.scenario.kind not in d.flows:
                raise ConfigError(f"check {cid!r} needs a {' or '.join(d.flows)} flow, "
                                  f"config has {cfg.scenario.kind!r}", None, None)
            scenario = cfg.scenario
        specs.append(make_spec(cid, scenario=scenario, params=params, tolerance=item.get("tolerance"),
                               refine=item.get("refine"), label=item.get("label")))
    return specs


def cmd_verify(args) -> int:
    if bool(args.config) == bool(args.suite):
        raise ConfigurationError("verify needs exactly one of --config or --suite")
    only = args.only or None
    if args.config:
        cfg = load_config(args.config, seed=args.seed)
        specs = _specs_from_config(cfg, args.wrong_sign)
        if only:
            unknown = set(only) - set(CHECKS)
            if unknown:
                raise ConfigurationError(f"unknown check id(s) {sorted(unknown)}")
            specs = [s for s in specs if s.id in set(only)]
        reports = [run_check(s) for s in specs]
        out = args.out or cfg.output or "reports"
    else:
        reports = run_suite(args.suite, only=only, wrong_sign=args.wrong_sign, workers=args.workers)
        out = args.out or "reports"
    os.makedirs(out, exist_ok=True)
    csvs = []
    for r in reports:
        _, c = r.write(out)
        csvs.append(c)
    table = summary_table(reports)
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table + "\n")
    print(table)
    _emit_plots(csvs, args, ["lhs", "rhs"])
    return EXIT_FAIL if any(r.status == "fail" for r in reports) else EXIT_OK


# -- reference --------------------------------------------------------------------


def cmd_reference(args) -> int:
    c = parse_coupling(args.c)
    if args.u0 <= 0:
        raise DomainError("--u0 must be positive")
    model = solve_u_beta(c, m=args.m, u0=args.u0, up0=args.up0, t_end=args.t_end, dt=args.dt)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    path = _write_csv(os.path.join(out, "reference.csv"), REFERENCE_HEADER, _reference_rows(model))
    print(f"wrote {path}")
    if math.isfinite(model.T_model):
        print(f"model horizon T_model = {model.T_model:.6g}")
    _emit_plots([path], args, ["u", "alpha"])
    return EXIT_OK


# -- entry point ------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--gnuplot", action="store_true", help="write a gnuplot script next to every CSV")
    p.add_argument("--plot", action="store_true", help="render PNG figures (needs matplotlib)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wasslab", description="Wasserstein-space flow simulations and identity checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configured flow and write CSVs")
    p.add_argument("--config", metavar="PATH", required=True)
    p.add_argument("--strict", action="store_true", help="exit 3 if the run was truncated")
    p.add_argument("--dump-fields", action="store_true", help="also write every snapshot's grid fields")
    p.add_argument("--seed", type=int, help="seed for random_trig initial data")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run identity and inequality checks")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--suite", metavar="NAME", help="named suite, e.g. 'default'")
    p.add_argument("--only", metavar="ID", action="append", help="restrict to this check id (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--wrong-sign", action="store_true", help="debug: flip the divergence sign in model_residual")
    p.add_argument("--workers", type=int, default=1, help="worker processes for suites")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reference", help="tabulate the Gaussian reference model")
    p.add_argument("--c", default="1", help="coupling; 'inf' and 0 select the explicit presets")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--u0", type=float, default=1.0)
    p.add_argument("--up0", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    _common(p)
    p.set_defaults(func=cmd_reference)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError, OverflowError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
