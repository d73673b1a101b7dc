"""``pcflow verify | run | report``.

Exit codes: 0 success, 1 an identity case or estimate failed, 2 usage or
configuration error (including malformed input files), 3 positivity breakdown.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import backend
from .config import ConfigError, RunConfig, load_config, resolve_kind
from .field import TorusChart
from .flow import (BREAKDOWN, FlowControls, FlowState, estimate_monitors, max_curvature, run)
from .identities import (ALL_CASES, DIM_CONSTRAINTS, STATIC_CASES, SuiteFlow, TOLERANCES,
                         run_suite)
from .initial_data import ConstructionError, HSState, make_metric
from .persist import (FormatError, build_id, read_diagnostics_csv, read_snapshot, write_diagnostics_csv,
                      write_json, write_snapshot)

log = logging.getLogger("pcflow")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BREAKDOWN = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2) itself; keep control here
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML run configuration")
    p.add_argument("--dim", type=int, help="complex dimension n (1-3)")
    p.add_argument("--grid", type=int, help="grid points per real axis (even, 4-64)")
    p.add_argument("--data", help="flat | kahler | rank_one | hs | random (or a full kind name)")
    p.add_argument("--epsilon", type=float, help="perturbation size")
    p.add_argument("--seed", type=int, help="seed for random data")
    p.add_argument("--out", help="output directory")
    p.add_argument("--backend", choices=("auto", "python", "compiled"), default="auto")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pcflow", description="Pluriclosed flow on the flat complex torus.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="evaluate identity cases")
    _common(v)
    v.add_argument("--case", action="append",
                   help="identity case, 'static', 'evolution' or 'all' (repeatable)")
    v.add_argument("--probe-time", type=float, help="probe time of the short flow")

    r = sub.add_parser("run", help="integrate the flow and write diagnostics")
    _common(r)
    r.add_argument("--horizon", type=float)
    r.add_argument("--probe-times", type=float, nargs="*")
    r.add_argument("--safety", type=float)
    r.add_argument("--monitor-interval", type=float,
                   help="evaluate |DΩ|, |D²Ω| once per this much flow time (default: every step)")
    r.add_argument("--resume", type=Path, help="snapshot to continue from")

    rep = sub.add_parser("report", help="estimate verdicts from a diagnostics CSV")
    rep.add_argument("csv", type=Path)
    rep.add_argument("--dim", type=int, default=2, help="complex dimension of the run")
    rep.add_argument("--bound", type=float, default=50.0)
    rep.add_argument("--out", type=Path, help="write the JSON here instead of stdout")
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    kind = resolve_kind(args.data) if args.data else None
    over = dict(dim=args.dim, grid=args.grid, output_dir=args.out, data_kind=kind,
                data_epsilon=args.epsilon, data_seed=args.seed)
    for name in ("horizon", "safety", "monitor_interval"):
        over[name] = getattr(args, name, None)
    if getattr(args, "probe_times", None) is not None:
        over["probe_times"] = tuple(args.probe_times)
    if getattr(args, "probe_time", None) is not None:
        over["suite_probe_time"] = args.probe_time
    return cfg.with_overrides(**over)


def _select_cases(requested, n: int) -> list[str]:
    names = requested or ["all"]
    out = []
    for name in names:
        if name == "all":
            chosen = [c for c in ALL_CASES if DIM_CONSTRAINTS.get(c, n) == n]
        elif name == "static":
            chosen = list(STATIC_CASES)
        elif name == "evolution":
            chosen = [c for c in ALL_CASES if c not in STATIC_CASES
                      and DIM_CONSTRAINTS.get(c, n) == n]
        elif name in ALL_CASES:
            need = DIM_CONSTRAINTS.get(name)
            if need is not None and need != n:
                raise UsageError(f"case {name} requires --dim {need} (got --dim {n})")
            chosen = [name]
        else:
            raise UsageError(f"unknown case {name!r}; choose from all, static, evolution, "
                             + ", ".join(ALL_CASES))
        out += [c for c in chosen if c not in out]
    return out


def _initial(cfg: RunConfig):
    chart = TorusChart(cfg.dim, cfg.grid)
    data = make_metric(chart, cfg.data)
    if isinstance(data, HSState):
        return FlowState(0.0, data.omega, data.phi)
    return FlowState(0.0, data)


def cmd_verify(args) -> int:
    cfg = _config(args)
    cases = _select_cases(args.case, cfg.dim)
    chart = TorusChart(cfg.dim, cfg.grid)
    evo = any(c not in STATIC_CASES for c in cases)
    flow = SuiteFlow(probe_time=cfg.suite_probe_time, probe_dt=cfg.probe_dt,
                     safety=cfg.safety, dealias=cfg.dealias) if evo else None
    reports = run_suite(cases, chart, cfg.data, flow, seed=cfg.data.seed)
    for rep in reports:
        tol = cfg.tolerances.get(rep.case)
        if tol is not None:
            rep.tolerance = tol
            rep.passed = bool(rep.rel_residual < tol) and not any(
                n.startswith("Richardson factor") for n in rep.notes)
    ok = all(r.passed for r in reports)
    out = Path(cfg.output_path()) / "verify.json"
    write_json(out, {"build": build_id(), "command": "verify", "config": cfg.resolved(),
                     "backend": backend.name, "all_pass": ok,
                     "cases": [r.as_dict() for r in reports]})
    for r in reports:
        extra = r.params.get("richardson_factor")
        extra = f"  richardson {extra:.3f}" if extra is not None else ""
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.case:<22} rel {r.rel_residual:.3e}"
              f"  tol {r.tolerance:.0e}{extra}")
    print(f"report: {out}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_run(args) -> int:
    cfg = _config(args)
    initial = _initial(cfg)
    K = max_curvature(initial)
    if args.resume:
        state = read_snapshot(args.resume)
        if (state.chart.n, state.chart.N) != (cfg.dim, cfg.grid):
            raise ConfigError("resume", f"snapshot is n={state.chart.n}, N={state.chart.N}; "
                              f"config is n={cfg.dim}, N={cfg.grid}")
        if not state.t < cfg.horizon:
            raise ConfigError("resume", f"snapshot time {state.t} is not before the horizon")
    else:
        state = initial
    controls = FlowControls(safety=cfg.safety, probe_times=tuple(
        tp for tp in cfg.probe_times if tp > state.t), probe_dt=cfg.probe_dt,
        dealias=cfg.dealias, monitor_interval=cfg.monitor_interval)
    res = run(state, cfg.horizon, controls, K=K, richardson=False)
    outdir = Path(cfg.output_path())
    write_diagnostics_csv(outdir / "diagnostics.csv", res.records)
    snaps = []
    for probe in res.probes:
        snaps.append(write_snapshot(outdir / f"snapshot_t{probe.t:.6g}.pcf", probe.states[1]).name)
    snaps.append(write_snapshot(outdir / "final.pcf", res.final).name)
    write_json(outdir / "run.json", {
        "build": build_id(), "command": "run", "config": cfg.resolved(), "backend": backend.name,
        "status": res.status, "message": res.message, "K": K, "steps": res.steps,
        "rejected_steps": res.rejected, "final_t": res.final.t,
        "resumed_from": str(args.resume) if args.resume else None, "snapshots": snaps})
    print(f"{res.status}: t={res.final.t:.6g} after {res.steps} steps; output in {outdir}")
    if res.status == BREAKDOWN:
        print(res.message, file=sys.stderr)
        return EXIT_BREAKDOWN
    return EXIT_OK


def cmd_report(args) -> int:
    records = read_diagnostics_csv(args.csv)
    if not args.bound > 0:
        raise ConfigError("bound", f"must be > 0, got {args.bound}")
    ric = [r.max_ric_s for r in records]
    ric = None if any(x != x for x in ric) else ric
    rep = estimate_monitors(records, n=args.dim, bound=args.bound, ric_s=ric)
    text = {"build": build_id(), "command": "report", "csv": str(args.csv),
            "records": len(records), "estimates": rep.as_dict(), "all_pass": rep.passed}
    if args.out:
        write_json(args.out, text)
    else:
        from .persist import dumps
        sys.stdout.write(dumps(text))
    return EXIT_OK if rep.passed else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"pcflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "backend", "auto") != "auto":
            backend.use(args.backend)
        return {"verify": cmd_verify, "run": cmd_run, "report": cmd_report}[args.command](args)
    except (UsageError, ConfigError, FormatError, ConstructionError, ImportError) as exc:
        print(f"pcflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
