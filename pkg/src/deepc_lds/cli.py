"""Command line entry point ``deepc-lds``.

Exit codes: 0 success, 2 validation error, 3 infeasible OCP, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .behavior import collect_data, minimum_data_length, read_archive, required_pe_order, write_archive
from .deepc import DIAGNOSTICS_HEADER, OcpConfig, run_closed_loop
from .droop import DEFAULT_GAIN, DroopConfig, run_droop
from .errors import InfeasibleError, NumericalError, ValidationError
from .grid import CONVENTIONS, build_descriptor, default_grid_path, load_grid
from .metrics import SETTLING_HOLD, SETTLING_THRESHOLD, compare, compute_metrics
from .pencil import analyze_system, quasi_weierstrass
from .schedule import default_schedule_path, load_schedule
from .setpoint import SHARING_POLICIES, compute_setpoint
from .simulate import simulate

log = logging.getLogger("deepc_lds")

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4


# -- argument helpers --------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of integers, got {text!r}") from None


def _demand(grid, text: str) -> np.ndarray:
    """``"v1,...,vn"`` in bus-label order, or ``"bus=value,..."`` pairs."""
    d = np.zeros(grid.n)
    if "=" in text:
        for part in text.split(","):
            if not part.strip():
                continue
            try:
                label, value = part.split("=")
                d[grid.internal_index(int(label))] = float(value)
            except (ValueError, KeyError):
                raise ValidationError(f"bad demand entry {part!r}") from None
        return d
    vals = _floats(text)
    if len(vals) != grid.n:
        raise ValidationError(f"demand needs {grid.n} values, got {len(vals)}")
    for label, v in zip(sorted(grid.bus_labels), vals):
        d[grid.internal_index(label)] = v
    return d


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _system(args):
    grid = load_grid(args.grid)
    sel = _ints(args.outputs) if getattr(args, "outputs", None) else None
    sysm = build_descriptor(grid, sel, getattr(args, "convention", "physical"))
    return grid, sysm


def _dump(data) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=False, width=100)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


# -- subcommands -------------------------------------------------------------


def cmd_analyze(args) -> int:
    grid, sysm = _system(args)
    report = analyze_system(sysm)
    doc = {"grid": str(args.grid), "convention": args.convention, **report.to_dict()}
    text = _dump(doc)
    print(text, end="")
    if args.out:
        (_out_dir(args) / "analysis.yaml").write_text(text)
    return EXIT_OK


def cmd_collect(args) -> int:
    grid, sysm = _system(args)
    qw = quasi_weierstrass(sysm.E, sysm.A)
    T_min = minimum_data_length(args.L, qw.q, qw.s, grid.g, grid.n)
    T = args.T or T_min
    if T < T_min:
        log.warning("T=%d is below the minimum %d for horizon L=%d; the archive will be too short to excite order %d",
                    T, T_min, args.L, required_pe_order(args.L, qw.q, qw.s))
    archive = collect_data(sysm, qw, T, args.seed, args.amplitude, not args.no_disturbance)
    path = _out_dir(args) / "archive.csv"
    meta = write_archive(archive, path)
    print(_dump({"archive": str(path), "metadata": str(meta), **archive.metadata()}), end="")
    return EXIT_OK


def cmd_setpoint(args) -> int:
    grid, sysm = _system(args)
    sp = compute_setpoint(grid, sysm, _demand(grid, args.demand), args.sharing)
    # vectors are in internal order: generator buses first
    doc = {"bus_order": list(grid.bus_labels), "residual": sp.stationarity_residual(sysm), **sp.to_dict()}
    text = _dump(doc)
    print(text, end="")
    if args.out:
        (_out_dir(args) / "setpoint.yaml").write_text(text)
    return EXIT_OK


def _read_inputs(path: str, g: int, n: int):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise ValidationError(f"input file not found: {path}") from None
    if not rows:
        raise ValidationError("input file is empty")
    header, body = rows[0], rows[1:]
    u_cols = [i for i, c in enumerate(header) if c.strip().startswith("u_")]
    w_cols = [i for i, c in enumerate(header) if c.strip().startswith("w_")]
    if len(u_cols) != g or len(w_cols) != n:
        raise ValidationError(f"input file needs {g} u_* and {n} w_* columns, got {len(u_cols)} and {len(w_cols)}")
    try:
        data = np.array([[float(v) for v in row] for row in body])
    except ValueError as exc:
        raise ValidationError(f"non-numeric entry in input file: {exc}") from None
    return data[:, u_cols], data[:, w_cols]


def cmd_simulate(args) -> int:
    grid, sysm = _system(args)
    qw = quasi_weierstrass(sysm.E, sysm.A)
    u, w = _read_inputs(args.input, sysm.nu, sysm.nw)
    x0 = None
    if args.initial == "setpoint":
        x0 = compute_setpoint(grid, sysm, w[0], args.sharing).x_s
    traj = simulate(sysm, qw, x0, u, w)
    path = _out_dir(args) / "trajectory.csv"
    traj.write_csv(path)
    res = traj.descriptor_residuals(sysm)
    print(_dump({"trajectory": str(path), "steps": len(traj), "max_residual": float(res.max(initial=0.0))}), end="")
    return EXIT_OK


def _scenario(args):
    grid, sysm = _system(args)
    qw = quasi_weierstrass(sysm.E, sysm.A)
    schedule = load_schedule(args.schedule or default_schedule_path(), grid)
    return grid, sysm, qw, schedule


def _archive(args, grid, sysm, qw):
    if args.archive:
        return read_archive(args.archive)
    T = minimum_data_length(args.L, qw.q, qw.s, grid.g, grid.n)
    log.info("no archive given; collecting %d samples with seed %d", T, args.seed)
    return collect_data(sysm, qw, T, args.seed)


def _run_deepc(args, grid, sysm, qw, schedule):
    archive = _archive(args, grid, sysm, qw)
    cfg = OcpConfig(args.L, args.q_scale * np.eye(sysm.ny), args.r_scale * np.eye(sysm.nu), qw.q, qw.s, args.ridge)
    return run_closed_loop(grid, sysm, qw, archive, cfg, schedule, args.steps, args.sharing)


def _droop_config(args, grid, setpoint0):
    K = np.diag(_floats(args.K)) if args.K else args.gain * np.eye(grid.g)
    p = np.array(_floats(args.p_tilde)) if args.p_tilde else setpoint0.u_s
    return DroopConfig(K, p)


def _run_droop(args, grid, sysm, qw, schedule):
    sp0 = compute_setpoint(grid, sysm, schedule.demand_at(0), args.sharing)
    return run_droop(grid, sysm, qw, _droop_config(args, grid, sp0), schedule, args.steps, args.sharing)


def _metrics_doc(metrics) -> list:
    return [dict(zip(metrics.HEADER, s.as_row())) for s in metrics.segments]


def cmd_deepc(args) -> int:
    grid, sysm, qw, schedule = _scenario(args)
    res = _run_deepc(args, grid, sysm, qw, schedule)
    out = _out_dir(args)
    res.trajectory.write_csv(out / "deepc_trajectory.csv")
    _write_csv(out / "deepc_diagnostics.csv", DIAGNOSTICS_HEADER, res.diagnostics_rows())
    m = compute_metrics(res.trajectory, schedule, res.setpoints, grid.g, args.threshold, SETTLING_HOLD)
    print(_dump({"trajectory": str(out / "deepc_trajectory.csv"), "segments": _metrics_doc(m)}), end="")
    return EXIT_OK


def cmd_droop(args) -> int:
    grid, sysm, qw, schedule = _scenario(args)
    res = _run_droop(args, grid, sysm, qw, schedule)
    out = _out_dir(args)
    res.trajectory.write_csv(out / "droop_trajectory.csv")
    m = compute_metrics(res.trajectory, schedule, res.setpoints, grid.g, args.threshold, SETTLING_HOLD)
    doc = {"trajectory": str(out / "droop_trajectory.csv"), "clip_events": res.clip_events, "segments": _metrics_doc(m)}
    print(_dump(doc), end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    grid, sysm, qw, schedule = _scenario(args)
    dp = _run_deepc(args, grid, sysm, qw, schedule)
    dr = _run_droop(args, grid, sysm, qw, schedule)
    out = _out_dir(args)
    dp.trajectory.write_csv(out / "deepc_trajectory.csv")
    dr.trajectory.write_csv(out / "droop_trajectory.csv")
    rep = compare(
        compute_metrics(dp.trajectory, schedule, dp.setpoints, grid.g, args.threshold, SETTLING_HOLD),
        compute_metrics(dr.trajectory, schedule, dr.setpoints, grid.g, args.threshold, SETTLING_HOLD),
    )
    text = rep.report()
    (out / "compare.csv").write_text(text)
    print(text, end="")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _global_flags(p: argparse.ArgumentParser, defaults: bool) -> None:
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--grid", default=d(str(default_grid_path())), help="grid config file (YAML)")
    p.add_argument("--seed", type=int, default=d(1), help="seed for the data collection experiment")
    p.add_argument("--out", default=d("results"), help="output directory")
    p.add_argument("-v", "--verbose", action="count", default=d(0))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepc-lds", description="Descriptor grid models and data-driven frequency control.")
    _global_flags(parser, True)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, False)
    common.add_argument("--convention", choices=CONVENTIONS, default="physical")
    common.add_argument("--outputs", help="0-based state indices measured by C (default: generator angles)")

    p = sub.add_parser("analyze", parents=[common], help="pencil invariants of the grid model")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("collect", parents=[common], help="offline excitation experiment")
    p.add_argument("--T", type=int, help="data length (default: minimum for horizon L)")
    p.add_argument("--L", type=int, default=20, help="horizon used to size the default T")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--no-disturbance", action="store_true", help="keep the demand channel at zero")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("setpoint", parents=[common], help="stationary setpoint for a demand vector")
    p.add_argument("--demand", required=True, help="'v1,...,vn' in bus order or 'bus=value,...'")
    p.add_argument("--sharing", choices=SHARING_POLICIES, default="equal")
    p.set_defaults(func=cmd_setpoint)

    p = sub.add_parser("simulate", parents=[common], help="simulate an input CSV (columns u_*, w_*)")
    p.add_argument("--input", required=True)
    p.add_argument("--initial", choices=("rest", "setpoint"), default="rest")
    p.add_argument("--sharing", choices=SHARING_POLICIES, default="equal")
    p.set_defaults(func=cmd_simulate)

    scenario = argparse.ArgumentParser(add_help=False)
    scenario.add_argument("--schedule", help="demand schedule (YAML); default ships with the package")
    scenario.add_argument("--steps", type=int, default=400)
    scenario.add_argument("--sharing", choices=SHARING_POLICIES, default="equal")
    scenario.add_argument("--threshold", type=float, default=SETTLING_THRESHOLD)
    dflags = argparse.ArgumentParser(add_help=False)
    dflags.add_argument("--archive", help="archive CSV from 'collect' (default: collect with --seed)")
    dflags.add_argument("--L", type=int, default=20)
    dflags.add_argument("--q-scale", type=float, default=10.0, help="Q = q_scale * I")
    dflags.add_argument("--r-scale", type=float, default=1.0, help="R = r_scale * I")
    dflags.add_argument("--ridge", type=float, default=0.0, help="optional penalty on |alpha|^2")
    kflags = argparse.ArgumentParser(add_help=False)
    kflags.add_argument("--gain", type=float, default=DEFAULT_GAIN, help="uniform droop gain k (K = k I)")
    kflags.add_argument("--K", help="diagonal droop gains, comma-separated (overrides --gain)")
    kflags.add_argument("--p-tilde", help="droop offset (default: initial setpoint input)")

    p = sub.add_parser("deepc", parents=[common, scenario, dflags], help="closed loop with the predictive controller")
    p.set_defaults(func=cmd_deepc)
    p = sub.add_parser("droop", parents=[common, scenario, kflags], help="closed loop with droop control")
    p.set_defaults(func=cmd_droop)
    p = sub.add_parser("compare", parents=[common, scenario, dflags, kflags], help="both controllers on one scenario")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.dump:
            path = _out_dir(args) / "infeasible_dump.yaml"
            path.write_text(_dump(exc.dump))
            print(f"state dump written to {path}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
