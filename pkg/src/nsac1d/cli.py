"""Command-line driver: ``nsac1d run|convergence|check --config PATH``.

Exit codes: 0 clean, 1 solver failure, 2 bound violation under fail-fast (or
invalid initial data / failed convergence check), 64 usage or configuration
error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from functools import partial

from .config import ConfigError, RunConfig, load_config
from .convergence import Problem, self_convergence
from .diagnostics import (
    BoundViolation,
    MonitorTolerances,
    conserved_quantities,
    diagnostics_record,
    entropy_functional,
    monitor_bounds,
    temperature_bracket,
)
from .initial import raw_initial_condition
from .integrator import StepFailure, StopRun, run
from .io import build_summary, state_from_snapshot, write_report, write_snapshot
from .state import Grid, State, make_grid, normalize_initial_data, validate_initial_data

EX_OK, EX_FAIL, EX_VIOLATION, EX_USAGE = 0, 1, 2, 64

logger = logging.getLogger("nsac1d")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def raw_initial_state(cfg: RunConfig, grid: Grid | None = None) -> State:
    """Initial data named by ``cfg`` before validation and normalization."""
    grid = grid or make_grid(cfg.n_cells)
    if cfg.ic_is_builtin:
        return raw_initial_condition(cfg.ic, grid, cfg.params, cfg.seed, amplitude=cfg.ic_amplitude)
    state = state_from_snapshot(cfg.ic)
    if state.n_cells != grid.n_cells:
        raise ConfigError(f"ic file has {state.n_cells} cells but n_cells = {grid.n_cells}", key="ic")
    return state


def initial_state(cfg: RunConfig, grid: Grid) -> State:
    """Validated and normalized initial data; picklable through ``partial``."""
    state = raw_initial_state(cfg, grid)
    report = validate_initial_data(state, cfg.params)
    if not report.ok:
        raise ValueError(str(report))
    return normalize_initial_data(state, cfg.params, rescale_energy=cfg.normalize_energy)


class Monitor:
    """Observer collecting bound violations; raises :class:`StopRun` on the
    first one when ``fail_fast`` is set."""

    def __init__(self, initial: State, cfg: RunConfig):
        params = cfg.params
        energy = conserved_quantities(initial, params)["energy"]
        # x - ln x = F0 / c_v brackets the mean temperature from below
        e0 = entropy_functional(initial, params) / params.c_v
        upper = 1.0 if cfg.normalize_energy else energy / params.c_v
        self.bracket = temperature_bracket(e0, upper=upper)
        self.fail_fast = cfg.fail_fast
        self.violations: list = []

    def check(self, record) -> list:
        found = monitor_bounds(record, self.bracket, MonitorTolerances())
        found = [BoundViolation(v.check, float(v.time), int(v.index), float(v.value)) for v in found]
        self.violations.extend(found)
        return found

    def __call__(self, state, dt, info):
        found = self.check(info.record)
        if found and self.fail_fast:
            v = found[0]
            raise StopRun(f"bound violation: {v.check} at t={v.time!r}, index {v.index}, value {v.value!r}")


class Snapshots:
    """Observer writing snapshots every k steps or every interval of time."""

    def __init__(self, directory: str, params, every: int | None, interval: float | None):
        self.dir = directory
        self.params = params
        self.every = every
        self.interval = interval
        self.next_time = interval
        self.count = 0
        self.index = []

    def write(self, state: State, step: int) -> None:
        name = f"snap_{self.count:06d}.csv"
        write_snapshot(state, self.params, os.path.join(self.dir, name))
        self.index.append((self.count, step, state.time, name))
        self.count += 1

    def __call__(self, state, dt, info):
        if self.every is not None:
            due = info.steps % self.every == 0
        else:
            slack = 1e-12 * max(1.0, state.time)
            due = state.time >= self.next_time - slack
            while self.next_time <= state.time + slack:
                self.next_time += self.interval
        if due:
            self.write(state, info.steps)

    def write_index(self) -> None:
        with open(os.path.join(self.dir, "index.csv"), "w", encoding="ascii", newline="\n") as fh:
            fh.write("snapshot,step,time,file\n")
            for k, step, t, name in self.index:
                fh.write(f"{k},{step},{format(t, '.17g')},{name}\n")


def cmd_run(cfg: RunConfig, timing: bool = False) -> int:
    params = cfg.params
    grid = make_grid(cfg.n_cells)
    raw = raw_initial_state(cfg, grid)
    report = validate_initial_data(raw, params)
    if not report.ok:
        print(report)
        return EX_VIOLATION
    try:
        initial = normalize_initial_data(raw, params, rescale_energy=cfg.normalize_energy)
    except ValueError as exc:
        print(f"normalization failed: {exc}")
        return EX_VIOLATION
    out = cfg.output_dir
    snap_dir = os.path.join(out, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)

    monitor = Monitor(initial, cfg)
    snaps = Snapshots(snap_dir, params, cfg.snapshot_every, cfg.snapshot_interval)
    monitor.check(diagnostics_record(initial, params))
    snaps.write(initial, 0)

    start = time.perf_counter()
    code = EX_OK
    try:
        traj = run(initial, params, cfg.step, cfg.t_end, observers=(monitor, snaps),
                   keep_every=10**12)
    except StepFailure as exc:
        traj = exc.trajectory
        print(f"step failure: {exc}", file=sys.stderr)
        code = EX_FAIL
    elapsed = time.perf_counter() - start if timing else None

    final = traj.final
    if not snaps.index or snaps.index[-1][2] != final.time:
        snaps.write(final, traj.steps)
    snaps.write_index()
    summary = build_summary(traj, monitor.violations, wall_clock=elapsed)
    write_report(summary, os.path.join(out, "report.toml"))

    print(f"{traj.status}: t={final.time:.6g} after {traj.steps} steps; "
          f"{len(monitor.violations)} bound violation(s)")
    print(f"max |mass drift| {summary.max_mass_drift:.3e}, max |energy drift| "
          f"{summary.max_energy_drift:.3e}, max entropy residual {summary.max_entropy_residual:.3e}")
    print(f"report: {os.path.join(out, 'report.toml')}")
    if code == EX_OK and traj.status == "stopped":
        print(traj.message, file=sys.stderr)
        code = EX_VIOLATION
    return code


def cmd_check(cfg: RunConfig) -> int:
    params = cfg.params
    raw = raw_initial_state(cfg)
    report = validate_initial_data(raw, params)
    print(report)
    if not report.ok:
        return EX_VIOLATION
    try:
        state = normalize_initial_data(raw, params, rescale_energy=cfg.normalize_energy)
    except ValueError as exc:
        print(f"normalization failed: {exc}")
        return EX_VIOLATION
    cq = conserved_quantities(state, params)
    print(f"mass {cq['mass']:.17g}")
    print(f"energy {cq['energy']:.17g}")
    return EX_OK


def _parse_grids(text: str) -> tuple:
    try:
        grids = tuple(int(g) for g in text.split(","))
    except ValueError:
        raise UsageError(f"--grids must be comma-separated integers, got {text!r}") from None
    if len(grids) != 3 or grids[1] != 2 * grids[0] or grids[2] != 2 * grids[1] or grids[0] < 2:
        raise UsageError(f"--grids must be N,2N,4N, got {text!r}")
    return grids


def cmd_convergence(cfg: RunConfig, grids: tuple, workers: int) -> int:
    try:
        for n in grids:
            initial_state(cfg, make_grid(n))
    except (ValueError, ConfigError) as exc:
        print(exc)
        return EX_VIOLATION
    problem = Problem(partial(initial_state, cfg), cfg.params, cfg.t_end, replace(cfg.step, dt_fixed=None))
    per_dx = cfg.dt_fixed * cfg.n_cells if cfg.dt_fixed is not None else None
    try:
        result = self_convergence(problem, grids, dt_per_dx=per_dx, workers=workers)
    except StepFailure as exc:
        print(f"step failure: {exc}", file=sys.stderr)
        return EX_FAIL
    print(result.table())
    print("PASS" if result.passed else "FAIL: some order below 1")
    return EX_OK if result.passed else EX_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nsac1d", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--seed", type=int, help="override the seed for random initial data")

    p = sub.add_parser("run", help="simulate, write snapshots and a report")
    common(p)
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--fail-fast", action="store_true", help="stop at the first bound violation")
    p.add_argument("--timing", action="store_true", help="record wall-clock time in the report")

    p = sub.add_parser("convergence", help="three-grid self-convergence study")
    common(p)
    p.add_argument("--grids", default=None, help="N,2N,4N (default: n_cells, 2n_cells, 4n_cells)")
    p.add_argument("--workers", type=int, default=1, help="run grid levels in parallel")
    p.add_argument("--out", help="accepted for symmetry; unused")
    p.add_argument("--fail-fast", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("check", help="validate and normalize the initial data only")
    common(p)
    p.add_argument("--out", help=argparse.SUPPRESS)
    p.add_argument("--fail-fast", action="store_true", help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        if args.command == "convergence" and args.workers < 1:
            raise UsageError("--workers must be at least 1")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EX_USAGE
    except SystemExit as exc:  # --help
        return EX_OK if exc.code in (0, None) else EX_USAGE

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.out:
            changes["output_dir"] = os.path.abspath(args.out)
        if args.fail_fast:
            changes["fail_fast"] = True
        cfg = replace(cfg, **changes)
        if args.command == "run":
            return cmd_run(cfg, timing=args.timing)
        if args.command == "check":
            return cmd_check(cfg)
        grids = _parse_grids(args.grids) if args.grids else (
            cfg.n_cells, 2 * cfg.n_cells, 4 * cfg.n_cells)
        return cmd_convergence(cfg, grids, args.workers)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EX_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EX_USAGE
    except (OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EX_USAGE
