"""Snapshot files (CSV) and run reports (TOML)."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import tomli
import tomli_w

from .diagnostics import (
    BoundViolation,
    DiagnosticsRecord,
    entropy_balance_residual,
)
from .kernels import chemical_potential, eulerian_positions
from .state import Params, State

SNAPSHOT_COLUMNS = ("index", "x", "x_tilde", "v", "u", "theta", "phi", "mu", "u_node")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_snapshot(state: State, params: Params, path) -> None:
    """One CSV row per cell.

    ``u`` is the node velocity averaged to the cell center; ``u_node`` is the
    left node of each cell (the right boundary node is zero), which makes the
    nodal field recoverable exactly."""
    grid = state.grid
    u = state.u
    x_tilde = eulerian_positions(state)[:-1] + 0.5 * state.v * grid.dx
    mu = chemical_potential(state.phi, state.v, params, grid)
    u_center = 0.5 * (u[:-1] + u[1:])
    cols = (grid.centers, x_tilde, state.v, u_center, state.theta, state.phi, mu, u[:-1])
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SNAPSHOT_COLUMNS)
            for i in range(grid.n_cells):
                w.writerow([str(i)] + [_fmt(c[i]) for c in cols])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write snapshot: {exc.strerror}", os.fspath(path)) from None


def read_snapshot(path) -> dict:
    """Columns of a snapshot file as float arrays (``index`` as int)."""
    try:
        with open(path, newline="", encoding="ascii") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read snapshot: {exc.strerror}", os.fspath(path)) from None
    header, body = rows[0], rows[1:]
    if "v" not in header or "theta" not in header or "phi" not in header or "u" not in header:
        raise ValueError(f"{path}: snapshot needs columns v, u, theta and phi")
    out = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        out[name] = np.array(vals, dtype=np.int64 if name == "index" else np.float64)
    return out


def nodes_from_centers(u_center: np.ndarray) -> np.ndarray:
    """Node velocities from center averages with ``u = 0`` at the left end."""
    u = np.zeros(u_center.shape[0] + 1)
    for i, c in enumerate(u_center):
        u[i + 1] = 2.0 * c - u[i]
    u[-1] = 0.0
    return u


def state_from_snapshot(path, time: float = 0.0) -> State:
    cols = read_snapshot(path)
    if "u_node" in cols:
        u = np.append(cols["u_node"], 0.0)
    else:
        u = nodes_from_centers(cols["u"])
    return State(time=time, v=cols["v"], u=u, theta=cols["theta"], phi=cols["phi"])


# ------------------------------------------------------------------ reports

SERIES = ("time", "mass", "energy", "entropy", "dissipation", "dissipation_integral",
          "mean_theta", "v_min", "v_max", "theta_min", "theta_max", "phi_min", "phi_max")


@dataclass(frozen=True)
class SummaryReport:
    status: str
    message: str
    steps: int
    halvings: int
    final: DiagnosticsRecord
    max_mass_drift: float
    max_energy_drift: float
    max_entropy_residual: float
    max_representation_error: float
    violation_count: int
    violations: tuple
    dt_min: float
    dt_max: float
    dt_mean: float
    series: dict = field(default_factory=dict)
    # left out by default so reports of equal runs are byte-identical
    wall_clock: float | None = None

    def __eq__(self, other):
        if not isinstance(other, SummaryReport):
            return NotImplemented
        a, b = _to_doc(self), _to_doc(other)
        return tomli_w.dumps(a) == tomli_w.dumps(b)


def _max_abs(values) -> float:
    a = np.abs(np.asarray(values, dtype=np.float64))
    a = a[~np.isnan(a)]
    return float(a.max()) if a.size else 0.0


def build_summary(trajectory, violations=(), wall_clock: float | None = None) -> SummaryReport:
    recs = trajectory.records
    mass = np.array([r.mass for r in recs])
    energy = np.array([r.energy for r in recs])
    dts = np.array(trajectory.dt_used) if trajectory.dt_used else np.zeros(1)
    series = {name: [float(getattr(r, name)) for r in recs] for name in SERIES
              if name != "dissipation_integral"}
    series["dissipation_integral"] = [float(x) for x in trajectory.dissipation_integral]
    series = {k: series[k] for k in SERIES}
    rep = [c.linf_error for c in trajectory.representation]
    return SummaryReport(
        status=trajectory.status,
        message=trajectory.message,
        steps=trajectory.steps,
        halvings=trajectory.halvings,
        final=recs[-1],
        max_mass_drift=_max_abs(mass - mass[0]),
        max_energy_drift=_max_abs(energy - energy[0]),
        max_entropy_residual=_max_abs(entropy_balance_residual(trajectory)),
        max_representation_error=_max_abs(rep),
        violation_count=len(violations),
        violations=tuple(violations),
        dt_min=float(dts.min()),
        dt_max=float(dts.max()),
        dt_mean=float(math.fsum(dts) / dts.size),
        series=series,
        wall_clock=wall_clock,
    )


_SCALARS = ("status", "message", "steps", "halvings", "max_mass_drift", "max_energy_drift",
            "max_entropy_residual", "max_representation_error", "violation_count",
            "dt_min", "dt_max", "dt_mean")


def _to_doc(report: SummaryReport) -> dict:
    summary = {k: getattr(report, k) for k in _SCALARS}
    if report.wall_clock is not None:
        summary["wall_clock"] = report.wall_clock
    doc = {"summary": summary, "final": asdict(report.final)}
    if report.violations:
        doc["violations"] = [v._asdict() for v in report.violations]
    doc["series"] = dict(report.series)
    return doc


def write_report(report: SummaryReport, path) -> None:
    text = tomli_w.dumps(_to_doc(report))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report: {exc.strerror}", os.fspath(path)) from None


def read_report(path) -> SummaryReport:
    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    s = doc["summary"]
    rec_fields = {f.name for f in fields(DiagnosticsRecord)}
    final = DiagnosticsRecord(**{k: v for k, v in doc["final"].items() if k in rec_fields})
    violations = tuple(BoundViolation(**v) for v in doc.get("violations", []))
    return SummaryReport(
        final=final,
        violations=violations,
        series={k: list(v) for k, v in doc.get("series", {}).items()},
        wall_clock=s.get("wall_clock"),
        **{k: s[k] for k in _SCALARS},
    )
