"""IMEX time stepping: explicit pressure, capillary and double-well forcing;
implicit viscosity, phase diffusion and (Picard-linearized) heat conduction.

One step runs momentum -> mass -> phase -> heat. Every linear solve is
tridiagonal and is posed for the increment over the old value, so a constant
equilibrium gives an exactly zero right-hand side and is preserved bit for bit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .diagnostics import (
    DiagnosticsRecord,
    RepresentationTracker,
    diagnostics_record,
)
from .kernels import (
    capillary_stress,
    chemical_potential,
    conductivity_at_nodes,
    pressure,
    velocity_gradient,
)
from .state import Params, State
from .tridiag import solve_tridiagonal

logger = logging.getLogger(__name__)


class StepRejected(Exception):
    """A sub-solve could not produce an admissible update at this dt."""


class StepFailure(RuntimeError):
    """dt fell below ``dt_min``. Carries the failing state and, from ``run``,
    the partial trajectory."""

    def __init__(self, message, state=None, diagnostics=None, trajectory=None):
        super().__init__(message)
        self.state = state
        self.diagnostics = diagnostics
        self.trajectory = trajectory


class StopRun(Exception):
    """Raised by an observer to end a run early; ``run`` returns normally."""


@dataclass(frozen=True)
class StepConfig:
    dt_init: float = 1e-3
    cfl_safety: float = 0.4
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    dt_min: float = 1e-12
    # a fixed step (still capped by stable_dt) for refinement studies
    dt_fixed: float | None = None
    # combine two half steps with one full step for second order in time
    extrapolate: bool = True

    def __post_init__(self):
        if not self.dt_init > 0:
            raise ValueError("dt_init must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be at least 1")
        if not self.dt_min > 0:
            raise ValueError("dt_min must be positive")
        if self.dt_fixed is not None and not self.dt_fixed > 0:
            raise ValueError("dt_fixed must be positive")


@dataclass(frozen=True)
class StepOutcome:
    state: State
    dt_used: float
    picard_iters: int
    halvings: int


def stable_dt(state: State, params: Params, cfg: StepConfig) -> float:
    """Acoustic CFL bound combined with the explicit reaction bound."""
    grid = state.grid
    v, u = state.v, state.u
    speed = np.maximum(np.abs(u[:-1]), np.abs(u[1:])) + np.sqrt(params.gas_const * state.theta / v)
    dt_wave = cfg.cfl_safety * grid.dx / float(speed.max())
    # dt * v <= eps keeps the lagged-cubic phase update inside [-1, 1]
    dt_react = cfg.cfl_safety * params.epsilon * min(float(v.min()), 1.0 / float(v.max()))
    return min(dt_wave, dt_react)


def _cell_operator(coef: np.ndarray, n: int):
    """Off-diagonals of ``-D_x(coef D_x .)`` on cells with zero boundary flux;
    ``coef`` holds the N - 1 interior-node coefficients already divided by dx^2."""
    lower = np.zeros(n)
    upper = np.zeros(n)
    lower[1:] = -coef
    upper[:-1] = -coef
    diag = np.zeros(n)
    diag[1:] += coef
    diag[:-1] += coef
    return lower, diag, upper


def _divergence(flux_interior: np.ndarray, n: int, dx: float) -> np.ndarray:
    """Cell difference of a node flux that vanishes at both ends."""
    q = np.zeros(n + 1)
    q[1:-1] = flux_interior
    return (q[1:] - q[:-1]) / dx


def momentum_forcing(state: State, params: Params) -> np.ndarray:
    """Node acceleration from pressure and capillary stress, ``-D_x(p + cap)``."""
    grid = state.grid
    total = pressure(state.v, state.theta, params) + capillary_stress(state.phi, state.v, params, grid)
    f = np.zeros(grid.n_cells + 1)
    f[1:-1] = -(total[1:] - total[:-1]) / grid.dx
    return f


def solve_momentum_implicit(state: State, forcing: np.ndarray, dt: float, params: Params) -> np.ndarray:
    """Backward-Euler viscosity with explicit node ``forcing``; returns ``u*``."""
    grid = state.grid
    n, dx = grid.n_cells, grid.dx
    u, v = state.u, state.v
    k = params.nu / (v * dx * dx)
    diag = 1.0 / dt + k[:-1] + k[1:]
    lower = np.concatenate([[0.0], -k[1:-1]])
    upper = np.concatenate([-k[1:-1], [0.0]])
    s = params.nu * velocity_gradient(u, grid) / v
    rhs = (s[1:] - s[:-1]) / dx + np.asarray(forcing)[1:-1]
    du = solve_tridiagonal(lower, diag, upper, rhs)
    u_new = np.zeros(n + 1)
    u_new[1:-1] = u[1:-1] + du
    return u_new


def update_volume(v: np.ndarray, u_new: np.ndarray, dt: float, dx: float) -> np.ndarray:
    return v + dt * ((u_new[1:] - u_new[:-1]) / dx)


def solve_phase_implicit(state: State, dt: float, params: Params) -> np.ndarray:
    """Allen-Cahn update with the cubic lagged as ``phi_old^2 phi_new``.

    ``state.v`` is the specific volume the update is taken at."""
    grid = state.grid
    n, dx = grid.n_cells, grid.dx
    eps = params.epsilon
    v, phi = state.v, state.phi
    w = 0.5 * (1.0 / v[:-1] + 1.0 / v[1:])
    lower, diag, upper = _cell_operator(eps * w / (dx * dx), n)
    diag += 1.0 / (v * dt) + phi * phi / eps
    rhs = -chemical_potential(phi, v, params, grid)
    return phi + solve_tridiagonal(lower, diag, upper, rhs)


@dataclass(frozen=True)
class HeatSolve:
    theta: np.ndarray
    iterations: int
    residual: float


def heat_residual(theta_new, state: State, u_new, mu_new, dt: float, params: Params,
                  *, with_scale: bool = False):
    """Cellwise residual of the fully nonlinear implicit heat equation.

    With ``with_scale`` also returns the largest cellwise sum of the absolute
    values of the individual terms, the natural yardstick for roundoff."""
    grid = state.grid
    v = state.v
    ux = velocity_gradient(u_new, grid)
    source = params.nu * ux * ux / v + v * mu_new * mu_new
    kappa = conductivity_at_nodes(theta_new, v, params)
    flux = kappa * ((theta_new[1:] - theta_new[:-1]) / grid.dx)
    storage = params.c_v * (theta_new - state.theta) / dt
    work = params.gas_const * theta_new * ux / v
    res = storage + work - _divergence(flux, grid.n_cells, grid.dx) - source
    if not with_scale:
        return res
    # a face difference carries roundoff relative to the values, not the difference
    q = np.zeros(grid.n_cells + 1)
    q[1:-1] = kappa * (np.abs(theta_new[1:]) + np.abs(theta_new[:-1])) / grid.dx
    terms = (params.c_v * (np.abs(theta_new) + np.abs(state.theta)) / dt + np.abs(work)
             + (q[1:] + q[:-1]) / grid.dx + np.abs(source))
    return res, float(terms.max())


def solve_heat_implicit(state: State, u_new: np.ndarray, mu_new: np.ndarray, dt: float,
                        params: Params, cfg: StepConfig = StepConfig()) -> HeatSolve:
    """Picard iteration on the conductivity; ``state`` carries ``theta^n`` and
    the updated ``v``. Raises :class:`StepRejected` on loss of positivity or
    non-convergence."""
    grid = state.grid
    n, dx = grid.n_cells, grid.dx
    v, th0 = state.v, state.theta
    ux = velocity_gradient(u_new, grid)
    work = params.gas_const * ux / v
    source = params.nu * ux * ux / v + v * mu_new * mu_new
    base = params.c_v / dt + work
    if not np.all(base > 0):
        raise StepRejected("heat operator lost diagonal dominance (strong compression)")

    theta = th0
    for it in range(1, cfg.picard_max_iter + 1):
        coef = conductivity_at_nodes(theta, v, params) / (dx * dx)
        lower, diag, upper = _cell_operator(coef, n)
        diag += base
        rhs = source - work * th0 + _divergence(coef * dx * (th0[1:] - th0[:-1]), n, dx)
        theta = th0 + solve_tridiagonal(lower, diag, upper, rhs)
        if not np.all(theta > 0):
            raise StepRejected(f"temperature lost positivity in Picard iteration {it}")
        r, scale = heat_residual(theta, state, u_new, mu_new, dt, params, with_scale=True)
        res = float(np.max(np.abs(r))) / scale
        if res < cfg.picard_tol:
            return HeatSolve(theta, it, res)
    raise StepRejected(f"Picard iteration did not converge in {cfg.picard_max_iter} iterations "
                       f"(relative residual {res:.3e})")


def _advance(state: State, dt: float, params: Params, cfg: StepConfig):
    grid = state.grid
    forcing = momentum_forcing(state, params)
    u_new = solve_momentum_implicit(state, forcing, dt, params)
    v_new = update_volume(state.v, u_new, dt, grid.dx)
    if not np.all(v_new > 0):
        raise StepRejected("specific volume lost positivity")
    phi_new = solve_phase_implicit(state.replace(v=v_new), dt, params)
    mu_new = chemical_potential(phi_new, v_new, params, grid)
    heat = solve_heat_implicit(state.replace(v=v_new), u_new, mu_new, dt, params, cfg)
    new = State(time=state.time + dt, v=v_new, u=u_new, theta=heat.theta, phi=phi_new)
    return new, heat.iterations


def _extrapolate(state: State, coarse: State, iters: int, dt: float, params: Params,
                 cfg: StepConfig):
    half, it1 = _advance(state, 0.5 * dt, params, cfg)
    fine, it2 = _advance(half, 0.5 * dt, params, cfg)
    # 2 v_fine - v_coarse written as one telescoping update, so the mass
    # sees a single rounding per cell
    u_eff = (half.u + fine.u) - coarse.u
    v = update_volume(state.v, u_eff, dt, state.grid.dx)
    theta = 2.0 * fine.theta - coarse.theta
    if not (np.all(v > 0) and np.all(theta > 0)):
        raise StepRejected("extrapolated state lost positivity")
    new = State(time=state.time + dt, v=v, u=2.0 * fine.u - coarse.u,
                theta=theta, phi=2.0 * fine.phi - coarse.phi)
    return new, iters + it1 + it2


def step(state: State, params: Params, cfg: StepConfig = StepConfig(),
         dt: float | None = None) -> StepOutcome:
    """Advance one step of at most ``min(dt, stable_dt)``; halve on rejection."""
    limit = stable_dt(state, params, cfg)
    if cfg.dt_fixed is not None:
        limit = min(limit, cfg.dt_fixed)
    dt = limit if dt is None else min(dt, limit)
    halvings = 0
    while True:
        if dt < cfg.dt_min:
            raise StepFailure(
                f"time step underflow at t={state.time!r}: dt={dt:.3e} < dt_min={cfg.dt_min:.3e}",
                state=state, diagnostics=diagnostics_record(state, params))
        try:
            new, iters = _advance(state, dt, params, cfg)
            if cfg.extrapolate:
                new, iters = _extrapolate(state, new, iters, dt, params, cfg)
        except StepRejected as exc:
            logger.debug("step rejected at t=%g dt=%g: %s", state.time, dt, exc)
            dt *= 0.5
            halvings += 1
            continue
        return StepOutcome(state=new, dt_used=dt, picard_iters=iters, halvings=halvings)


@dataclass(frozen=True)
class RunIntegrals:
    """Accumulated time integrals handed to observers after each step."""

    time: float
    steps: int
    dissipation_integral: float
    record: DiagnosticsRecord
    tracker: RepresentationTracker | None


@dataclass
class Trajectory:
    params: Params
    records: list = field(default_factory=list)
    dissipation_integral: list = field(default_factory=list)
    dt_used: list = field(default_factory=list)
    picard_iters: list = field(default_factory=list)
    halvings: int = 0
    states: list = field(default_factory=list)
    representation: list = field(default_factory=list)
    status: str = "running"
    message: str = ""

    @property
    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.records])

    @property
    def initial(self) -> State:
        return self.states[0]

    @property
    def final(self) -> State:
        return self.states[-1]

    @property
    def steps(self) -> int:
        return len(self.dt_used)


_END_SLACK = 1e-9

Observer = Callable[[State, float, RunIntegrals], None]


def run(initial: State, params: Params, cfg: StepConfig, t_end: float,
        observers: Sequence[Observer] = (), *, keep_every: int = 1,
        max_steps: int | None = None, track_representation: bool = True) -> Trajectory:
    """Integrate to exactly ``t_end`` (or ``max_steps`` steps).

    Every accepted state gets a :class:`DiagnosticsRecord`; every
    ``keep_every``-th state (and the last) is stored along with its
    representation check. ``int V ds`` is accumulated by the trapezoid rule.
    """
    if not t_end > initial.time:
        raise ValueError("t_end must exceed the initial time")
    if keep_every < 1:
        raise ValueError("keep_every must be at least 1")
    traj = Trajectory(params=params)
    tracker = RepresentationTracker(initial, params) if track_representation else None
    state = initial
    record = diagnostics_record(state, params)
    integral = 0.0
    traj.records.append(record)
    traj.dissipation_integral.append(integral)

    def keep(s):
        traj.states.append(s)
        if tracker is not None:
            traj.representation.append(tracker.check(s))

    keep(state)
    dt_cap = cfg.dt_init if cfg.dt_fixed is None else cfg.dt_fixed
    n = 0
    while state.time < t_end and (max_steps is None or n < max_steps):
        remaining = t_end - state.time
        # a leftover of a few ulps of t is folded into this step
        request = remaining if dt_cap >= remaining * (1 - _END_SLACK) else dt_cap
        try:
            out = step(state, params, cfg, dt=request)
        except StepFailure as exc:
            traj.status = "failed"
            traj.message = str(exc)
            if traj.states[-1] is not state:
                keep(state)
            exc.trajectory = traj
            raise
        new = out.state
        if out.dt_used >= remaining * (1 - _END_SLACK):
            new = new.replace(time=t_end)
        n += 1
        if cfg.dt_fixed is None:
            dt_cap = 2.0 * out.dt_used
        new_record = diagnostics_record(new, params)
        integral += 0.5 * out.dt_used * (record.dissipation + new_record.dissipation)
        if tracker is not None:
            tracker.update(new, out.dt_used)
        state, record = new, new_record
        traj.records.append(record)
        traj.dissipation_integral.append(integral)
        traj.dt_used.append(out.dt_used)
        traj.picard_iters.append(out.picard_iters)
        traj.halvings += out.halvings
        done = state.time >= t_end or (max_steps is not None and n >= max_steps)
        if n % keep_every == 0 or done:
            keep(state)
        info = RunIntegrals(state.time, n, integral, record, tracker)
        try:
            for obs in observers:
                obs(state, out.dt_used, info)
        except StopRun as exc:
            if traj.states[-1] is not state:
                keep(state)
            traj.status = "stopped"
            traj.message = str(exc)
            return traj
    traj.status = "completed"
    return traj
