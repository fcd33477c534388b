"""Conservation laws, the entropy/dissipation balance, the representation of
the specific volume, the mean-temperature bracket and pointwise bound monitors.

With non-default constants the entropy functional is weighted as
``R (v - ln v) + c_v (theta - ln theta)`` and the viscous dissipation carries
``nu``, so the balance ``F(t) + int_0^t V ds = F(0)`` stays exact for the
continuous problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .kernels import (
    chemical_potential,
    conductivity_at_nodes,
    squared_gradient_at_centers,
    velocity_gradient,
)
from .state import PHI_TOL, Params, PositivityError, State, integrate


def _kinetic(state: State) -> float:
    # u vanishes at both ends, so the nodal trapezoid is a plain sum
    u = state.u
    return 0.5 * math.fsum(u * u) * state.grid.dx


def free_energy_density(state: State, params: Params) -> np.ndarray:
    """Double-well plus gradient energy per cell."""
    eps = params.epsilon
    phi2m1 = state.phi * state.phi - 1.0
    gradient = 0.5 * eps * squared_gradient_at_centers(state.phi, state.grid) / state.v
    return phi2m1 * phi2m1 / (4.0 * eps) + gradient


def conserved_quantities(state: State, params: Params) -> dict:
    grid = state.grid
    mass = integrate(state.v, grid)
    energy = (_kinetic(state)
              + params.c_v * integrate(state.theta, grid)
              + integrate(free_energy_density(state, params), grid))
    return {"mass": mass, "energy": energy}


def _require_positive(state: State) -> None:
    if not (np.all(state.v > 0) and np.all(state.theta > 0)):
        raise PositivityError("entropy quantities need v > 0 and theta > 0")


def entropy_functional(state: State, params: Params) -> float:
    _require_positive(state)
    grid = state.grid
    v, th = state.v, state.theta
    cells = (free_energy_density(state, params)
             + params.gas_const * (v - np.log(v))
             + params.c_v * (th - np.log(th)))
    return _kinetic(state) + integrate(cells, grid)


def dissipation_terms(state: State, params: Params) -> dict:
    """The three nonnegative contributions to the dissipation rate."""
    _require_positive(state)
    grid = state.grid
    v, th = state.v, state.theta
    dth = (th[1:] - th[:-1]) / grid.dx
    # theta^2 at a face is the product of the neighbours: the exact discrete
    # counterpart of d(1/theta) = -dtheta / theta^2
    heat = conductivity_at_nodes(th, v, params) * dth * dth / (th[1:] * th[:-1])
    ux = velocity_gradient(state.u, grid)
    mu = chemical_potential(state.phi, v, params, grid)
    return {
        "heat": math.fsum(heat) * grid.dx,
        "viscous": integrate(params.nu * ux * ux / (v * th), grid),
        "phase": integrate(v * mu * mu / th, grid),
    }


def dissipation_rate(state: State, params: Params) -> float:
    return math.fsum(dissipation_terms(state, params).values())


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    mass: float
    energy: float
    entropy: float
    dissipation: float
    v_min: float
    v_max: float
    theta_min: float
    theta_max: float
    phi_min: float
    phi_max: float
    mean_theta: float
    v_argmin: int
    theta_argmin: int
    phi_argmin: int
    phi_argmax: int


def diagnostics_record(state: State, params: Params) -> DiagnosticsRecord:
    """All per-instant scalars. ``entropy`` and ``dissipation`` are NaN when
    ``v`` or ``theta`` is not positive."""
    # a non-positive v makes the gradient energy meaningless, not an error
    with np.errstate(divide="ignore", invalid="ignore"):
        cq = conserved_quantities(state, params)
    try:
        F = entropy_functional(state, params)
        V = dissipation_rate(state, params)
    except PositivityError:
        F = V = math.nan
    v, th, phi = state.v, state.theta, state.phi
    return DiagnosticsRecord(
        time=float(state.time),
        mass=cq["mass"],
        energy=cq["energy"],
        entropy=F,
        dissipation=V,
        v_min=float(v.min()),
        v_max=float(v.max()),
        theta_min=float(th.min()),
        theta_max=float(th.max()),
        phi_min=float(phi.min()),
        phi_max=float(phi.max()),
        mean_theta=integrate(th, state.grid),
        v_argmin=int(v.argmin()),
        theta_argmin=int(th.argmin()),
        phi_argmin=int(phi.argmin()),
        phi_argmax=int(phi.argmax()),
    )


def jensen_gap(state: State) -> float:
    """``int(theta - ln theta) - (mean - ln mean)``; nonnegative by convexity."""
    grid = state.grid
    th = state.theta
    mean = integrate(th, grid)
    return integrate(th - np.log(th), grid) - (mean - math.log(mean))


# ---------------------------------------------------------------- bracket


class NoRootError(ValueError):
    pass


@dataclass(frozen=True)
class BoundBracket:
    """Roots ``alpha1 <= 1 <= alpha2`` of ``x - ln x = E0``. ``upper`` is the
    admissible maximum of the mean temperature (1 under unit total energy)."""

    alpha1: float
    alpha2: float
    e0: float
    upper: float = 1.0


def _bisect(f, lo: float, hi: float) -> float:
    flo = f(lo)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def temperature_bracket(e0: float, upper: float = 1.0) -> BoundBracket:
    if not math.isfinite(e0) or e0 < 1.0:
        raise NoRootError(f"x - ln x = {e0!r} has no positive root (minimum value is 1)")
    if e0 == 1.0:
        return BoundBracket(1.0, 1.0, e0, upper)

    def f(x):
        return x - math.log(x) - e0

    # x - ln x > e0 at x = exp(-e0) and at x = e0 + ln(2 e0) + 1
    a1 = _bisect(f, math.exp(-e0), 1.0)
    a2 = _bisect(f, 1.0, e0 + math.log(2.0 * e0) + 1.0)
    return BoundBracket(a1, a2, e0, upper)


# ---------------------------------------------------------------- monitors


@dataclass(frozen=True)
class MonitorTolerances:
    phi: float = PHI_TOL
    mean_theta: float = 1e-6


class BoundViolation(NamedTuple):
    check: str
    time: float
    index: int
    value: float


def monitor_bounds(record: DiagnosticsRecord, bracket: BoundBracket | None = None,
                   tolerances: MonitorTolerances = MonitorTolerances()) -> list:
    """Flag sign and range violations; ``index`` is -1 for global quantities.

    The mean-temperature check runs only when a bracket is given."""
    t = record.time
    out = []
    if not record.v_min > 0:
        out.append(BoundViolation("v > 0", t, record.v_argmin, record.v_min))
    if not record.theta_min > 0:
        out.append(BoundViolation("theta > 0", t, record.theta_argmin, record.theta_min))
    if record.phi_min < -1.0 - tolerances.phi:
        out.append(BoundViolation("phi >= -1", t, record.phi_argmin, record.phi_min))
    if record.phi_max > 1.0 + tolerances.phi:
        out.append(BoundViolation("phi <= 1", t, record.phi_argmax, record.phi_max))
    if bracket is not None:
        m = record.mean_theta
        if not (bracket.alpha1 - tolerances.mean_theta <= m <= bracket.upper + tolerances.mean_theta):
            out.append(BoundViolation("mean theta in bracket", t, -1, m))
    return out


# ---------------------------------------------------------- representation


@dataclass(frozen=True, eq=False)
class RepresentationCheck:
    time: float
    D: np.ndarray
    Y: float
    integral_term: np.ndarray
    v_reconstructed: np.ndarray
    linf_error: float


def _exp_weights(lam: np.ndarray):
    """``int_0^1 exp(lam s) ds`` and ``int_0^1 s exp(lam s) ds``, elementwise."""
    lam = np.asarray(lam, dtype=np.float64)
    small = np.abs(lam) < 0.5
    ls = np.where(small, lam, 0.0)
    # Taylor series; 24 terms are exact to roundoff for |lam| < 0.5
    term = np.ones_like(ls)
    w0 = np.ones_like(ls)
    w1 = np.full_like(ls, 0.5)
    for k in range(1, 24):
        term = term * ls / k
        w0 = w0 + term / (k + 1)
        w1 = w1 + term / (k + 2)
    if not small.all():
        lb = np.where(small, 1.0, lam)
        em1 = np.expm1(lb)
        w0 = np.where(small, w0, em1 / lb)
        w1 = np.where(small, w1, (lb * np.exp(lb) - em1) / (lb * lb))
    return w0, w1


class RepresentationTracker:
    """Incremental bookkeeping for reconstructing ``v`` from the velocity,
    temperature and phase gradient history.

    ``v = D Y (1 + Q / nu)`` with
    ``D = v0 exp((I - I0)/nu) exp(-(M - M0)/nu)``, ``I = int_0^x u``,
    ``M = int v I dx``, ``Y = exp(-S/nu)`` where ``S`` is the time integral of
    ``int (u^2 + R theta + (eps/2) phi_x^2 / v) dx``, and ``Q`` the time
    integral of ``(R theta + (eps/2) phi_x^2/v) / (D Y)``. Space integrals use
    the trapezoid rule; time integrals use the trapezoid rule, with the
    ``1/(D Y)`` factor integrated exactly as the exponential of a piecewise
    linear function so stationary states are reproduced to roundoff.
    """

    def __init__(self, state: State, params: Params):
        self.params = params
        self.grid = state.grid
        self.v0 = state.v
        self.I0 = self._cumulative_u(state.u)
        self.M0 = math.fsum(state.v * self.I0) * self.grid.dx
        self.time = state.time
        self.S = 0.0
        self.Q = np.zeros(self.grid.n_cells)
        self._s_rate, self._h, self._L, self._D = self._local(state)

    def _cumulative_u(self, u: np.ndarray) -> np.ndarray:
        dx = self.grid.dx
        at_nodes = np.concatenate([[0.0], np.cumsum(0.5 * (u[:-1] + u[1:]) * dx)])
        # half-cell trapezoid from node i to center i, center value = node mean
        return at_nodes[:-1] + dx * (3.0 * u[:-1] + u[1:]) / 8.0

    def _local(self, state: State):
        p = self.params
        grid = self.grid
        I = self._cumulative_u(state.u)
        M = math.fsum(state.v * I) * grid.dx
        D = self.v0 * np.exp((I - self.I0) / p.nu) * np.exp(-(M - self.M0) / p.nu)
        cap = 0.5 * p.epsilon * squared_gradient_at_centers(state.phi, grid) / state.v
        h = p.gas_const * state.theta + cap
        s_rate = 2.0 * _kinetic(state) + integrate(h, grid)
        L = -np.log(D)
        return s_rate, h, L, D

    def update(self, state: State, dt: float) -> None:
        nu = self.params.nu
        s_rate, h, L_space, D = self._local(state)
        S_new = self.S + 0.5 * dt * (self._s_rate + s_rate)
        L_old = self._L + self.S / nu
        L_new = L_space + S_new / nu
        lam = L_new - L_old
        w0, w1 = _exp_weights(lam)
        self.Q = self.Q + dt * np.exp(L_old) * (self._h * w0 + (h - self._h) * w1)
        self.S = S_new
        self.time = state.time
        self._s_rate, self._h, self._L, self._D = s_rate, h, L_space, D

    def check(self, state: State) -> RepresentationCheck:
        nu = self.params.nu
        Y = math.exp(-self.S / nu)
        DY = self._D * Y
        integral = DY * (self.Q / nu)
        v_rec = DY + integral
        return RepresentationCheck(
            time=float(state.time),
            D=self._D,
            Y=Y,
            integral_term=integral,
            v_reconstructed=v_rec,
            linf_error=float(np.max(np.abs(v_rec - state.v))),
        )


def entropy_balance_residual(trajectory) -> np.ndarray:
    """``F(t) + int_0^t V ds - F(0)`` at every recorded time."""
    F = np.array([r.entropy for r in trajectory.records])
    return F + np.asarray(trajectory.dissipation_integral) - F[0]


def reconstruct_v(trajectory, t: float) -> RepresentationCheck:
    """Representation check stored at the kept state closest to ``t``."""
    checks = trajectory.representation
    if not checks:
        raise LookupError("trajectory holds no representation checks")
    times = np.array([c.time for c in checks])
    i = int(np.argmin(np.abs(times - t)))
    if abs(times[i] - t) > 1e-9 * max(1.0, abs(t)):
        raise LookupError(f"no kept state at t={t}; nearest is t={times[i]}")
    return checks[i]
