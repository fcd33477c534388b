"""Domain types, the uniform mass grid, quadrature and initial-data checks.

Fields follow a staggered layout on the Lagrangian mass interval [0, 1]:
specific volume ``v``, temperature ``theta`` and phase field ``phi`` live at
the ``N`` cell centers, velocity ``u`` at the ``N + 1`` nodes.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

#: Tolerance on |phi| - 1 used by the monitors; phi is never clamped.
PHI_TOL = 1e-8


class InvalidGridError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class PositivityError(ValueError):
    """Raised when a kernel needs ``v > 0`` or ``theta > 0`` and does not get it."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Params:
    """Physical constants. Everything except ``epsilon`` and ``beta`` defaults
    to the normalized value 1."""

    epsilon: float
    beta: float
    nu: float = 1.0
    gas_const: float = 1.0
    c_v: float = 1.0
    kappa_tilde: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "beta", "nu", "gas_const", "c_v", "kappa_tilde"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite number, got {value!r}")
            # beta = 0 is the constant-conductivity limit
            if value < 0 or (value == 0 and name != "beta"):
                raise ValueError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True, eq=False)
class Grid:
    n_cells: int
    dx: float
    centers: np.ndarray
    nodes: np.ndarray


@lru_cache(maxsize=64)
def make_grid(n_cells: int) -> Grid:
    """Uniform grid of ``n_cells`` cells on the mass interval [0, 1]."""
    if isinstance(n_cells, bool) or not isinstance(n_cells, (int, np.integer)):
        raise InvalidGridError(f"n_cells must be an integer, got {n_cells!r}")
    n = int(n_cells)
    if n < 2:
        raise InvalidGridError(f"need at least 2 cells, got {n}")
    # integer numerators keep centers exactly symmetric about 1/2
    centers = (np.arange(n) + 0.5) / n
    nodes = np.arange(n + 1) / n
    return Grid(n_cells=n, dx=1.0 / n, centers=_frozen(centers), nodes=_frozen(nodes))


@dataclass(frozen=True, eq=False)
class State:
    time: float
    v: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        for name in ("v", "u", "theta", "phi"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.v.shape[0]
        if self.v.ndim != 1 or self.theta.shape != (n,) or self.phi.shape != (n,):
            raise ShapeError("v, theta and phi must be 1-D arrays of equal length")
        if self.u.shape != (n + 1,):
            raise ShapeError(f"u must have n_cells + 1 = {n + 1} node values, got {self.u.shape}")

    @property
    def n_cells(self) -> int:
        return self.v.shape[0]

    @property
    def grid(self) -> Grid:
        return make_grid(self.n_cells)

    def replace(self, **changes) -> "State":
        return replace(self, **changes)


class Violation(NamedTuple):
    check: str
    index: int
    value: float


@dataclass(frozen=True)
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "initial data ok"
        lines = [f"{len(self.violations)} violation(s):"]
        lines += [f"  {v.check}: index {v.index}, value {v.value!r}" for v in self.violations]
        return "\n".join(lines)


def integrate(field: np.ndarray, grid: Grid) -> float:
    """Midpoint rule over the cells."""
    field = np.asarray(field, dtype=np.float64)
    if field.shape != (grid.n_cells,):
        raise ShapeError(f"expected {grid.n_cells} cell values, got shape {field.shape}")
    return math.fsum(field) * grid.dx


def _integrate_nodes(values: np.ndarray, grid: Grid) -> float:
    """Trapezoid rule over node values."""
    return (math.fsum(values) - 0.5 * (values[0] + values[-1])) * grid.dx


def validate_initial_data(state: State, params: Params | None = None) -> ValidationReport:
    """List every violated hypothesis on the initial data; never raises."""
    violations = []

    def worst(check, values, bad, key):
        if np.any(bad):
            idx = np.flatnonzero(bad)
            i = int(idx[np.argmax(key(values[idx]))])
            violations.append(Violation(check, i, float(values[i])))

    for name in ("v", "u", "theta", "phi"):
        arr = getattr(state, name)
        worst(f"{name}0 finite", arr, ~np.isfinite(arr), lambda a: np.zeros_like(a))
    worst("inf v0 > 0", state.v, state.v <= 0, lambda a: -a)
    worst("inf theta0 > 0", state.theta, state.theta <= 0, lambda a: -a)
    worst("phi0 in [-1,1]", state.phi, np.abs(state.phi) > 1.0, np.abs)
    u_bd = np.array([state.u[0], state.u[-1]])
    if np.any(u_bd != 0.0):
        i = 0 if abs(u_bd[0]) >= abs(u_bd[1]) else state.n_cells
        violations.append(Violation("u0 = 0 on boundary", i, float(state.u[i])))
    return ValidationReport(violations)


def normalize_initial_data(state: State, params: Params, *, rescale_energy: bool = False) -> State:
    """Rescale ``v`` to unit total mass.

    The total energy is logged but left alone unless ``rescale_energy`` is set,
    in which case ``theta`` is scaled so the energy integral equals exactly 1.
    Idempotent: data already normalized to within a few ulps is returned as is.
    """
    grid = state.grid
    mass = integrate(state.v, grid)
    if not mass > 0:
        raise PositivityError(f"total mass must be positive, got {mass}")
    if abs(mass - 1.0) > 4 * np.finfo(float).eps:
        state = state.replace(v=state.v / mass)

    from .diagnostics import conserved_quantities

    energy = conserved_quantities(state, params)["energy"]
    logger.info("initial total energy %.17g", energy)
    if rescale_energy and abs(energy - 1.0) > 4 * np.finfo(float).eps:
        internal = params.c_v * integrate(state.theta, grid)
        rest = energy - internal
        if rest >= 1.0:
            raise ValueError(
                f"cannot normalize energy to 1: non-thermal part is already {rest}")
        state = state.replace(theta=state.theta * ((1.0 - rest) / internal))
    return state


def discrete_norms(state: State) -> dict:
    """L2 norms of all fields and H1 seminorms of the cell fields."""
    grid = state.grid
    out = {}
    for name in ("v", "theta", "phi"):
        f = getattr(state, name)
        out[f"l2_{name}"] = math.sqrt(integrate(f * f, grid))
        # boundary faces carry no contribution under the Neumann conditions
        d = np.diff(f)
        out[f"h1_{name}"] = math.sqrt(math.fsum(d * d) / grid.dx)
    out["l2_u"] = math.sqrt(_integrate_nodes(state.u * state.u, grid))
    return out
