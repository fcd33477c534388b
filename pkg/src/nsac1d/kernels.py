"""Stencil evaluation of the spatial terms of the Lagrangian system.

Node ``j`` sits between cells ``j - 1`` and ``j``. Gradients of cell fields
are formed at interior nodes; the boundary nodes carry the insulated /
Neumann value 0. Face values of ``v`` and ``theta`` are arithmetic means of
the two neighbouring cells, and ``1/v`` in the phase-field flux is the
arithmetic mean of the two reciprocals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import Grid, Params, PositivityError, ShapeError, State, make_grid


def _check_cells(f, grid: Grid, name: str) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (grid.n_cells,):
        raise ShapeError(f"{name}: expected {grid.n_cells} cell values, got shape {f.shape}")
    return f


def _check_positive(f: np.ndarray, name: str) -> None:
    if not np.all(f > 0):
        i = int(np.argmin(f))
        raise PositivityError(f"{name} must be positive; {name}[{i}] = {f[i]!r}")


def grad_at_nodes(f, grid: Grid, bc="neumann") -> np.ndarray:
    """Centered difference of a cell field at the N + 1 nodes.

    ``bc`` is ``"neumann"`` (zero boundary gradient) or a float/pair giving
    Dirichlet boundary values, in which case the boundary gradient is a
    half-cell one-sided difference.
    """
    f = _check_cells(f, grid, "field")
    g = np.zeros(grid.n_cells + 1)
    g[1:-1] = (f[1:] - f[:-1]) / grid.dx
    if isinstance(bc, str):
        if bc != "neumann":
            raise ValueError(f"unknown boundary condition {bc!r}")
    else:
        left, right = np.broadcast_to(np.asarray(bc, dtype=np.float64), (2,))
        g[0] = (f[0] - left) / (0.5 * grid.dx)
        g[-1] = (right - f[-1]) / (0.5 * grid.dx)
    return g


def face_mean(f: np.ndarray) -> np.ndarray:
    """Arithmetic mean at the interior nodes."""
    return 0.5 * (f[:-1] + f[1:])


def velocity_gradient(u: np.ndarray, grid: Grid) -> np.ndarray:
    """``u_x`` at cell centers."""
    return (u[1:] - u[:-1]) / grid.dx


def squared_gradient_at_centers(phi: np.ndarray, grid: Grid) -> np.ndarray:
    """``phi_x**2`` formed at nodes and averaged onto cells."""
    g = grad_at_nodes(phi, grid)
    g2 = g * g
    return 0.5 * (g2[:-1] + g2[1:])


def phase_flux(phi: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    """``phi_x / v`` at nodes; zero at both boundary nodes."""
    w = 0.5 * (1.0 / v[:-1] + 1.0 / v[1:])
    q = np.zeros(grid.n_cells + 1)
    q[1:-1] = w * ((phi[1:] - phi[:-1]) / grid.dx)
    return q


def chemical_potential(phi, v, params: Params, grid: Grid | None = None) -> np.ndarray:
    """``mu = (phi^3 - phi)/eps - eps (phi_x / v)_x`` at cell centers."""
    grid = grid or make_grid(len(phi))
    phi = _check_cells(phi, grid, "phi")
    v = _check_cells(v, grid, "v")
    _check_positive(v, "v")
    eps = params.epsilon
    q = phase_flux(phi, v, grid)
    return (phi * phi * phi - phi) / eps - eps * ((q[1:] - q[:-1]) / grid.dx)


def pressure(v, theta, params: Params) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    _check_positive(v, "v")
    return params.gas_const * theta / v


def capillary_stress(phi, v, params: Params, grid: Grid | None = None) -> np.ndarray:
    """``(eps/2) phi_x^2 / v^2`` at cell centers."""
    grid = grid or make_grid(len(phi))
    phi = _check_cells(phi, grid, "phi")
    v = _check_cells(v, grid, "v")
    _check_positive(v, "v")
    return 0.5 * params.epsilon * squared_gradient_at_centers(phi, grid) / (v * v)


def conductivity_at_nodes(theta: np.ndarray, v: np.ndarray, params: Params) -> np.ndarray:
    """``kappa(theta_face) / v_face`` at the interior nodes."""
    return params.kappa_tilde * face_mean(theta) ** params.beta / face_mean(v)


def heat_flux(theta, v, params: Params, grid: Grid | None = None) -> np.ndarray:
    """``kappa(theta) theta_x / v`` at nodes, zero at the insulated ends."""
    grid = grid or make_grid(len(theta))
    theta = _check_cells(theta, grid, "theta")
    v = _check_cells(v, grid, "v")
    _check_positive(theta, "theta")
    _check_positive(v, "v")
    q = np.zeros(grid.n_cells + 1)
    q[1:-1] = conductivity_at_nodes(theta, v, params) * ((theta[1:] - theta[:-1]) / grid.dx)
    return q


def sigma_field(state: State, params: Params) -> np.ndarray:
    """Effective stress ``nu u_x/v - R theta/v - (eps/2) phi_x^2/v^2`` per cell."""
    grid = state.grid
    _check_positive(state.v, "v")
    ux = velocity_gradient(state.u, grid)
    return (params.nu * ux / state.v
            - pressure(state.v, state.theta, params)
            - capillary_stress(state.phi, state.v, params, grid))


@dataclass(frozen=True, eq=False)
class CoordinateMap:
    eulerian: np.ndarray
    lagrangian: np.ndarray

    def to_lagrangian(self, x_tilde):
        return np.interp(x_tilde, self.eulerian, self.lagrangian)

    def to_eulerian(self, x):
        return np.interp(x, self.lagrangian, self.eulerian)


def lagrangian_coordinate(rho0, x_tilde=None, *, mass_tol: float = 1e-10) -> CoordinateMap:
    """Cumulative trapezoidal mass ``x = int_0^x~ rho0``.

    ``rho0`` holds samples at ``x_tilde`` (uniform on [0, 1] when omitted).
    A repeated abscissa marks a density jump; the zero-width piece is dropped
    from the returned map.
    """
    rho0 = np.asarray(rho0, dtype=np.float64)
    if x_tilde is None:
        x_tilde = np.linspace(0.0, 1.0, rho0.size)
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    if x_tilde.shape != rho0.shape or rho0.size < 2:
        raise ShapeError("rho0 and x_tilde must be matching 1-D arrays of length >= 2")
    if x_tilde[0] != 0.0 or x_tilde[-1] != 1.0 or np.any(np.diff(x_tilde) < 0):
        raise ValueError("x_tilde must be nondecreasing from 0 to 1")
    _check_positive(rho0, "rho0")
    steps = 0.5 * (rho0[1:] + rho0[:-1]) * np.diff(x_tilde)
    x = np.concatenate([[0.0], np.cumsum(steps)])
    if abs(x[-1] - 1.0) > mass_tol:
        raise ValueError(f"total mass must be 1 within {mass_tol}, got {x[-1]!r}")
    keep = np.concatenate([[True], np.diff(x_tilde) > 0])
    return CoordinateMap(eulerian=x_tilde[keep], lagrangian=x[keep])


def eulerian_positions(state: State, grid: Grid | None = None) -> np.ndarray:
    """Physical node positions ``x~_j = sum_{i<j} v_i dx``."""
    grid = grid or state.grid
    _check_positive(state.v, "v")
    return np.concatenate([[0.0], np.cumsum(state.v * grid.dx)])
