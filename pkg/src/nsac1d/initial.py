"""Builtin initial-condition library.

Every profile is defined as a function of the mass coordinate, independent
of the grid it is sampled on, so the same name and seed describe the same
continuous data at every resolution (needed for refinement studies).
"""
from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicSpline

from .state import Grid, Params, State, normalize_initial_data

BUILTINS = ("equilibrium", "sine_perturbation", "tanh_interface", "large_oscillation")

# control lattice and reference sampling for the random profiles
_N_CONTROL = 12
_SMOOTH_WINDOW = 3
_N_REFERENCE = 4097


def equilibrium(grid: Grid, params: Params) -> State:
    n = grid.n_cells
    return State(time=0.0, v=np.ones(n), u=np.zeros(n + 1), theta=np.ones(n), phi=np.ones(n))


def sine_perturbation(grid: Grid, params: Params, amplitude: float = 0.2) -> State:
    if not 0 < amplitude < 0.5:
        raise ValueError(f"amplitude must lie in (0, 0.5), got {amplitude}")
    x, xn = grid.centers, grid.nodes
    u = amplitude * np.sin(np.pi * xn)
    u[0] = u[-1] = 0.0
    return State(
        time=0.0,
        v=1.0 + amplitude * np.sin(2 * np.pi * x),
        u=u,
        theta=1.0 + amplitude * np.cos(2 * np.pi * x),
        phi=np.ones(grid.n_cells),
    )


def tanh_interface(grid: Grid, params: Params) -> State:
    n = grid.n_cells
    # (i + 1/2 - n/2) / n is exactly antisymmetric under i -> n - 1 - i
    z = (np.arange(n) + 0.5 - 0.5 * n) / n
    phi = np.tanh(z / (math.sqrt(2.0) * params.epsilon))
    return State(time=0.0, v=np.ones(n), u=np.zeros(n + 1), theta=np.ones(n), phi=phi)


def _smooth_profile(rng: np.random.Generator):
    """Seeded noise on a control lattice, moving-average smoothed and
    interpolated by a spline with zero end slopes. Returns the spline and its
    range over a fixed fine reference sampling."""
    noise = rng.standard_normal(_N_CONTROL)
    pad = _SMOOTH_WINDOW // 2
    padded = np.pad(noise, pad, mode="reflect")
    smooth = np.convolve(padded, np.ones(_SMOOTH_WINDOW) / _SMOOTH_WINDOW, mode="valid")
    spline = CubicSpline(np.linspace(0.0, 1.0, _N_CONTROL), smooth, bc_type="clamped")
    ref = spline(np.linspace(0.0, 1.0, _N_REFERENCE))
    return spline, float(ref.min()), float(ref.max())


def _scaled(spline, lo, hi, x, a, b):
    return a + (b - a) * (spline(x) - lo) / (hi - lo)


def large_oscillation(grid: Grid, params: Params, seed: int = 0) -> State:
    """Random smooth data: ``v`` and ``theta`` in [0.3, 3], ``phi`` in
    [-0.9, 0.9] and ``u`` with amplitude 1 vanishing at both ends. ``v`` is
    drawn in [0.3, 3] before the mass normalization."""
    rng = np.random.default_rng(seed)
    sv, st, su, sp = (_smooth_profile(rng) for _ in range(4))
    x, xn = grid.centers, grid.nodes
    v = _scaled(*sv, x, 0.3, 3.0)
    theta = _scaled(*st, x, 0.3, 3.0)
    phi = _scaled(*sp, x, -0.9, 0.9)
    u = _scaled(*su, xn, -1.0, 1.0) * np.sin(np.pi * xn)
    u[0] = u[-1] = 0.0
    return State(time=0.0, v=v, u=u, theta=theta, phi=phi)


def raw_initial_condition(name: str, grid: Grid, params: Params, seed: int = 0, *,
                          amplitude: float = 0.2) -> State:
    """Named initial state on ``grid`` before any normalization."""
    if name == "equilibrium":
        return equilibrium(grid, params)
    if name == "sine_perturbation":
        return sine_perturbation(grid, params, amplitude)
    if name == "tanh_interface":
        return tanh_interface(grid, params)
    if name == "large_oscillation":
        return large_oscillation(grid, params, seed)
    raise ValueError(f"unknown initial condition {name!r}; choose from {', '.join(BUILTINS)}")


def builtin_initial_condition(name: str, grid: Grid, params: Params, seed: int = 0, *,
                              amplitude: float = 0.2, rescale_energy: bool = False) -> State:
    """Named initial state on ``grid``, normalized to unit mass."""
    state = raw_initial_condition(name, grid, params, seed, amplitude=amplitude)
    return normalize_initial_data(state, params, rescale_energy=rescale_energy)
