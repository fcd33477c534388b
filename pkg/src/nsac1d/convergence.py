"""Three-grid self-convergence studies."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .integrator import StepConfig, Trajectory, run, stable_dt
from .state import Grid, Params, State, make_grid

FIELDS = ("v", "u", "theta", "phi")


@dataclass(frozen=True)
class Problem:
    """Everything needed to rerun one problem on different grids.

    ``initial`` maps a grid to the (normalized) initial state; it must be
    picklable for parallel studies (a module-level function or a
    ``functools.partial`` of one).
    """

    initial: Callable[[Grid], State]
    params: Params
    t_end: float
    step: StepConfig = StepConfig()


@dataclass(frozen=True)
class FieldOrder:
    coarse_diff: float
    fine_diff: float
    order: float | None
    status: str  # "order", "exact" or "indeterminate"

    @property
    def passed(self) -> bool:
        return self.status == "exact" or (self.order is not None and self.order >= 1.0)


@dataclass(frozen=True)
class ConvergenceResult:
    grids: tuple
    dts: tuple
    fields: dict

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.fields.values())

    def table(self) -> str:
        lines = [f"grids {self.grids[0]}/{self.grids[1]}/{self.grids[2]}, "
                 f"dt {self.dts[0]:.4g}/{self.dts[1]:.4g}/{self.dts[2]:.4g}",
                 f"{'field':<6} {'|S_N - S_2N|':>14} {'|S_2N - S_4N|':>14} {'order':>7}"]
        for name, f in self.fields.items():
            order = "exact" if f.status == "exact" else (
                "indet." if f.order is None else f"{f.order:.3f}")
            lines.append(f"{name:<6} {f.coarse_diff:14.6e} {f.fine_diff:14.6e} {order:>7}")
        return "\n".join(lines)


def restrict_cells(f: np.ndarray, factor: int) -> np.ndarray:
    """Average groups of ``factor`` fine cells onto a coarse cell."""
    return f.reshape(-1, factor).mean(axis=1)


def restrict_nodes(f: np.ndarray, factor: int) -> np.ndarray:
    """Inject fine nodes that coincide with coarse nodes."""
    return f[::factor]


def _restrict(state: State, factor: int) -> dict:
    return {
        "v": restrict_cells(state.v, factor),
        "u": restrict_nodes(state.u, factor),
        "theta": restrict_cells(state.theta, factor),
        "phi": restrict_cells(state.phi, factor),
    }


def _l1(diff: np.ndarray, dx: float) -> float:
    return math.fsum(np.abs(diff)) * dx


def observed_orders(coarse: State, mid: State, fine: State) -> dict:
    """Per-field ``log2(|S_N - S_2N| / |S_2N - S_4N|)`` in L1 on the coarse grid."""
    n = coarse.n_cells
    if mid.n_cells != 2 * n or fine.n_cells != 4 * n:
        raise ValueError("grids must be nested N, 2N, 4N")
    dx = 1.0 / n
    a = _restrict(coarse, 1)
    b = _restrict(mid, 2)
    c = _restrict(fine, 4)
    out = {}
    for name in FIELDS:
        e1 = _l1(a[name] - b[name], dx)
        e2 = _l1(b[name] - c[name], dx)
        if e1 == 0.0 and e2 == 0.0:
            out[name] = FieldOrder(e1, e2, None, "exact")
        elif e2 == 0.0 or e1 <= e2:
            out[name] = FieldOrder(e1, e2, None, "indeterminate")
        else:
            out[name] = FieldOrder(e1, e2, math.log2(e1 / e2), "order")
    return out


def level_step_sizes(problem: Problem, grids, dt_per_dx: float | None = None) -> tuple:
    """dt proportional to dx on every level.

    Without ``dt_per_dx`` the coarse level takes ``stable_dt`` of its initial
    state and finer levels scale it by the grid ratio."""
    n0 = grids[0]
    if dt_per_dx is not None:
        return tuple(dt_per_dx / n for n in grids)
    dt0 = stable_dt(problem.initial(make_grid(n0)), problem.params, problem.step)
    return tuple(dt0 * n0 / n for n in grids)


def run_level(problem: Problem, n_cells: int, dt: float, **kwargs) -> Trajectory:
    cfg = replace(problem.step, dt_fixed=dt)
    initial = problem.initial(make_grid(n_cells))
    return run(initial, problem.params, cfg, problem.t_end, **kwargs)


def _final_state(args):
    problem, n, dt = args
    return run_level(problem, n, dt, keep_every=10**9, track_representation=False).final


def self_convergence(problem: Problem, grids=(128, 256, 512), dt_per_dx: float | None = None,
                     workers: int = 1) -> ConvergenceResult:
    grids = tuple(int(n) for n in grids)
    if len(grids) != 3 or grids[1] != 2 * grids[0] or grids[2] != 2 * grids[1]:
        raise ValueError(f"need three nested grids N, 2N, 4N; got {grids}")
    dts = level_step_sizes(problem, grids, dt_per_dx)
    jobs = [(problem, n, dt) for n, dt in zip(grids, dts)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, 3)) as pool:
            finals = list(pool.map(_final_state, jobs))
    else:
        finals = [_final_state(j) for j in jobs]
    return ConvergenceResult(grids=grids, dts=dts, fields=observed_orders(*finals))
