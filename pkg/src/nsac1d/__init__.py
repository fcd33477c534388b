"""Staggered finite-difference solver and invariant checks for the 1-D
non-isentropic compressible Navier-Stokes/Allen-Cahn system in Lagrangian
mass coordinates."""

from .state import Grid, Params, State, integrate, make_grid
from .integrator import StepConfig, run, step

__all__ = ["Grid", "Params", "State", "StepConfig", "integrate", "make_grid", "run", "step"]
__version__ = "0.1.0"
