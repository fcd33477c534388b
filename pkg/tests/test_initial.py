import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsac1d.diagnostics import conserved_quantities
from nsac1d.initial import BUILTINS, builtin_initial_condition, raw_initial_condition
from nsac1d.state import Params, integrate, make_grid, validate_initial_data


@pytest.mark.parametrize("n", [2, 16, 333])
def test_equilibrium(n, params):
    s = builtin_initial_condition("equilibrium", make_grid(n), params)
    assert validate_initial_data(s).ok
    assert conserved_quantities(s, params) == {"mass": 1.0, "energy": 1.0}


def test_sine_perturbation_formula(params):
    g = make_grid(64)
    s = raw_initial_condition("sine_perturbation", g, params, amplitude=0.3)
    np.testing.assert_array_equal(s.v, 1 + 0.3 * np.sin(2 * np.pi * g.centers))
    np.testing.assert_array_equal(s.theta, 1 + 0.3 * np.cos(2 * np.pi * g.centers))
    assert s.u[0] == s.u[-1] == 0.0
    np.testing.assert_allclose(s.u, 0.3 * np.sin(np.pi * g.nodes), atol=1e-16)
    assert np.all(s.phi == 1.0)


@pytest.mark.parametrize("a", [0.0, 0.5, -0.1])
def test_sine_amplitude_range(a, params):
    with pytest.raises(ValueError):
        raw_initial_condition("sine_perturbation", make_grid(8), params, amplitude=a)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.3])
def test_tanh_interface_profile(eps):
    p = Params(eps, 1.0)
    n = 256
    s = builtin_initial_condition("tanh_interface", make_grid(n), p)
    # end cells sit half a cell inside the interval
    x0 = 0.5 / n
    assert s.phi[0] == pytest.approx(math.tanh((x0 - 0.5) / (math.sqrt(2) * eps)), rel=1e-14)
    assert s.phi[0] == pytest.approx(-math.tanh(1 / (2 * math.sqrt(2) * eps)), abs=0.02)
    np.testing.assert_array_equal(s.phi[::-1], -s.phi)


def test_large_oscillation_ranges(params):
    s = raw_initial_condition("large_oscillation", make_grid(512), params, seed=7)
    assert 0.3 - 1e-3 <= s.v.min() and s.v.max() <= 3 + 1e-3
    assert 0.3 - 1e-3 <= s.theta.min() and s.theta.max() <= 3 + 1e-3
    assert -0.9 - 1e-3 <= s.phi.min() and s.phi.max() <= 0.9 + 1e-3
    assert s.u[0] == s.u[-1] == 0.0
    assert np.max(np.abs(s.u)) <= 1.0


def test_large_oscillation_seeded(params):
    g = make_grid(128)
    a = builtin_initial_condition("large_oscillation", g, params, seed=42)
    b = builtin_initial_condition("large_oscillation", g, params, seed=42)
    c = builtin_initial_condition("large_oscillation", g, params, seed=43)
    for f in ("v", "u", "theta", "phi"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    assert not np.array_equal(a.v, c.v)


def test_large_oscillation_is_grid_independent(params):
    # cell averages of a finer sampling approach the coarse one at second order
    def gap(n):
        coarse = raw_initial_condition("large_oscillation", make_grid(n), params, seed=3)
        fine = raw_initial_condition("large_oscillation", make_grid(2 * n), params, seed=3)
        return max(np.max(np.abs(getattr(fine, f).reshape(-1, 2).mean(axis=1) - getattr(coarse, f)))
                   for f in ("v", "theta", "phi"))

    assert gap(128) / gap(256) > 3.5


def test_unknown_name(params):
    with pytest.raises(ValueError, match="unknown"):
        builtin_initial_condition("vortex", make_grid(8), params)


@given(st.sampled_from(BUILTINS), st.integers(16, 600), st.integers(0, 2**63))
def test_every_builtin_is_valid_and_normalized(name, n, seed):
    p = Params(0.1, 1.0)
    g = make_grid(n)
    s = builtin_initial_condition(name, g, p, seed=seed)
    assert validate_initial_data(s).ok
    assert abs(integrate(s.v, g) - 1.0) <= 4 * np.finfo(float).eps
