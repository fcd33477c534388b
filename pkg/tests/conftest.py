import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nsac1d.initial import builtin_initial_condition
from nsac1d.state import Params, State, make_grid

settings.register_profile(
    "nsac1d", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("nsac1d")


@pytest.fixture
def params():
    return Params(epsilon=0.1, beta=1.0)


def equilibrium_state(n, v=1.0, theta=1.0, phi=1.0):
    return State(time=0.0, v=np.full(n, v), u=np.zeros(n + 1),
                 theta=np.full(n, theta), phi=np.full(n, phi))


def builtin(name, n, params, **kw):
    return builtin_initial_condition(name, make_grid(n), params, **kw)


def random_state(rng, n, *, u_scale=0.3, phi_range=0.9):
    """Smooth-ish random valid state (positive v and theta, u = 0 at the ends)."""
    u = u_scale * rng.standard_normal(n + 1)
    u[0] = u[-1] = 0.0
    return State(time=0.0, v=rng.uniform(0.5, 2.0, n), u=u,
                 theta=rng.uniform(0.5, 2.0, n), phi=rng.uniform(-phi_range, phi_range, n))


# one line per acceptance criterion, echoed in the terminal summary
_CRITERIA: dict = {}


@pytest.fixture
def criterion(request):
    """Call ``criterion(k, passed, detail)`` once per acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
