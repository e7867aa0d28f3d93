import warnings

import numpy as np
import pytest

from betareg.model import build_heat_plant, build_scalar_plant
from betareg.regop import build_regularized

# (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE_LOG = []

# non-collocated heat rod used by the benchmarks
HEAT_WINDOWS = dict(actuator=(0.1, 0.3), sensor=(0.6, 0.8), disturbance=(0.4, 0.6))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE_LOG, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def heat_plant():
    return build_heat_plant(50, **HEAT_WINDOWS)


@pytest.fixture(scope="session")
def heat_ops(heat_plant):
    return build_regularized(heat_plant, 0.9)


@pytest.fixture(scope="session")
def scalar_plant():
    return build_scalar_plant(-1.0, 1.0, 1.0, 1.0)


def random_stable_plant(rng, n):
    """Diagonal-plus-perturbation generator with positive actuator/sensor profiles."""
    from betareg.model import DiscreteFunctionSpace, SemilinearPlant

    d = rng.uniform(1.0, 10.0, n)
    P = rng.standard_normal((n, n))
    P *= 0.4 * d.min() / max(np.linalg.norm(P, 2), 1e-300)
    A = -np.diag(d) + P
    return SemilinearPlant(
        A=A,
        b=rng.uniform(0.5, 1.5, n),
        b_d=rng.standard_normal(n),
        c=rng.uniform(0.5, 1.5, n),
        space=DiscreteFunctionSpace.unit(n),
    )


def quiet_regularized(plant, beta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return build_regularized(plant, beta, check=False)
