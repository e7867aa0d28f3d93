import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from betareg.iterctl import setpoint_init
from betareg.model import (DiscreteFunctionSpace, Exosystem, SemilinearPlant, build_heat_plant,
                           build_scalar_plant, rotation_exosystem, spectral_abscissa)
from betareg.oracle import RegulatorError, oracle_closed_loop, solve_regulator
from betareg.simulate import IntegratorConfig

from conftest import HEAT_WINDOWS, random_stable_plant


def test_scalar_hand_solution():
    a, alpha = -1.0, 1.5
    plant = build_scalar_plant(a, 1.0, 1.0, 0.0)
    exo = rotation_exosystem([alpha], [1, 0], [0, 0], [0, 1])
    sol = solve_regulator(plant, exo)
    np.testing.assert_allclose(sol.Pi, [[1.0, 0.0]], atol=1e-14)
    # Gamma = Q (S - a I) / (c b)
    expected = exo.Q @ (exo.S - a * np.eye(2))
    np.testing.assert_allclose(sol.Gamma, expected, atol=1e-14)
    assert sol.passed


def test_static_exosystem_matches_setpoint():
    plant = build_heat_plant(30, **HEAT_WINDOWS)
    exo = Exosystem(np.zeros((1, 1)), [2.0], [0.5], [1.0])
    sol = solve_regulator(plant, exo)
    sp = setpoint_init(plant, 2.0, 0.5)
    np.testing.assert_allclose(sol.Pi[:, 0], sp.z, atol=1e-10 * np.abs(sp.z).max())
    assert sol.Gamma[0] == pytest.approx(sp.u, rel=1e-10)


def test_heat_two_tone_residuals():
    plant = build_heat_plant(4, actuator=(0.0, 0.3), sensor=(0.5, 1.0), disturbance=(0.2, 0.7))
    exo = rotation_exosystem([0.5, 1.0], [1, 0, 0.3, 0], [0, 0, 0, 1], [0, 1, 1, 0])
    sol = solve_regulator(plant, exo)
    assert sol.residual_state < 1e-10 and sol.residual_output < 1e-10
    lines = sol.to_csv().splitlines()
    assert lines[0] == "row,w_1,w_2,w_3,w_4"
    assert lines[5].startswith("Gamma,")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), n=st.sampled_from([1, 3, 8]),
       freqs=st.lists(st.floats(0.1, 5.0), min_size=1, max_size=2, unique=True))
def test_random_plants_residuals(seed, n, freqs):
    rng = np.random.default_rng(seed)
    plant = random_stable_plant(rng, n)
    N = 2 * len(freqs)
    exo = rotation_exosystem(freqs, *rng.standard_normal((3, N)))
    try:
        sol = solve_regulator(plant, exo)
    except RegulatorError:
        return  # a transmission zero hit a mode by chance
    assert sol.passed


def test_steady_state_start_is_exact(heat_plant):
    exo = rotation_exosystem([3.0, 4.5], [1, 0, 0, 0], [0, 0, 0.5, 0], [0, 1, 0, 1])
    sol = solve_regulator(heat_plant, exo)
    z0 = sol.Pi @ exo.w0
    _, err = oracle_closed_loop(heat_plant, exo, sol, z0, IntegratorConfig(1e-2, 10.0))
    assert np.abs(err).max() < 1e-8


def test_zero_start_decays_like_semigroup(heat_plant):
    exo = rotation_exosystem([3.0], [1, 0], [0, 0.5], [0, 1])
    sol = solve_regulator(heat_plant, exo)
    traj, err = oracle_closed_loop(heat_plant, exo, sol, None, IntegratorConfig(1e-2, 10.0))
    # e = -c_w exp(A t)(0 - Pi w0), and A is symmetric
    x0 = np.linalg.norm(sol.Pi @ exo.w0)
    bound = np.linalg.norm(heat_plant.c_w) * x0 * np.exp(spectral_abscissa(heat_plant.A) * traj.t)
    # floor: r - y cancels two O(1) numbers
    assert np.all(np.abs(err) <= bound * (1 + 1e-8) + 1e-11)
    assert np.abs(err[-200:]).max() < 1e-10


def test_integrator_method_agrees(heat_plant):
    exo = rotation_exosystem([0.5, 1.0], [1, 0, 0.3, 0], [0, 0, 0, 1], [0, 1, 1, 0])
    sol = solve_regulator(heat_plant, exo)
    cfg = IntegratorConfig(1e-3, 10.0)
    t1, _ = oracle_closed_loop(heat_plant, exo, sol, None, cfg)
    t2, _ = oracle_closed_loop(heat_plant, exo, sol, None, cfg, method="integrator")
    assert np.abs(t1.y - t2.y).max() < 1e-5
    with pytest.raises(ValueError, match="unknown method"):
        oracle_closed_loop(heat_plant, exo, sol, None, cfg, method="euler")


def test_zero_exosystem_state_gives_zero(heat_plant):
    exo = rotation_exosystem([1.0], [1, 0], [0, 1], [0, 0])
    sol = solve_regulator(heat_plant, exo)
    traj, err = oracle_closed_loop(heat_plant, exo, sol, None, IntegratorConfig(1e-2, 2.0))
    assert not traj.z.any() and not err.any()


def test_nonlinear_plant_rejected():
    plant = build_heat_plant(10, nonlinearity="tanh", epsilon=0.1)
    exo = rotation_exosystem([1.0], [1, 0], [0, 0], [0, 1])
    with pytest.raises(RegulatorError, match="oracle requires a linear plant"):
        solve_regulator(plant, exo)


def test_transmission_zero_at_exosystem_frequency():
    # (s^2 + 1)/((s + 1)(s + 2)(s + 3)) cannot track sin t
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-6.0, -11.0, -6.0]])
    plant = SemilinearPlant(A, np.array([0.0, 0.0, 1.0]), np.zeros(3), np.array([1.0, 0.0, 1.0]),
                            DiscreteFunctionSpace.unit(3))
    exo = rotation_exosystem([1.0], [1, 0], [0, 0], [0, 1])
    with pytest.raises(RegulatorError, match="rank-deficient"):
        solve_regulator(plant, exo)
