import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from betareg.model import (OPERATING_RANGE, DiscreteFunctionSpace, Exosystem, build_heat_plant,
                           build_scalar_plant, exo_trajectory, make_nonlinearity,
                           rotation_exosystem, spectral_abscissa)


def test_heat_plant_n3_matrix_and_spectrum():
    plant = build_heat_plant(3, 1.0, actuator=(0.2, 0.3), sensor=(0.2, 0.3), disturbance=(0.7, 0.8))
    h = 0.25
    expected = np.array([[-2, 1, 0], [1, -2, 1], [0, 1, -2]]) / h ** 2
    np.testing.assert_allclose(plant.A, expected)
    # eigenvalues of tridiag(1,-2,1)/h^2 are -(4/h^2) sin^2(k pi / 8)
    k = np.arange(1, 4)
    lam = -(4 / h ** 2) * np.sin(k * np.pi / 8) ** 2
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(plant.A)), np.sort(lam), rtol=1e-12)
    assert spectral_abscissa(plant.A) < 0


def test_zero_nonlinearity_is_linear():
    plant = build_heat_plant(10)
    assert plant.is_linear
    assert plant.epsilon == 0.0
    np.testing.assert_array_equal(plant.f(np.linspace(-3, 3, 10)), 0.0)


@pytest.mark.parametrize("name", ["tanh", "cubic"])
def test_lipschitz_bound_by_sampling(name):
    f = make_nonlinearity(name, 0.1)
    x = np.linspace(*OPERATING_RANGE, 4001)
    q = np.abs(np.diff(f(x)) / np.diff(x))
    assert q.max() <= 0.1 * (1 + 1e-9)
    # the bound is attained, not just respected
    assert q.max() > 0.099
    assert np.abs(f.derivative(x)).max() <= 0.1 + 1e-15


def test_nonlinearity_derivative_matches_finite_difference():
    f = make_nonlinearity("cubic", 0.3)
    x = np.linspace(-5, 5, 101)
    fd = (f(x + 1e-6) - f(x - 1e-6)) / 2e-6
    np.testing.assert_allclose(f.derivative(x), fd, atol=1e-8)


def test_unknown_nonlinearity():
    with pytest.raises(ValueError, match="unknown nonlinearity"):
        make_nonlinearity("relu", 0.1)


def test_scalar_plant_examples():
    p = build_scalar_plant(-1, 1, 1, 1)
    assert spectral_abscissa(p.A) == -1.0
    q = build_scalar_plant(-2, 1, 1, 0)
    assert np.all(q.b_d == 0)
    with pytest.raises(ValueError, match="unstable generator"):
        build_scalar_plant(0.0)


def test_spectral_abscissa_diag():
    assert spectral_abscissa(np.diag([-1.0, -2.0])) == -1.0


@pytest.mark.parametrize("weights", ["uniform", "trapezoid"])
@pytest.mark.parametrize("window", [(0.2, 0.4), (0.0, 0.1), (0.55, 1.0)])
def test_window_normalization(weights, window):
    plant = build_heat_plant(40, sensor=window, weights=weights)
    assert abs(plant.space.inner(plant.c, np.ones(40)) - 1.0) < 1e-12
    assert abs(plant.output(np.ones(40)) - 1.0) < 1e-12


def test_window_errors():
    with pytest.raises(ValueError, match="inside"):
        build_heat_plant(20, actuator=(0.5, 1.2))
    with pytest.raises(ValueError, match="no grid node"):
        build_heat_plant(5, sensor=(0.01, 0.02))


def test_weighted_space_norms():
    sp = DiscreteFunctionSpace.on_grid(4, 0.5, "trapezoid")
    np.testing.assert_allclose(sp.weights, [0.25, 0.5, 0.5, 0.25])
    v = np.array([1.0, 2.0, 0.0, -1.0])
    assert sp.norm(v) == pytest.approx(np.sqrt(0.25 + 2.0 + 0.25))
    # Riesz: the dual norm of u -> <v, u> is ||v||
    assert sp.functional_norm(sp.weights * v) == pytest.approx(sp.norm(v))
    assert sp.operator_norm(np.eye(4)) == pytest.approx(1.0)


def test_rotation_exosystem_is_sine():
    a = 1.7
    exo = rotation_exosystem([a], [1, 0], [0, 0], [0, 1])
    t = np.linspace(0, 30, 3001)
    w, r, d = exo_trajectory(exo, t)
    np.testing.assert_allclose(r, np.sin(a * t), atol=1e-13)
    np.testing.assert_array_equal(d, 0.0)


def test_static_exosystem_constant():
    exo = Exosystem(np.zeros((1, 1)), [2.5], [0.0], [1.0])
    _, r, _ = exo_trajectory(exo, np.linspace(0, 10, 11))
    np.testing.assert_array_equal(r, 2.5)


@settings(max_examples=25, deadline=None)
@given(freqs=st.lists(st.floats(0.1, 20), min_size=1, max_size=3),
       seed=st.integers(0, 2 ** 31 - 1))
def test_rotation_norm_conserved(freqs, seed):
    rng = np.random.default_rng(seed)
    N = 2 * len(freqs)
    exo = rotation_exosystem(freqs, rng.standard_normal(N), rng.standard_normal(N),
                             rng.standard_normal(N))
    w, _, _ = exo_trajectory(exo, np.linspace(0, 50, 501))
    nw = np.linalg.norm(w, axis=1)
    assert np.ptp(nw) <= 1e-10 * nw[0]


def test_exosystem_rejects_unstable_and_defective():
    with pytest.raises(ValueError, match="imaginary axis"):
        Exosystem(np.array([[0.1]]), [1], [0], [1])
    with pytest.raises(ValueError, match="diagonalizable"):
        Exosystem(np.array([[0.0, 1.0], [0.0, 0.0]]), [1, 0], [0, 0], [0, 1])
