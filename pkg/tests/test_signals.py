import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from betareg.model import Exosystem, rotation_exosystem
from betareg.signals import (InsufficientSmoothness, Signal, constant, from_exosystem, harmonic,
                             norm_k, shifted, signal_sum, zero)


def _fd_check(sig, order, t, step=1e-4, rtol=1e-5):
    for k in range(1, order + 1):
        fd = (sig.derivative(t + step, k - 1) - sig.derivative(t - step, k - 1)) / (2 * step)
        scale = max(1.0, np.abs(sig.derivative(t, k)).max())
        assert np.abs(fd - sig.derivative(t, k)).max() <= rtol * scale


def test_harmonic_at_zero():
    s = harmonic(0, 1, 2)
    assert s(0.0) == 0.0
    assert s.derivative(0.0, 1) == pytest.approx(2.0)


def test_zero_amplitude_is_constant():
    s = harmonic(1, 0, 5)
    t = np.linspace(0, 3, 7)
    np.testing.assert_array_equal(s(t), 1.0)
    for k in (1, 2, 3):
        np.testing.assert_array_equal(s.derivative(t, k), 0.0)
        assert s.sup_norm(k) == 0.0


@pytest.mark.parametrize("alpha", [0.3, 1.0, 4.5])
def test_harmonic_sup_norms_by_sampling(alpha):
    s = harmonic(0, 1, alpha)
    t = np.linspace(0, 2 * np.pi / alpha, 200001)
    for k in range(4):
        sampled = np.abs(s.derivative(t, k)).max()
        assert abs(sampled - alpha ** k) <= 1e-6 * max(1.0, alpha ** k)
        assert s.sup_norm(k) == pytest.approx(alpha ** k)
    assert norm_k(s, 3) == pytest.approx(max(1, alpha ** 3))


def test_harmonic_derivatives_finite_difference():
    _fd_check(harmonic(0.3, 1.2, 2.5, 0.4), 5, np.linspace(0, 10, 101))


def test_declared_order_enforced():
    s = harmonic(0, 1, 1, order=1)
    s.derivative(0.0, 1)
    with pytest.raises(InsufficientSmoothness):
        s.derivative(0.0, 2)
    with pytest.raises(InsufficientSmoothness):
        s.sup_norm(2)


def test_rotation_exosystem_matches_harmonic():
    a = 1.3
    r, d = from_exosystem(rotation_exosystem([a], [1, 0], [0, 0], [0, 1]))
    t = np.linspace(0, 50, 5001)
    h = harmonic(0, 1, a)
    for k in range(3):
        np.testing.assert_allclose(r.derivative(t, k), h.derivative(t, k), atol=1e-12)
    assert r.harmonic[1] == pytest.approx(1.0) and r.harmonic[2] == pytest.approx(a)
    assert d.is_zero


def test_static_exosystem_constant():
    r, d = from_exosystem(Exosystem(np.zeros((1, 1)), [2.0], [0.5], [1.0]))
    t = np.linspace(0, 5, 6)
    np.testing.assert_array_equal(r(t), 2.0)
    np.testing.assert_array_equal(d(t), 0.5)
    np.testing.assert_array_equal(r.derivative(t, 1), 0.0)


def test_two_tone_exosystem_derivatives():
    exo = rotation_exosystem([0.5, 1.0], [1, 0, 0.3, 0], [0, 0, 0, 1], [0, 1, 1, 0])
    r, d = from_exosystem(exo)
    t = np.linspace(0, 20, 201)
    _fd_check(r, 3, t)
    _fd_check(d, 3, t)
    assert r.harmonic is None and r.freq == pytest.approx(1.0)


def test_exosystem_signals_bounded():
    rng = np.random.default_rng(3)
    exo = rotation_exosystem([0.7, 2.0], *rng.standard_normal((3, 4)))
    lam, V, Vi = exo.modes()
    r, _ = from_exosystem(exo)
    t = np.linspace(0, 100, 20001)
    bound = np.linalg.norm(exo.Q) * np.linalg.norm(exo.w0) * np.linalg.cond(V)
    assert np.abs(r(t)).max() <= bound
    assert np.abs(r(t)).max() <= r.sup_norm(0) * (1 + 1e-12)


def test_sum_and_shift():
    t = np.linspace(0, 10, 101)
    s = signal_sum(harmonic(0, 1, 1), harmonic(1, 0, 0))
    np.testing.assert_allclose(s(t), harmonic(1, 1, 1)(t), atol=1e-15)
    assert s.harmonic == (1.0, 1.0, 1.0, 0.0)
    h = harmonic(0.2, 0.7, 3.0, 0.1)
    np.testing.assert_array_equal(shifted(h, 0.0)(t), h(t))
    sh = shifted(h, 0.4)
    np.testing.assert_allclose(sh(t), h(t - 0.4), atol=1e-15)
    np.testing.assert_allclose(sh(t), harmonic(*sh.harmonic)(t), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(a=st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 5), st.floats(0, 6)),
       b=st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 5), st.floats(0, 6)))
def test_sum_sup_subadditive(a, b):
    s = harmonic(*a) + harmonic(*b)
    t = np.linspace(0, 60, 30001)
    for k in range(3):
        assert np.abs(s.derivative(t, k)).max() <= s.sup_norm(k) * (1 + 1e-12) + 1e-12


def test_order_of_sum_is_minimum():
    s = harmonic(0, 1, 1, order=2) + harmonic(0, 1, 2)
    assert s.order == 2
    assert (zero() + constant(3.0)).sup_norm(0) == 3.0


def test_custom_signal_protocol():
    s = Signal(lambda t, k: np.exp(-t) * (-1) ** k, lambda k: 1.0, order=3, label="decay")
    assert s(0.0) == 1.0
    assert s.derivative(0.0, 3) == -1.0
    with pytest.raises(ValueError):
        s.derivative(0.0, -1)
