import numpy as np
import pytest

from betareg.analysis import (NOISE_FLOOR, BoundVerdict, UnstableGeneratorError,
                              compute_constants, compute_kernels, limsup_estimate, linear_bound,
                              nonlinear_bound, suite_passed, verdict_suite, verdict_table,
                              verdicts_to_csv)
from betareg.iterctl import run_beta_iteration
from betareg.model import DiscreteFunctionSpace, SemilinearPlant, build_heat_plant, build_scalar_plant
from betareg.regop import build_regularized, spectral_abscissa
from betareg.signals import InsufficientSmoothness, SignalPair, constant, harmonic
from betareg.simulate import IntegratorConfig

from conftest import HEAT_WINDOWS


def test_scalar_kernels_closed_form():
    beta = 0.6
    ops = build_regularized(build_scalar_plant(-1.0, 1.0, 1.0, 1.0), beta)
    kern = compute_kernels(ops)
    t = np.linspace(0, 5, 51)
    np.testing.assert_allclose(kern.K(t), np.exp(-t / beta), rtol=1e-12)
    # collocated: I0 vanishes, so do K_d and H
    assert np.abs(kern.K_d(t)).max() < 1e-15
    assert np.abs(kern.H(t)).max() < 1e-15


@pytest.mark.parametrize("beta", [0.2, 0.5, 0.9])
def test_scalar_D_equals_beta(beta):
    c = compute_constants(build_regularized(build_scalar_plant(-1.0, 1.0, 1.0, 1.0), beta))
    assert c.D == pytest.approx(beta, rel=1e-8)
    assert abs(c.D_d) < 1e-10
    assert c.omega_beta == pytest.approx(1 / beta)


def test_scalar_D_increasing_in_beta():
    plant = build_scalar_plant(-2.0)
    Ds = [compute_constants(build_regularized(plant, b)).D for b in (0.3, 0.5, 0.7, 0.9)]
    assert np.all(np.diff(Ds) > 0)


def test_heat_constants(heat_ops):
    c = compute_constants(heat_ops)
    assert c.D == pytest.approx(0.12699, abs=1e-4)
    assert c.D_d == pytest.approx(0.00473, abs=1e-4)
    assert c.omega_beta == pytest.approx(-spectral_abscissa(heat_ops.A_beta), rel=1e-12)
    assert c.omega_beta > np.pi ** 2
    # linear plant: the nonlinear corrections are exactly zero
    assert c.calD == 0.0 and c.calD_d == 0.0
    assert max(c.tails.values()) < 1e-8 * c.D


def test_quadrature_converged(heat_ops):
    a = compute_constants(heat_ops, panel_steps=64)
    b = compute_constants(heat_ops, panel_steps=128)
    for k in ("D", "D_d", "D_H", "D_B", "D_Abeta", "D_Bd"):
        assert abs(getattr(a, k) - getattr(b, k)) <= 1e-6 * max(1.0, getattr(b, k))


def test_kernel_decays_at_abscissa_rate(heat_ops):
    kern = compute_kernels(heat_ops)
    t = np.array([10.0, 12.0])
    k = np.abs(kern.K(t))
    assert k[1] / k[0] == pytest.approx(np.exp(kern.ev.abscissa * 2.0), rel=1e-3)


def test_unstable_generator_rejected():
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    plant = SemilinearPlant(A, np.array([0.0, 1.0]), np.zeros(2), np.array([1.0, -1.0]),
                            DiscreteFunctionSpace.unit(2))
    with pytest.warns(RuntimeWarning):
        ops = build_regularized(plant, 0.05)
    with pytest.raises(UnstableGeneratorError):
        compute_constants(ops)


def test_linear_bound_examples():
    ops = build_regularized(build_scalar_plant(-1.0, 1.0, 1.0, 0.0), 0.5)
    c = compute_constants(ops)
    sig = SignalPair.tracking(harmonic(0, 2.0, 3.0))
    lb = linear_bound(2, c, sig)
    assert lb["C_n"] == pytest.approx(18.0)
    assert lb["general"] == pytest.approx(0.25 * 18.0, rel=1e-7)
    assert lb["harmonic"] == pytest.approx(0.25 * 2.0 * 9.0, rel=1e-7)
    assert lb["alpha_D"] == pytest.approx(1.5, rel=1e-7)
    # constant reference: every derivative vanishes, only C_0 survives
    lc = linear_bound(3, c, SignalPair.tracking(constant(2.0)))
    assert lc["C_n"] == 2.0 and lc["general"] == pytest.approx(0.125 * 2.0, rel=1e-7)


def test_linear_bound_smoothness():
    c = compute_constants(build_regularized(build_scalar_plant(-1.0), 0.5))
    sig = SignalPair.tracking(harmonic(0, 1, 1, order=1))
    linear_bound(1, c, sig)
    with pytest.raises(InsufficientSmoothness):
        linear_bound(2, c, sig)


def test_nonlinear_reduces_to_linear_at_zero_eps(heat_ops):
    c = compute_constants(heat_ops)
    sig = SignalPair(harmonic(0, 1, 3.0), harmonic(0, 0.5, 4.5))
    # with calD = 0 the e0 bound is the n = 1 linear bound
    assert nonlinear_bound("e0", c, sig) == pytest.approx(linear_bound(1, c, sig)["general"], rel=1e-12)
    assert nonlinear_bound("e0", c, sig) == pytest.approx(3.0 * c.D + 2.25 * c.D_d, rel=1e-12)


def test_nonlinear_constants_grow_with_eps():
    plant = build_heat_plant(50, nonlinearity="tanh", epsilon=0.05, **HEAT_WINDOWS)
    ops = build_regularized(plant, 0.9)
    c = compute_constants(ops)
    assert c.nonlinear_defined and c.calD > 0
    big = compute_constants(ops, epsilon=2.0 / c.D_Abeta)
    assert not big.nonlinear_defined
    with pytest.raises(ValueError, match="undefined"):
        nonlinear_bound("e0", big, SignalPair.tracking(harmonic(0, 1, 1)))
    assert "undefined" in big.to_csv()


def test_limsup_examples():
    t = np.linspace(0, 100, 10001)
    assert limsup_estimate(np.full_like(t, -0.3), t, 1.0) == pytest.approx(0.3)
    assert limsup_estimate(np.exp(-0.2 * t), t, 1.0) == pytest.approx(np.exp(-16), rel=1e-12)
    assert limsup_estimate(np.sin(t), t, 1.0) == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValueError, match="horizon too short"):
        limsup_estimate(np.sin(t), t, 0.05)


def test_verdict_check_slack_and_floor():
    assert BoundVerdict.check(0, "x", 1.0, 1.04).passed
    assert not BoundVerdict.check(0, "x", 1.0, 1.06).passed
    assert BoundVerdict.check(0, "x", 0.0, 1e-12, floor=1e-9).passed
    rows = [BoundVerdict.check(0, "x", 1.0, 2.0, informative=False), BoundVerdict.check(1, "y", 1.0, 0.5)]
    assert suite_passed(rows)
    assert not suite_passed(rows + [BoundVerdict.check(2, "z", 1.0, 3.0)])


def test_verdict_suite_linear_heat(heat_plant, heat_ops):
    sig = SignalPair(harmonic(0, 1, 3.0), harmonic(0, 0.5, 4.5))
    stack = run_beta_iteration(heat_plant, heat_ops, sig, n=3)
    c = compute_constants(heat_ops)
    rows = verdict_suite(stack, c)
    assert suite_passed(rows), verdict_table(rows)
    formulas = {v.formula for v in rows}
    assert {"D^n C_n", "harmonic", "tails decreasing", "closed-loop"} <= formulas
    csv = verdicts_to_csv(rows).splitlines()
    assert csv[0] == "n,formula,bound,measured,verdict,note"
    assert len(csv) == len(rows) + 1
    with pytest.raises(ValueError, match="different beta"):
        verdict_suite(stack, compute_constants(build_regularized(heat_plant, 0.8)))


def test_noise_floor_for_constant_reference():
    plant = build_scalar_plant(-1.0)
    ops = build_regularized(plant, 0.5)
    stack = run_beta_iteration(plant, ops, SignalPair.tracking(constant(1.0)), n=2)
    rows = verdict_suite(stack, compute_constants(ops))
    assert NOISE_FLOOR > 0
    assert suite_passed(rows), verdict_table(rows)
