"""Reference and disturbance signals carrying analytic derivatives.

Every :class:`Signal` evaluates ``s^{(k)}(t)`` exactly for ``k`` up to its
declared ``order`` (``None`` means infinitely smooth) and reports an upper
bound on ``sup_{t>=0} |s^{(k)}(t)|``, exact for single harmonics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import Exosystem

__all__ = [
    "Signal",
    "SignalPair",
    "InsufficientSmoothness",
    "harmonic",
    "constant",
    "zero",
    "from_exosystem",
    "shifted",
    "signal_sum",
    "norm_k",
]


class InsufficientSmoothness(ValueError):
    pass


def _min_order(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


@dataclass(frozen=True)
class Signal:
    """Scalar time signal with exact derivatives.

    Parameters
    ----------
    fn : callable ``(t, k) -> array``
        ``k``-th derivative evaluated at an array of times.
    sup : callable ``k -> float``
        Upper bound on the sup-norm of the ``k``-th derivative over ``[0, inf)``.
    order : int or None
        Highest available derivative; ``None`` for ``C^inf``.
    harmonic : tuple or None
        ``(offset, amplitude, omega, phase)`` when the signal is
        ``offset + amplitude * sin(omega t + phase)``.
    freq : float or None
        Largest angular frequency present, when known.
    """

    fn: Callable[[np.ndarray, int], np.ndarray]
    sup: Callable[[int], float]
    order: Optional[int] = None
    harmonic: Optional[tuple] = None
    label: str = "signal"
    sup_exact: bool = False
    freq: Optional[float] = None

    def _check(self, k):
        if k < 0:
            raise ValueError("derivative order must be nonnegative")
        if self.order is not None and k > self.order:
            raise InsufficientSmoothness(
                f"{self.label}: derivative of order {k} requested, only {self.order} declared")

    def __call__(self, t):
        return self.derivative(t, 0)

    def derivative(self, t, k: int = 1):
        self._check(k)
        t_arr = np.asarray(t, dtype=float)
        out = np.asarray(self.fn(np.atleast_1d(t_arr), k), dtype=float)
        return out.reshape(t_arr.shape) if t_arr.ndim == 0 else out

    def sup_norm(self, k: int = 0) -> float:
        self._check(k)
        return float(self.sup(k))

    def __add__(self, other):
        return signal_sum(self, other)

    @property
    def is_zero(self) -> bool:
        return self.sup(0) == 0.0


def norm_k(sig: Signal, k: int) -> float:
    """``max_{0<=j<=k} sup |s^{(j)}|``, the ``C_b^k`` norm."""
    return max(sig.sup_norm(j) for j in range(k + 1))


def harmonic(m: float, amp: float, alpha: float, phase: float = 0.0,
             order: Optional[int] = None) -> Signal:
    """``m + amp * sin(alpha t + phase)``."""
    if alpha < 0:
        raise ValueError("angular frequency must be nonnegative")
    m, amp, alpha, phase = float(m), float(amp), float(alpha), float(phase)

    def fn(t, k):
        if k == 0:
            return m + amp * np.sin(alpha * t + phase)
        return amp * alpha ** k * np.sin(alpha * t + phase + k * np.pi / 2)

    def sup(k):
        if k == 0:
            # exact sup of m + amp sin(.) when alpha > 0; constant otherwise
            return abs(m) + abs(amp) if alpha > 0 else abs(m + amp * np.sin(phase))
        return abs(amp) * alpha ** k

    if alpha == 0.0 or amp == 0.0:
        # constant value
        c0 = m + amp * np.sin(phase)
        return constant(c0, order=order)
    return Signal(fn, sup, order, (m, amp, alpha, phase),
                  f"harmonic({m:g},{amp:g},{alpha:g})", sup_exact=True, freq=alpha)


def constant(value: float, order: Optional[int] = None) -> Signal:
    value = float(value)

    def fn(t, k):
        return np.full_like(t, value if k == 0 else 0.0, dtype=float)

    return Signal(fn, lambda k: abs(value) if k == 0 else 0.0, order, (value, 0.0, 0.0, 0.0),
                  f"constant({value:g})", sup_exact=True, freq=0.0)


def zero() -> Signal:
    return constant(0.0)


def from_exosystem(exo: Exosystem):
    """Reference ``Q exp(St) w0`` and disturbance ``P exp(St) w0`` as signals.

    Derivatives are ``Q S^k exp(St) w0``, evaluated modally.  Sup bounds are
    the sum of modal magnitudes ``sum_i |q_i| |lambda_i|^k``, exact for a
    single tone.
    """
    lam, V, Vi = exo.modes()
    coef = Vi @ exo.w0

    def make(row, label):
        amps = (row @ V) * coef  # complex modal amplitudes
        keep = np.abs(amps) > 0

        def fn(t, k):
            vals = (np.exp(np.outer(t, lam)) * (amps * lam ** k)).sum(axis=1)
            return vals.real

        def sup(k):
            return float(np.sum(np.abs(amps[keep]) * np.abs(lam[keep]) ** k))

        harm = None
        freqs = np.unique(np.round(np.abs(lam[keep].imag), 12))
        if len(freqs) == 1:
            w = float(freqs[0])
            z0 = float(fn(np.zeros(1), 0)[0])
            if w == 0.0:
                harm = (z0, 0.0, 0.0, 0.0)
            else:
                zp = float(fn(np.zeros(1), 1)[0])
                harm = (0.0, float(np.hypot(z0, zp / w)), w, float(np.arctan2(z0, zp / w)))
            sup = harmonic(*harm).sup
        elif len(freqs) == 0:
            harm = (0.0, 0.0, 0.0, 0.0)
        top = float(freqs.max()) if len(freqs) else 0.0
        return Signal(fn, sup, None, harm, label, sup_exact=len(freqs) <= 1, freq=top)

    return make(exo.Q, "exo.r"), make(exo.P, "exo.d")


def shifted(sig: Signal, t0: float) -> Signal:
    """Delayed copy ``t -> sig(t - t0)``; sup bounds are inherited."""
    t0 = float(t0)
    harm = None
    if sig.harmonic is not None:
        m, a, w, ph = sig.harmonic
        harm = (m, a, w, ph - w * t0)
    return Signal(lambda t, k: sig.fn(t - t0, k), sig.sup, sig.order, harm,
                  f"shifted({sig.label},{t0:g})", sig.sup_exact, sig.freq)


def signal_sum(a: Signal, b: Signal) -> Signal:
    """Pointwise sum; sup bounds add (sub-additivity), orders take the minimum."""
    harm = None
    exact = False
    if a.harmonic is not None and b.harmonic is not None:
        ma, aa, wa, pa = a.harmonic
        mb, ab, wb, pb = b.harmonic
        if aa == 0.0:
            harm, exact = (ma + mb, ab, wb, pb), b.sup_exact
        elif ab == 0.0:
            harm, exact = (ma + mb, aa, wa, pa), a.sup_exact

    def sup(k):
        if harm is not None and exact:
            m, amp, w, _ = harm
            return abs(m) + abs(amp) if k == 0 else abs(amp) * w ** k
        return a.sup(k) + b.sup(k)

    freq = None if a.freq is None or b.freq is None else max(a.freq, b.freq)
    return Signal(lambda t, k: a.fn(t, k) + b.fn(t, k), sup, _min_order(a.order, b.order), harm,
                  f"({a.label}+{b.label})", exact, freq)


@dataclass(frozen=True)
class SignalPair:
    """Reference ``r`` and disturbance ``d``."""

    r: Signal
    d: Signal

    @classmethod
    def tracking(cls, r: Signal) -> "SignalPair":
        return cls(r, zero())
