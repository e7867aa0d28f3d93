"""Discretized semilinear parabolic plants and finite-dimensional exosystems.

A plant is the method-of-lines system

    z' = A z + f(z) + b u + b_d d,      y = <c, z>,

on a grid of ``n`` interior nodes of the unit interval, where ``<., .>`` is
a weighted discrete inner product.  The sensing functional is stored both as
the profile ``c`` and as the weighted row ``c_w = w * c`` so that ``y`` is a
plain dot product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import eigvals

__all__ = [
    "Nonlinearity",
    "make_nonlinearity",
    "DiscreteFunctionSpace",
    "SemilinearPlant",
    "Exosystem",
    "build_heat_plant",
    "build_scalar_plant",
    "rotation_exosystem",
    "exo_trajectory",
    "OPERATING_RANGE",
    "spectral_abscissa",
]

#: componentwise range on which Lipschitz bounds are checked
OPERATING_RANGE = (-10.0, 10.0)


@dataclass(frozen=True)
class Nonlinearity:
    """Pointwise (Nemytskii) nonlinearity with a global Lipschitz bound.

    ``value`` and ``derivative`` act elementwise on arrays.
    """

    name: str
    epsilon: float
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]

    def __call__(self, z):
        return self.value(z)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero" or self.epsilon == 0.0


def _zero(z):
    return np.zeros_like(np.asarray(z, dtype=float))


def make_nonlinearity(name: str = "zero", epsilon: float = 0.0) -> Nonlinearity:
    """Build a catalog nonlinearity.

    Parameters
    ----------
    name : {'zero', 'tanh', 'cubic'}
        ``tanh`` is ``eps * tanh(x)``.  ``cubic`` is the saturating cubic
        ``eps * (8/9) * x**3 / (1 + x**2)``, whose slope peaks at ``eps``
        (at ``x**2 = 3``).
    epsilon : float
        Lipschitz bound, must be nonnegative.
    """
    name = name.lower().replace("_", "-")
    if epsilon < 0:
        raise ValueError("Lipschitz bound must be nonnegative")
    eps = float(epsilon)
    if name == "zero":
        return Nonlinearity("zero", 0.0, _zero, _zero)
    if name in ("tanh", "scaled-tanh"):
        return Nonlinearity(
            "tanh", eps,
            lambda z: eps * np.tanh(z),
            lambda z: eps / np.cosh(z) ** 2,
        )
    if name in ("cubic", "cubic-saturating"):
        k = eps * 8.0 / 9.0

        def value(z):
            z = np.asarray(z, dtype=float)
            return k * z ** 3 / (1.0 + z ** 2)

        def derivative(z):
            z2 = np.asarray(z, dtype=float) ** 2
            return k * (z2 ** 2 + 3.0 * z2) / (1.0 + z2) ** 2

        return Nonlinearity("cubic", eps, value, derivative)
    raise ValueError(f"unknown nonlinearity {name!r}")


@dataclass(frozen=True)
class DiscreteFunctionSpace:
    """Weighted inner product ``<u, v> = sum(w * u * v)`` on grid values."""

    weights: np.ndarray
    h: float = 1.0
    rule: str = "unit"

    @classmethod
    def on_grid(cls, n: int, h: float, rule: str = "uniform") -> "DiscreteFunctionSpace":
        if rule == "uniform":
            w = np.full(n, h)
        elif rule == "trapezoid":
            w = np.full(n, h)
            if n > 1:
                w[0] = w[-1] = h / 2
        else:
            raise ValueError(f"unknown weight rule {rule!r}")
        return cls(w, h, rule)

    @classmethod
    def unit(cls, n: int = 1) -> "DiscreteFunctionSpace":
        return cls(np.ones(n), 1.0, "unit")

    def inner(self, u, v) -> float:
        return float(np.sum(self.weights * np.asarray(u) * np.asarray(v)))

    def norm(self, u) -> np.ndarray:
        """Norm of a vector, or of each row of a stack of vectors."""
        u = np.asarray(u)
        return np.sqrt(np.sum(self.weights * np.abs(u) ** 2, axis=-1))

    def functional_norm(self, row) -> np.ndarray:
        """Dual norm of the functional ``z -> row @ z``."""
        row = np.asarray(row)
        return np.sqrt(np.sum(np.abs(row) ** 2 / self.weights, axis=-1))

    def operator_norm(self, M) -> float:
        """Induced norm of ``M`` on the weighted space."""
        s = np.sqrt(self.weights)
        return float(np.linalg.norm(s[:, None] * np.asarray(M) / s[None, :], 2))


@dataclass(frozen=True)
class SemilinearPlant:
    A: np.ndarray
    b: np.ndarray
    b_d: np.ndarray
    c: np.ndarray
    space: DiscreteFunctionSpace
    f: Nonlinearity = field(default_factory=make_nonlinearity)
    nodes: Optional[np.ndarray] = None
    name: str = "plant"

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        for v in (self.b, self.b_d, self.c):
            if v.shape != (n,) or not np.all(np.isfinite(v)):
                raise ValueError("b, b_d, c must be finite n-vectors")
        if self.f.value(np.zeros(1))[0] != 0.0:
            raise ValueError("nonlinearity must vanish at the origin")
        if spectral_abscissa(self.A) >= 0:
            raise ValueError("unstable generator: spectral abscissa of A must be negative")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def h(self) -> float:
        return self.space.h

    @property
    def c_w(self) -> np.ndarray:
        """Sensing row including the inner-product weights."""
        return self.space.weights * self.c

    @property
    def epsilon(self) -> float:
        return self.f.epsilon

    @property
    def is_linear(self) -> bool:
        return self.f.is_zero

    def output(self, z) -> np.ndarray:
        return np.asarray(z) @ self.c_w


def spectral_abscissa(M) -> float:
    """Largest real part over the eigenvalues of a square matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    try:
        lam = eigvals(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise np.linalg.LinAlgError(f"eigensolve failed: {exc}") from exc
    return float(np.max(lam.real))


def _window_indicator(x, window, weights, name):
    lo, hi = map(float, window)
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError(f"{name} window {window!r} must be a positive-length interval inside [0, 1]")
    inside = (x >= lo - 1e-12) & (x <= hi + 1e-12)
    if not inside.any():
        raise ValueError(f"{name} window {window!r} contains no grid node")
    # normalized by the discrete measure so that <v, 1_window> = 1 exactly
    return np.where(inside, 1.0 / weights[inside].sum(), 0.0)


def build_heat_plant(n: int, nu: float = 1.0, actuator=(0.2, 0.4), sensor=(0.2, 0.4),
                     disturbance=(0.6, 0.8), nonlinearity: str = "zero",
                     epsilon: float = 0.0, weights: str = "uniform") -> SemilinearPlant:
    """Finite-difference heat equation on [0, 1] with Dirichlet ends.

    Uses ``n`` interior nodes ``x_i = i h``, ``h = 1/(n+1)``, and
    ``A = nu/h**2 * tridiag(1, -2, 1)``.  Actuator, sensor and disturbance
    profiles are window indicators scaled by the reciprocal discrete measure
    of the window.
    """
    if n < 3:
        raise ValueError("heat plant needs n >= 3")
    if nu <= 0:
        raise ValueError("diffusivity must be positive")
    h = 1.0 / (n + 1)
    x = h * np.arange(1, n + 1)
    A = (nu / h ** 2) * (np.diag(np.full(n - 1, 1.0), -1) + np.diag(np.full(n, -2.0))
                         + np.diag(np.full(n - 1, 1.0), 1))
    space = DiscreteFunctionSpace.on_grid(n, h, weights)
    return SemilinearPlant(
        A=A,
        b=_window_indicator(x, actuator, space.weights, "actuator"),
        b_d=_window_indicator(x, disturbance, space.weights, "disturbance"),
        c=_window_indicator(x, sensor, space.weights, "sensor"),
        space=space,
        f=make_nonlinearity(nonlinearity, epsilon),
        nodes=x,
        name="heat",
    )


def build_scalar_plant(a: float, b: float = 1.0, c: float = 1.0, b_d: float = 0.0,
                       nonlinearity: str = "zero", epsilon: float = 0.0) -> SemilinearPlant:
    """One-state plant ``z' = a z + f(z) + b u + b_d d``, ``y = c z``."""
    if not a < 0:
        raise ValueError("unstable generator: scalar plant needs a < 0")
    return SemilinearPlant(
        A=np.array([[float(a)]]),
        b=np.array([float(b)]),
        b_d=np.array([float(b_d)]),
        c=np.array([float(c)]),
        space=DiscreteFunctionSpace.unit(1),
        f=make_nonlinearity(nonlinearity, epsilon),
        name="scalar",
    )


@dataclass(frozen=True)
class Exosystem:
    """Neutrally stable signal generator ``w' = S w``, ``r = Q w``, ``d = P w``."""

    S: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    w0: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        N = S.shape[0]
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float).reshape(N))
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float).reshape(N))
        object.__setattr__(self, "w0", np.asarray(self.w0, dtype=float).reshape(N))
        if S.shape != (N, N):
            raise ValueError("S must be square")
        lam, V = np.linalg.eig(S)
        scale = max(1.0, np.abs(lam).max(initial=0.0))
        if np.any(np.abs(lam.real) > 1e-9 * scale):
            raise ValueError("exosystem must have all eigenvalues on the imaginary axis")
        if np.linalg.cond(V) > 1e8:
            raise ValueError("exosystem matrix S must be diagonalizable")
        object.__setattr__(self, "_eig", (lam, V, np.linalg.inv(V)))

    @property
    def N(self) -> int:
        return self.S.shape[0]

    def modes(self):
        """Eigenvalues, eigenvectors and inverse eigenvector matrix of S."""
        return self._eig

    def state(self, t) -> np.ndarray:
        """``w(t) = exp(S t) w0`` for an array of times, shape (len(t), N)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lam, V, Vi = self._eig
        coef = Vi @ self.w0
        W = (np.exp(np.outer(t, lam)) * coef) @ V.T
        return W.real


def rotation_exosystem(freqs: Sequence[float], q: Sequence[float], p: Sequence[float],
                       w0: Sequence[float]) -> Exosystem:
    """Block-diagonal exosystem with one rotation block ``[[0, a], [-a, 0]]`` per frequency.

    A zero frequency contributes a 1x1 zero block (a constant mode).
    """
    blocks = [np.zeros((1, 1)) if a == 0 else np.array([[0.0, a], [-a, 0.0]]) for a in freqs]
    N = sum(blk.shape[0] for blk in blocks)
    S = np.zeros((N, N))
    i = 0
    for blk in blocks:
        k = blk.shape[0]
        S[i:i + k, i:i + k] = blk
        i += k
    return Exosystem(S, np.asarray(q, float), np.asarray(p, float), np.asarray(w0, float))


def exo_trajectory(exo: Exosystem, t):
    """Exosystem state, reference and disturbance sampled at times ``t``.

    The state is evaluated from the modal form of ``exp(S t)``, never by
    time stepping.  Returns ``(w, r, d)`` with ``w`` of shape (len(t), N).
    """
    w = exo.state(t)
    return w, w @ exo.Q, w @ exo.P

