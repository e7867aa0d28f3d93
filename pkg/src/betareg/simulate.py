"""Fixed-step integrators for ``z' = A z + forcing(t) + nl(t, z)``.

Schemes
-------
``imex-cnab2``
    Crank-Nicolson on ``A``; second-order Adams-Bashforth extrapolation of
    forcing and nonlinearity.  The first step is explicit Euler on the
    nonlinearity and averages the (known) forcing over the step.
``imex-euler``
    Backward Euler on ``A``; forward Euler on forcing and nonlinearity.
``dense-oracle``
    Exponential integrator on half steps: the linear part is propagated by
    the exact matrix exponential and the forcing is integrated exactly
    along its linear interpolant over each half step (second-order
    exponential Runge-Kutta for the nonlinear part).
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .model import SemilinearPlant, spectral_abscissa

__all__ = [
    "BlowUpError",
    "IntegratorConfig",
    "Trajectory",
    "GridFunction",
    "integrate_semilinear",
    "simulate_true_plant",
    "error_trace",
    "BLOWUP_THRESHOLD",
]

BLOWUP_THRESHOLD = 1e6
SCHEMES = ("imex-cnab2", "imex-euler", "dense-oracle")


class BlowUpError(RuntimeError):
    """State norm exceeded the blow-up threshold."""

    def __init__(self, time, norm):
        super().__init__(f"state blow-up at t={time:.6g} (|z|={norm:.3g})")
        self.time = float(time)
        self.norm = float(norm)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    T: float = 20.0
    scheme: str = "imex-cnab2"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= 10 * self.dt * (1 - 1e-12):
            raise ValueError("horizon must cover at least 10 steps")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def grid(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    def replace(self, **kw) -> "IntegratorConfig":
        d = dict(dt=self.dt, T=self.T, scheme=self.scheme)
        d.update(kw)
        return IntegratorConfig(**d)


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    y: Optional[np.ndarray] = None
    scheme: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.t) != len(self.z):
            raise ValueError("state sequence length must match the time grid")
        dt = np.diff(self.t)
        if len(dt) and (np.any(dt <= 0) or np.ptp(dt) > 1e-9 * dt[0]):
            raise ValueError("time grid must be strictly increasing and uniform")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def to_csv(self, include_states: bool = False) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        n = self.z.shape[1]
        header = ["t"] + ([f"z_{i + 1}" for i in range(n)] if include_states else []) + ["y"]
        wr.writerow(header)
        y = self.y if self.y is not None else np.full(len(self.t), np.nan)
        for k in range(len(self.t)):
            row = [self.t[k]] + (list(self.z[k]) if include_states else []) + [y[k]]
            if len(row) != len(header):  # pragma: no cover - defensive
                raise ValueError("column count mismatch")
            wr.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


class GridFunction:
    """Piecewise-linear interpolant of values stored on a uniform grid.

    Works for scalar series (shape ``(K+1,)``) and vector series
    (shape ``(K+1, n)``).  Times beyond the grid are clamped.
    """

    def __init__(self, t0: float, dt: float, values):
        self.t0 = float(t0)
        self.dt = float(dt)
        self.values = np.asarray(values, dtype=float)

    @classmethod
    def on(cls, grid, values) -> "GridFunction":
        return cls(grid[0], grid[1] - grid[0], values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = (t - self.t0) / self.dt
        last = len(self.values) - 1
        i = np.clip(np.floor(s + 1e-9).astype(int), 0, last)
        frac = np.clip(s - i, 0.0, 1.0)
        j = np.minimum(i + 1, last)
        v = self.values
        if v.ndim == 1:
            return (1 - frac) * v[i] + frac * v[j]
        frac = frac[..., None]
        return (1 - frac) * v[i] + frac * v[j]


def _guard(z, t):
    m = np.max(np.abs(z))
    if not m <= BLOWUP_THRESHOLD:
        raise BlowUpError(t, m)


def _phi_blocks(M, h):
    """``exp(hM)``, ``h phi1(hM)``, ``h phi2(hM)`` from one augmented exponential."""
    n = M.shape[0]
    aug = np.zeros((3 * n, 3 * n))
    aug[:n, :n] = h * M
    aug[:n, n:2 * n] = np.eye(n)
    aug[n:2 * n, 2 * n:] = np.eye(n)
    E = expm(aug)
    return E[:n, :n], h * E[:n, n:2 * n], h * E[:n, 2 * n:]


def integrate_semilinear(A_lin, forcing: Optional[Callable], nl: Optional[Callable], z0,
                         cfg: IntegratorConfig, output_row=None) -> Trajectory:
    """Integrate ``z' = A_lin z + forcing(t) + nl(t, z)`` on ``[0, cfg.T]``.

    Parameters
    ----------
    A_lin : (n, n) array
        Stiff linear part, treated implicitly (or exactly by the oracle).
    forcing : callable or None
        Vectorized: maps an array of times of shape ``(m,)`` to ``(m, n)``.
    nl : callable or None
        ``nl(t, z) -> (n,)`` for scalar ``t``.
    output_row : (n,) array, optional
        If given, ``y = z @ output_row`` is stored on the trajectory.

    Raises
    ------
    BlowUpError
        If ``max|z|`` exceeds ``BLOWUP_THRESHOLD``.
    """
    A = np.atleast_2d(np.asarray(A_lin, dtype=float))
    n = A.shape[0]
    z = np.array(z0, dtype=float).reshape(n)
    if spectral_abscissa(A) >= 0:
        warnings.warn("integrating with an unstable linear part", RuntimeWarning, stacklevel=2)
    t = cfg.grid()
    K = cfg.steps
    dt = cfg.dt
    Z = np.empty((K + 1, n))
    Z[0] = z

    if cfg.scheme == "dense-oracle":
        _dense_oracle(A, forcing, nl, Z, t, dt)
    else:
        eye = np.eye(n)
        if cfg.scheme == "imex-cnab2":
            Minv = np.linalg.inv(eye - 0.5 * dt * A)
            P = Minv @ (eye + 0.5 * dt * A)
        else:
            Minv = np.linalg.inv(eye - dt * A)
            P = Minv
        Q = dt * Minv
        Fg = forcing(t) if forcing is not None else np.zeros((K + 1, n))
        Fg = np.asarray(Fg, dtype=float).reshape(K + 1, n)
        QF = Fg @ Q.T  # Q @ F_k for every k
        N_prev = None
        QF_prev = None
        for k in range(K):
            if nl is not None:
                N_k = Q @ nl(t[k], z)
            else:
                N_k = 0.0
            if cfg.scheme == "imex-cnab2" and k > 0:
                z = P @ z + 1.5 * (QF[k] + N_k) - 0.5 * (QF_prev + N_prev)
            elif cfg.scheme == "imex-cnab2":
                # bootstrap: Euler on the nonlinearity; the forcing is known
                # at both ends of the step, so it is averaged
                z = P @ z + 0.5 * (QF[0] + QF[1]) + N_k
            else:
                z = P @ z + QF[k] + N_k
            QF_prev, N_prev = QF[k], N_k
            _guard(z, t[k + 1])
            Z[k + 1] = z
    traj = Trajectory(t, Z, None, cfg.scheme)
    if output_row is not None:
        traj.y = Z @ np.asarray(output_row)
    return traj


def _dense_oracle(A, forcing, nl, Z, t, dt):
    n = A.shape[0]
    h = 0.5 * dt
    E, Phi1, Phi2 = _phi_blocks(A, h)
    K = len(t) - 1
    th = h * np.arange(2 * K + 1)
    Fh = forcing(th) if forcing is not None else np.zeros((2 * K + 1, n))
    Fh = np.asarray(Fh, dtype=float).reshape(2 * K + 1, n)
    z = Z[0].copy()
    for s in range(2 * K):
        N0 = Fh[s] + (nl(th[s], z) if nl is not None else 0.0)
        a = E @ z + Phi1 @ N0
        N1 = Fh[s + 1] + (nl(th[s + 1], a) if nl is not None else 0.0)
        z = a + Phi2 @ (N1 - N0)
        if s % 2 == 1:
            _guard(z, th[s + 1])
            Z[(s + 1) // 2] = z


def _as_time_map(sig):
    if sig is None:
        return None
    if callable(sig):
        return sig
    raise TypeError("expected a callable time map")


def simulate_true_plant(plant: SemilinearPlant, u, d, z0, cfg: IntegratorConfig) -> Trajectory:
    """Simulate ``z' = A z + f(z) + b u(t) + b_d d(t)`` with outputs ``y = <c, z>``."""
    u = _as_time_map(u)
    d = _as_time_map(d)
    b, bd = plant.b, plant.b_d

    def forcing(t):
        out = np.outer(np.asarray(u(t), dtype=float), b) if u is not None else np.zeros((len(t), plant.n))
        if d is not None:
            out += np.outer(np.asarray(d(t), dtype=float), bd)
        return out

    nl = None if plant.is_linear else (lambda _t, z: plant.f(z))
    if z0 is None:
        z0 = np.zeros(plant.n)
    return integrate_semilinear(plant.A, forcing, nl, z0, cfg, output_row=plant.c_w)


def error_trace(traj: Trajectory, r) -> np.ndarray:
    """Tracking error ``r(t_k) - y(t_k)`` along a trajectory."""
    if traj.y is None:
        raise ValueError("trajectory has no outputs")
    rv = r(traj.t) if callable(r) else np.asarray(r)
    return np.asarray(rv, dtype=float) - traj.y
