"""Exact feedforward for linear plants driven by an exosystem.

For ``f = 0`` the regulator equations

    Pi S = A Pi + b Gamma + b_d P,     c_w Pi = Q

are linear in ``(Pi, Gamma)`` and are solved by Kronecker vectorization.
The feedforward ``u(t) = Gamma w(t)`` then makes ``z - Pi w`` decay at the
rate of ``exp(A t)``.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, expm, solve

from .model import Exosystem, SemilinearPlant
from .simulate import IntegratorConfig, Trajectory, _guard, simulate_true_plant

__all__ = [
    "RegulatorSolution",
    "RegulatorError",
    "solve_regulator",
    "oracle_closed_loop",
    "RESIDUAL_TOL",
]

RESIDUAL_TOL = 1e-10


class RegulatorError(ValueError):
    pass


@dataclass(frozen=True)
class RegulatorSolution:
    """``Pi`` (n x N) and ``Gamma`` (N,) with their relative residuals."""

    Pi: np.ndarray
    Gamma: np.ndarray
    residual_state: float
    residual_output: float

    @property
    def passed(self) -> bool:
        return max(self.residual_state, self.residual_output) < RESIDUAL_TOL

    def feedforward(self, exo: Exosystem):
        """``t -> Gamma w(t)``, vectorized over ``t``."""
        G = self.Gamma
        return lambda t: exo.state(t) @ G

    def to_csv(self) -> str:
        """Rows are state indices (plus a final ``Gamma`` row); columns are exosystem modes."""
        n, N = self.Pi.shape
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        header = ["row"] + [f"w_{k + 1}" for k in range(N)]
        wr.writerow(header)
        for i in range(n):
            wr.writerow([f"Pi_{i + 1}"] + [repr(float(v)) for v in self.Pi[i]])
        wr.writerow(["Gamma"] + [repr(float(v)) for v in self.Gamma])
        wr.writerow(["residual_state", repr(self.residual_state)] + [""] * (N - 1))
        wr.writerow(["residual_output", repr(self.residual_output)] + [""] * (N - 1))
        return buf.getvalue()


def regulator_residuals(plant: SemilinearPlant, exo: Exosystem, Pi, Gamma) -> tuple:
    """Relative residuals of both regulator equations.

    Each residual is normalized by the sum of the norms of its terms, so it
    measures backward error rather than an absolute misfit.
    """
    A, b, bd, c_w = plant.A, plant.b, plant.b_d, plant.c_w
    terms = [Pi @ exo.S, A @ Pi, np.outer(b, Gamma), np.outer(bd, exo.P)]
    R1 = terms[0] - terms[1] - terms[2] - terms[3]
    s1 = sum(np.linalg.norm(x) for x in terms)
    R2 = c_w @ Pi - exo.Q
    s2 = np.linalg.norm(np.abs(c_w) @ np.abs(Pi)) + np.linalg.norm(exo.Q)
    tiny = np.finfo(float).tiny
    return (float(np.linalg.norm(R1) / max(s1, tiny)), float(np.linalg.norm(R2) / max(s2, tiny)))


def solve_regulator(plant: SemilinearPlant, exo: Exosystem) -> RegulatorSolution:
    """Solve the linear regulator equations for ``(Pi, Gamma)``.

    Raises
    ------
    RegulatorError
        If the plant is nonlinear, or the assembled system is singular to
        working precision (a transmission zero at an exosystem frequency).
    """
    if not plant.is_linear:
        raise RegulatorError("oracle requires a linear plant")
    n, N = plant.n, exo.N
    In, IN = np.eye(n), np.eye(N)
    # unknown x = [vec(Pi) (column-major); Gamma]
    M = np.zeros((n * N + N, n * N + N))
    M[:n * N, :n * N] = np.kron(exo.S.T, In) - np.kron(IN, plant.A)
    M[:n * N, n * N:] = -np.kron(IN, plant.b[:, None])
    M[n * N:, :n * N] = np.kron(IN, plant.c_w[None, :])
    rhs = np.concatenate([np.outer(plant.b_d, exo.P).ravel(order="F"), exo.Q])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            x = solve(M, rhs)
    except (LinAlgError, LinAlgWarning) as exc:
        raise RegulatorError("non-square or rank-deficient regulator system") from exc
    Pi = x[:n * N].reshape((n, N), order="F")
    Gamma = x[n * N:].copy()
    r1, r2 = regulator_residuals(plant, exo, Pi, Gamma)
    return RegulatorSolution(Pi, Gamma, r1, r2)


def _exact_augmented(plant, exo, sol, z0, cfg):
    # [z; w]' = [[A, b Gamma + b_d P], [0, S]] [z; w] is autonomous, so one
    # exponential per step propagates it without discretization error.
    n, N = plant.n, exo.N
    M = np.zeros((n + N, n + N))
    M[:n, :n] = plant.A
    M[:n, n:] = np.outer(plant.b, sol.Gamma) + np.outer(plant.b_d, exo.P)
    M[n:, n:] = exo.S
    E = expm(cfg.dt * M)
    t = cfg.grid()
    X = np.empty((len(t), n + N))
    X[0] = np.concatenate([z0, exo.w0])
    for k in range(len(t) - 1):
        X[k + 1] = E @ X[k]
        _guard(X[k + 1, :n], t[k + 1])
    return Trajectory(t, X[:, :n], X[:, :n] @ plant.c_w, "exact-augmented")


def oracle_closed_loop(plant: SemilinearPlant, exo: Exosystem, sol: RegulatorSolution,
                       z0=None, cfg: Optional[IntegratorConfig] = None,
                       method: str = "exact") -> tuple:
    """Simulate the plant under ``u = Gamma w(t)``, ``d = P w(t)``.

    Parameters
    ----------
    method : {'exact', 'integrator'}
        ``'exact'`` propagates the stacked plant/exosystem system with its
        step exponential; ``'integrator'`` uses the configured scheme.

    Returns
    -------
    (Trajectory, ndarray)
        The trajectory and the error trace ``r - y``.
    """
    cfg = IntegratorConfig() if cfg is None else cfg
    z0 = np.zeros(plant.n) if z0 is None else np.asarray(z0, dtype=float).reshape(plant.n)
    if method == "exact":
        traj = _exact_augmented(plant, exo, sol, z0, cfg)
    elif method == "integrator":
        traj = simulate_true_plant(plant, sol.feedforward(exo), lambda t: exo.state(t) @ exo.P,
                                   z0, cfg)
    else:
        raise ValueError(f"unknown method {method!r}")
    r = exo.state(traj.t) @ exo.Q
    return traj, r - traj.y
