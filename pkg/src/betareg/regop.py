"""Regularized operator family ``G, zeta, B, A_beta, I0`` for a plant.

With ``p = c_w A^{-1}`` (the row ``C A^{-1}``), the family is

    G      = -p b                  (DC gain)
    B      = b / G                 (so that -p B = 1)
    zeta   = (1 - beta) / beta
    A_beta = A - zeta B c_w
    I0     = I + B p
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .model import SemilinearPlant, spectral_abscissa

__all__ = [
    "TransmissionZeroError",
    "RegularizedOperators",
    "IdentityReport",
    "transfer_gain",
    "build_regularized",
    "verify_identities",
    "spectral_abscissa",
    "semigroup_growth",
]


class TransmissionZeroError(ValueError):
    """The plant has (numerically) zero DC gain, so ``B = b / G`` is undefined."""


def transfer_gain(plant: SemilinearPlant) -> float:
    """DC gain ``C (-A)^{-1} B_in`` of the linearized plant."""
    x = lu_solve(lu_factor(plant.A), plant.b)
    G = -float(plant.c_w @ x)
    scale = np.linalg.norm(plant.c_w) * np.linalg.norm(plant.b)
    if not abs(G) >= 1e-12 * scale:
        raise TransmissionZeroError("transmission zero at origin: G is numerically zero")
    return G


@dataclass(frozen=True)
class RegularizedOperators:
    plant: SemilinearPlant
    beta: float
    G: float
    B: np.ndarray
    p: np.ndarray
    A_beta: np.ndarray
    I0: np.ndarray
    lu_A: tuple = field(repr=False)
    lu_A_beta: tuple = field(repr=False)

    @property
    def zeta(self) -> float:
        return (1.0 - self.beta) / self.beta

    @property
    def c_w(self) -> np.ndarray:
        return self.plant.c_w

    @property
    def n(self) -> int:
        return self.plant.n

    def solve_A(self, rhs, trans=0):
        return lu_solve(self.lu_A, rhs, trans=trans)

    def solve_A_beta(self, rhs, trans=0):
        return lu_solve(self.lu_A_beta, rhs, trans=trans)


def build_regularized(plant: SemilinearPlant, beta: float, check: bool = True) -> RegularizedOperators:
    """Construct the regularized operators for ``0 < beta <= 1``.

    Emits a :class:`RuntimeWarning` (not an error) when ``A_beta`` is not
    exponentially stable, which happens for small ``beta`` on many plants.
    """
    beta = float(beta)
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0,1]")
    G = transfer_gain(plant)
    n = plant.n
    lu_A = lu_factor(plant.A)
    p = lu_solve(lu_A, plant.c_w, trans=1)
    B = plant.b / G
    zeta = (1.0 - beta) / beta
    if zeta == 0.0:
        A_beta = plant.A.copy()
    else:
        A_beta = plant.A - zeta * np.outer(B, plant.c_w)
    I0 = np.eye(n) + np.outer(B, p)
    if spectral_abscissa(A_beta) >= 0:
        warnings.warn(f"A_beta is not exponentially stable for beta={beta}", RuntimeWarning,
                      stacklevel=2)
    ops = RegularizedOperators(plant, beta, G, B, p, A_beta, I0, lu_A, lu_factor(A_beta))
    if check:
        report = verify_identities(ops, tol=1e-8)
        if not report.passed:
            raise ArithmeticError("regularized operators fail their identities:\n" + report.table())
    return ops


@dataclass
class IdentityReport:
    rows: List[tuple] = field(default_factory=list)  # (name, residual, tol, passed)

    @property
    def passed(self) -> bool:
        return all(r[3] for r in self.rows)

    @property
    def max_residual(self) -> float:
        return max(r[1] for r in self.rows)

    def table(self) -> str:
        w = max(len(r[0]) for r in self.rows)
        lines = [f"{'identity':<{w}}  {'residual':>10}  {'tol':>8}  verdict"]
        for name, res, tol, ok in self.rows:
            lines.append(f"{name:<{w}}  {res:10.3e}  {tol:8.1e}  {'pass' if ok else 'FAIL'}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["identity", "residual", "tolerance", "verdict"])
        for name, res, tol, ok in self.rows:
            wr.writerow([name, repr(float(res)), repr(float(tol)), "pass" if ok else "fail"])
        return buf.getvalue()


def _rel(lhs, rhs, scale) -> float:
    den = max(np.linalg.norm(rhs), scale, np.finfo(float).tiny)
    return float(np.linalg.norm(np.asarray(lhs) - np.asarray(rhs)) / den)


def verify_identities(ops: RegularizedOperators, tol: float = 1e-8) -> IdentityReport:
    """Measure the relative residual of every algebraic identity of the family.

    Residuals are Frobenius norms of ``lhs - rhs`` relative to ``||rhs||``.
    Where ``rhs`` vanishes or is built from ``I0`` (which can be pure
    roundoff, e.g. for collocated scalar plants), the product of operand
    norms is used when it is larger.
    """
    beta, zeta = ops.beta, ops.zeta
    B, p, c_w = ops.B, ops.p, ops.c_w
    n = ops.n
    eye = np.eye(n)
    BP = np.outer(B, p)  # B C A^{-1}
    inv_form = eye - zeta * BP
    nrm = np.linalg.norm
    rows = []

    def add(name, lhs, rhs, scale=0.0):
        res = _rel(lhs, rhs, scale)
        rows.append((name, res, tol, bool(res <= tol)))

    add("inverse: [I+(1-b)BCA^-1][I-zBCA^-1]=I", (eye + (1.0 - beta) * BP) @ inv_form, eye)
    add("idempotent: (-BCA^-1)^2=-BCA^-1", BP @ BP, -BP)
    q = ops.solve_A_beta(c_w, trans=1)  # C A_beta^{-1}
    add("CA_b^-1 = b CA^-1", q, beta * p)
    add("A_b^-1 B = b A^-1 B", ops.solve_A_beta(B), beta * ops.solve_A(B))
    add("CA_b^-1 B = -b", q @ B, -beta)
    # I0 = I + B p may itself be roundoff-sized, so scale by its ingredients
    i0_scale = nrm(eye) + nrm(B) * nrm(p)
    add("CA^-1 I0 = 0", p @ ops.I0, np.zeros(n), scale=nrm(p) * i0_scale)
    add("CA^-1 A_b = C/b", p @ ops.A_beta, c_w / beta)
    add("[I-zBCA^-1]B = B/b", inv_form @ B, B / beta)
    add("[I-zBCA^-1]I0 = I0", inv_form @ ops.I0, ops.I0, scale=nrm(inv_form) * i0_scale)
    add("[I-zBCA^-1]A = A_b", inv_form @ ops.plant.A, ops.A_beta)
    return IdentityReport(rows)


def semigroup_growth(M, t_samples, space=None) -> tuple:
    """Sampled growth constants ``(M_hat, omega_hat)`` of ``exp(M t)``.

    ``omega_hat = -abscissa(M)``; ``M_hat`` is the largest sampled value of
    ``||exp(M t)|| exp(omega_hat t)`` in the (weighted) operator norm.
    """
    from .analysis import SemigroupEvaluator  # deferred: analysis imports this module

    M = np.atleast_2d(np.asarray(M, dtype=float))
    t = np.asarray(t_samples, dtype=float)
    ev = SemigroupEvaluator(M)
    omega = -ev.abscissa
    norms = ev.operator_norms(t, np.eye(M.shape[0]), space)
    return float(np.max(norms * np.exp(omega * t))), omega
