"""The beta-iteration controller.

Iteration 0 integrates the regularized dynamic controller

    z0' = A_beta z0 + I0 (f(z0) + B_d d) + (1/beta) B r,   z0(0) = zbar_0
    u0  = G^{-1} [ r/beta - zeta C z0 + C A^{-1} (f(z0) + B_d d) ]

and iteration ``j >= 1`` integrates

    zj' = A_beta zj + I0 F_j + (1/beta) B e_{j-1},          zj(0) = 0
    F_j = f(Z_{j-1} + zj) - f(Z_{j-1}),   Z_{j-1} = z0 + ... + z_{j-1}
    uj  = G^{-1} [ e_{j-1}/beta - zeta C zj + C A^{-1} F_j ]
    e_j = e_{j-1} - C zj

The accumulated control ``u0 + ... + un`` drives the true plant.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .model import SemilinearPlant
from .regop import RegularizedOperators
from .signals import SignalPair
from .simulate import (BlowUpError, GridFunction, IntegratorConfig, Trajectory,
                       integrate_semilinear, simulate_true_plant)

__all__ = [
    "IterationRecord",
    "IterationStack",
    "SetpointResult",
    "ConsistencyReport",
    "NewtonStagnation",
    "iteration0",
    "iteration_j",
    "run_beta_iteration",
    "setpoint_init",
    "control_consistency_check",
    "default_horizon",
    "slowest_frequency",
    "INTEGRATOR_TOL",
]

log = logging.getLogger(__name__)

#: tolerance used to compare two integration paths of the same quantity
INTEGRATOR_TOL = 1e-4


def default_horizon(ops: RegularizedOperators, freq: Optional[float] = None) -> float:
    """``max(20, 10 / omega_hat)`` with ``omega_hat = -abscissa(A_beta)``.

    When the slowest nonzero signal frequency ``freq`` is given, the horizon
    is also stretched so that the final fifth of it spans a full period,
    which the tail sup-norm needs to see a peak.
    """
    omega = -float(np.max(np.linalg.eigvals(ops.A_beta).real))
    T = 20.0 if omega <= 0 else max(20.0, 10.0 / omega)
    if freq:
        T = max(T, 5 * 2 * np.pi / freq)
    return float(T)


def slowest_frequency(signals: SignalPair) -> Optional[float]:
    """Smallest nonzero tone among the single-tone parts of ``r`` and ``d``."""
    out = []
    for sig in (signals.r, signals.d):
        if sig.harmonic is not None and sig.harmonic[2] > 0:
            out.append(sig.harmonic[2])
        elif sig.harmonic is None and sig.freq:
            out.append(sig.freq)
    return min(out) if out else None


@dataclass
class IterationRecord:
    j: int
    traj: Trajectory
    u: np.ndarray
    e: np.ndarray
    F: Optional[np.ndarray] = None

    @property
    def z(self) -> np.ndarray:
        return self.traj.z


@dataclass
class IterationStack:
    plant: SemilinearPlant
    ops: RegularizedOperators
    signals: SignalPair
    z0: np.ndarray
    cfg: IntegratorConfig
    records: List[IterationRecord] = field(default_factory=list)
    diverged: Optional[tuple] = None  # (iteration, time, message)
    y_true: Optional[np.ndarray] = None
    e_true: Optional[np.ndarray] = None

    @property
    def t(self) -> np.ndarray:
        return self.cfg.grid()

    @property
    def n(self) -> int:
        return len(self.records) - 1

    def z_cum(self, upto: Optional[int] = None) -> np.ndarray:
        upto = self.n if upto is None else upto
        return np.sum([rec.z for rec in self.records[:upto + 1]], axis=0)

    def u_cum(self, upto: Optional[int] = None) -> np.ndarray:
        upto = self.n if upto is None else upto
        return np.sum([rec.u for rec in self.records[:upto + 1]], axis=0)

    def r_grid(self) -> np.ndarray:
        return self.signals.r(self.t)

    def d_grid(self) -> np.ndarray:
        return self.signals.d(self.t)

    def to_csv(self, summary: Optional[dict] = None) -> str:
        """Columns ``t, r, d, e_0..e_n, u_0..u_n`` (cumulative), ``y_true``."""
        t = self.t
        cols = {"t": t, "r": self.r_grid(), "d": self.d_grid()}
        for rec in self.records:
            cols[f"e_{rec.j}"] = rec.e
        running = np.zeros_like(t)
        for rec in self.records:
            running = running + rec.u
            cols[f"u_{rec.j}"] = running
        cols["y_true"] = self.y_true if self.y_true is not None else np.full_like(t, np.nan)
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        names = list(cols)
        wr.writerow(names)
        data = np.column_stack([cols[k] for k in names])
        for row in data:
            wr.writerow([repr(float(v)) for v in row])
        if summary:
            buf.write("\n")
            wr.writerow(["summary", "value"])
            for k, v in summary.items():
                wr.writerow([k, v])
        return buf.getvalue()


def _control(ops, drive, y, F):
    """``G^{-1} [drive/beta - zeta y + C A^{-1} F]`` on the grid."""
    return (drive / ops.beta - ops.zeta * y + F @ ops.p) / ops.G


def iteration0(plant: SemilinearPlant, ops: RegularizedOperators, signals: SignalPair,
               z0, cfg: IntegratorConfig) -> IterationRecord:
    """Integrate the regularized dynamic controller and evaluate ``u0``, ``e0``."""
    beta = ops.beta
    Ibd = ops.I0 @ plant.b_d
    r, d = signals.r, signals.d

    def forcing(t):
        return np.outer(r(t) / beta, ops.B) + np.outer(d(t), Ibd)

    nl = None
    if not plant.is_linear:
        I0, f = ops.I0, plant.f

        def nl(_t, z):
            return I0 @ f(z)

    z0 = np.zeros(plant.n) if z0 is None else np.asarray(z0, dtype=float)
    traj = integrate_semilinear(ops.A_beta, forcing, nl, z0, cfg, output_row=plant.c_w)
    t = traj.t
    rg, dg = r(t), d(t)
    F = plant.f(traj.z)
    u = _control(ops, rg, traj.y, F + np.outer(dg, plant.b_d))
    return IterationRecord(0, traj, u, rg - traj.y, F)


def iteration_j(stack: IterationStack, j: int, cfg: Optional[IntegratorConfig] = None) -> IterationRecord:
    """Integrate iteration ``j >= 1`` from records ``0..j-1``.

    The disturbance does not enter: only ``e_{j-1}`` and the accumulated
    state ``Z_{j-1}`` are used.
    """
    if j < 1 or len(stack.records) < j:
        raise ValueError(f"iteration {j} needs records 0..{j - 1}")
    cfg = stack.cfg if cfg is None else cfg
    ops, plant = stack.ops, stack.plant
    t = cfg.grid()
    e_prev = stack.records[j - 1].e
    e_fn = GridFunction.on(t, e_prev)
    B_beta = ops.B / ops.beta

    def forcing(tt):
        return np.outer(e_fn(tt), B_beta)

    nl = None
    Zc = None
    if not plant.is_linear:
        Zc = stack.z_cum(j - 1)
        Zc_fn = GridFunction.on(t, Zc)
        I0, f = ops.I0, plant.f

        def nl(tt, z):
            zc = Zc_fn(tt)
            return I0 @ (f(zc + z) - f(zc))

    traj = integrate_semilinear(ops.A_beta, forcing, nl, np.zeros(plant.n), cfg,
                                output_row=plant.c_w)
    if Zc is None:
        F = np.zeros_like(traj.z)
    else:
        F = plant.f(Zc + traj.z) - plant.f(Zc)
    u = _control(ops, e_prev, traj.y, F)
    return IterationRecord(j, traj, u, e_prev - traj.y, F)


def run_beta_iteration(plant: SemilinearPlant, ops: RegularizedOperators, signals: SignalPair,
                       z0=None, n: int = 3, cfg: Optional[IntegratorConfig] = None,
                       closed_loop: bool = True) -> IterationStack:
    """Run iterations ``0..n`` and (optionally) the true plant under ``u0 + ... + un``.

    A blow-up in iteration ``j`` stops the loop; the partial stack is
    returned with ``diverged = (j, time, message)``.
    """
    if n < 0:
        raise ValueError("iteration count must be nonnegative")
    if cfg is None:
        cfg = IntegratorConfig(T=default_horizon(ops, slowest_frequency(signals)))
    z0 = np.zeros(plant.n) if z0 is None else np.asarray(z0, dtype=float)
    stack = IterationStack(plant, ops, signals, z0, cfg)
    for j in range(n + 1):
        try:
            rec = iteration0(plant, ops, signals, z0, cfg) if j == 0 else iteration_j(stack, j, cfg)
        except BlowUpError as exc:
            log.info("iteration %d diverged: %s", j, exc)
            stack.diverged = (j, exc.time, str(exc))
            break
        stack.records.append(rec)
    if not stack.records:
        return stack
    _check_telescoping(stack)
    if closed_loop:
        u_fn = GridFunction.on(stack.t, stack.u_cum())
        try:
            traj = simulate_true_plant(plant, u_fn, signals.d, z0, cfg)
        except BlowUpError as exc:
            if stack.diverged is None:
                stack.diverged = (stack.n, exc.time, f"true plant: {exc}")
        else:
            stack.y_true = traj.y
            stack.e_true = stack.r_grid() - traj.y
    return stack


def _check_telescoping(stack: IterationStack):
    recomputed = stack.r_grid() - stack.z_cum() @ stack.plant.c_w
    e_n = stack.records[-1].e
    scale = max(1.0, float(np.max(np.abs(e_n))), float(np.max(np.abs(recomputed))))
    gap = float(np.max(np.abs(recomputed - e_n)))
    if gap > 1e-12 * scale:
        raise ArithmeticError(f"telescoping identity violated: |r - C z_n - e_n| = {gap:.3e}")


class NewtonStagnation(RuntimeError):
    pass


@dataclass
class SetpointResult:
    z: np.ndarray
    u: float
    residual: float
    output_residual: float
    iterations: int


def _stationary_residual(plant, z, u, d0):
    F = plant.A @ z + plant.b * u + plant.b_d * d0 + plant.f(z)
    # normwise backward error of the state equation
    scale = (np.abs(plant.A).sum(axis=1).max() * np.abs(z).max() + np.abs(plant.b).max() * abs(u)
             + np.abs(plant.b_d).max() * abs(d0) + np.abs(plant.f(z)).max())
    return F, float(np.abs(F).max() / max(scale, np.finfo(float).tiny))


def setpoint_init(plant: SemilinearPlant, r0: float, d0: float = 0.0, tol: float = 1e-12,
                  maxiter: int = 50) -> SetpointResult:
    """Solve ``0 = A z + b u + b_d d0 + f(z)``, ``C z = r0`` by Newton's method.

    The initial guess is the linear solution (``f`` dropped).  ``residual``
    is the normwise relative (backward) error of the state equation.
    """
    n = plant.n
    c_w = plant.c_w

    def jac(z):
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = plant.A + np.diag(plant.f.derivative(z))
        J[:n, n] = plant.b
        J[n, :n] = c_w
        return J

    rhs = np.concatenate([-plant.b_d * d0, [r0]])
    J0 = np.zeros((n + 1, n + 1))
    J0[:n, :n] = plant.A
    J0[:n, n] = plant.b
    J0[n, :n] = c_w
    x = lu_solve(lu_factor(J0), rhs)
    for it in range(maxiter + 1):
        z, u = x[:n], x[n]
        F, res = _stationary_residual(plant, z, u, d0)
        out_res = abs(float(c_w @ z) - r0)
        if res < tol and out_res < tol * max(1.0, abs(r0)):
            return SetpointResult(z.copy(), float(u), res, out_res, it)
        if it == maxiter:
            break
        G = np.concatenate([F, [c_w @ z - r0]])
        x = x - np.linalg.solve(jac(z), G)
    raise NewtonStagnation(f"Newton stagnation after {maxiter} iterations (residual {res:.3e})")


@dataclass
class ConsistencyReport:
    discrepancy: float
    tolerance: float
    u_closed: np.ndarray
    u_derivative: np.ndarray

    @property
    def passed(self) -> bool:
        return self.discrepancy < self.tolerance


def control_consistency_check(stack: IterationStack, cfg: Optional[IntegratorConfig] = None,
                              tol: float = 10 * INTEGRATOR_TOL) -> ConsistencyReport:
    """Re-evaluate ``u0`` from its derivative form and compare with the closed formula.

    The derivative form is ``u0 = G^{-1} [r - C zt]`` where
    ``zt = A^{-1} [(1 - beta) z0' - f(z0) - B_d d]``; ``z0'`` is taken from
    second-order finite differences of the stored trajectory.
    """
    if not stack.records:
        raise ValueError("stack has no iteration 0")
    rec = stack.records[0]
    ops, plant = stack.ops, stack.plant
    t = rec.traj.t
    z = rec.z
    zdot = np.gradient(z, t, axis=0, edge_order=2)
    rhs = (1.0 - ops.beta) * zdot - plant.f(z) - np.outer(stack.signals.d(t), plant.b_d)
    zt = ops.solve_A(rhs.T).T
    u_deriv = (stack.signals.r(t) - zt @ plant.c_w) / ops.G
    gap = float(np.max(np.abs(u_deriv - rec.u)))
    return ConsistencyReport(gap, tol, rec.u, u_deriv)
