"""Error constants by quadrature of semigroup kernels, and bound verdicts.

Kernels of the regularized generator ``A_beta``::

    K(t)   = -(1/beta) C A_beta^{-1} exp(A_beta t) B
    K_d(t) = -C A_beta^{-1} exp(A_beta t) I0 B_d
    H(t)   = -C exp(A_beta t) I0

Their ``L1(0, inf)`` norms give ``D`` and ``D_d``; together with the
semigroup integrals ``D_H, D_B, D_Abeta, D_Bd`` and the Lipschitz bound
``eps`` they give the nonlinear corrections

    calD   = D_H D_B  eps / (1 - eps D_Abeta)
    calD_d = D_H D_Bd eps / (1 - eps D_Abeta)
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np
from scipy.linalg import expm

from .model import DiscreteFunctionSpace
from .regop import RegularizedOperators
from .signals import SignalPair, norm_k, InsufficientSmoothness

__all__ = [
    "UnstableGeneratorError",
    "SemigroupEvaluator",
    "Kernels",
    "ErrorConstants",
    "BoundVerdict",
    "compute_kernels",
    "compute_constants",
    "linear_bound",
    "nonlinear_bound",
    "limsup_estimate",
    "verdict_suite",
    "verdicts_to_csv",
    "verdict_table",
    "suite_passed",
    "VERDICT_SLACK",
    "TAIL_FRACTION",
    "NOISE_FLOOR",
]

VERDICT_SLACK = 0.05
NOISE_FLOOR = 1e-9  # relative to the signal scale; tails below it count as zero
TAIL_FRACTION = 0.2
TAIL_REL_TOL = 1e-8


class UnstableGeneratorError(ValueError):
    pass


class SemigroupEvaluator:
    """Evaluate ``exp(M t)`` applied to vectors/matrices at many times.

    Uses the eigendecomposition of ``M`` when it is diagonalizable to
    tolerance, and dense ``expm`` at each time otherwise.
    """

    def __init__(self, M, cond_limit: float = 1e6):
        self.M = np.atleast_2d(np.asarray(M, dtype=float))
        lam, V = np.linalg.eig(self.M)
        self.abscissa = float(lam.real.max())
        self.radius = float(np.abs(lam).max())
        self.modal = False
        if np.linalg.cond(V) < cond_limit:
            Vi = np.linalg.inv(V)
            rec = (V * lam) @ Vi
            if np.linalg.norm(rec - self.M) <= 1e-10 * max(np.linalg.norm(self.M), 1.0):
                self.modal = True
                self.lam, self.V, self.Vi = lam, V, Vi

    def _expm(self, t):
        return expm(self.M * t)

    def scalar(self, t, row, x):
        """``row @ exp(M t) @ x`` for each t."""
        t = np.atleast_1d(t)
        if self.modal:
            a = (row @ self.V) * (self.Vi @ x)
            return (np.exp(np.outer(t, self.lam)) @ a).real
        return np.array([row @ self._expm(s) @ x for s in t])

    def vectors(self, t, x):
        """``exp(M t) x`` for each t, shape (len(t), n)."""
        t = np.atleast_1d(t)
        if self.modal:
            a = self.Vi @ x
            return (np.exp(np.outer(t, self.lam)) * a) @ self.V.T
        return np.array([self._expm(s) @ x for s in t]).real

    def rows(self, t, row):
        """``row @ exp(M t)`` for each t, shape (len(t), n)."""
        t = np.atleast_1d(t)
        if self.modal:
            a = row @ self.V
            return ((np.exp(np.outer(t, self.lam)) * a) @ self.Vi).real
        return np.array([row @ self._expm(s) for s in t])

    def matrices(self, t, X):
        t = np.atleast_1d(t)
        if self.modal:
            ViX = self.Vi @ X
            for s in t:
                yield ((self.V * np.exp(self.lam * s)) @ ViX).real
        else:
            for s in t:
                yield self._expm(s) @ X

    def operator_norms(self, t, X, space: Optional[DiscreteFunctionSpace] = None):
        if space is None:
            return np.array([np.linalg.norm(E, 2) for E in self.matrices(t, X)])
        return np.array([space.operator_norm(E) for E in self.matrices(t, X)])


def _simpson_panels(t_fast: float, t_end: float, m: int):
    """Nodes and weights of composite Simpson on geometrically growing panels.

    Panels are ``[0, t_fast], [t_fast, 2 t_fast], [2 t_fast, 4 t_fast], ...``
    truncated at ``t_end``; each carries ``m`` (even) subintervals.
    """
    edges = [0.0]
    e = min(t_fast, t_end)
    while e < t_end:
        edges.append(e)
        e *= 2.0
    edges.append(t_end)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x = np.linspace(a, b, m + 1)
        w = np.ones(m + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= (b - a) / (3.0 * m)
        if nodes:
            weights[-1][-1] += w[0]
            x, w = x[1:], w[1:]
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass
class Kernels:
    ops: RegularizedOperators
    ev: SemigroupEvaluator

    @property
    def _q(self):
        # C A_beta^{-1}, computed directly (not through the beta-scaling identity)
        return self.ops.solve_A_beta(self.ops.c_w, trans=1)

    def K(self, t):
        return -self.ev.scalar(t, self._q, self.ops.B) / self.ops.beta

    def K_d(self, t):
        return -self.ev.scalar(t, self._q, self.ops.I0 @ self.ops.plant.b_d)

    def H(self, t):
        """Rows ``-C exp(A_beta t) I0``, shape (len(t), n)."""
        return -self.ev.rows(t, self.ops.c_w) @ self.ops.I0

    def H_norm(self, t):
        return self.ops.plant.space.functional_norm(self.H(t))


def compute_kernels(ops: RegularizedOperators) -> Kernels:
    ev = SemigroupEvaluator(ops.A_beta)
    if ev.abscissa >= 0:
        raise UnstableGeneratorError("unstable A_beta: constants undefined")
    return Kernels(ops, ev)


@dataclass
class ErrorConstants:
    beta: float
    epsilon: float
    D: float
    D_d: float
    D_H: float
    D_B: float
    D_Abeta: float
    D_Bd: float
    M_beta: float
    omega_beta: float
    T_star: float
    nodes: int
    tails: dict = field(default_factory=dict)
    calD: Optional[float] = None
    calD_d: Optional[float] = None

    @property
    def frakD(self) -> float:
        return self.D_d / self.D if self.D > 0 else 0.0

    @property
    def nonlinear_defined(self) -> bool:
        return self.calD is not None

    def as_rows(self):
        rows = [
            ("beta", self.beta), ("epsilon", self.epsilon),
            ("D", self.D), ("D_d", self.D_d), ("frakD", self.frakD),
            ("D_H", self.D_H), ("D_B", self.D_B), ("D_Abeta", self.D_Abeta), ("D_Bd", self.D_Bd),
            ("calD", self.calD), ("calD_d", self.calD_d),
            ("M_beta", self.M_beta), ("omega_beta", self.omega_beta),
            ("T_star", self.T_star), ("quadrature_nodes", self.nodes),
        ]
        rows += [(f"tail_{k}", v) for k, v in self.tails.items()]
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["constant", "value"])
        for k, v in self.as_rows():
            wr.writerow([k, "undefined" if v is None else repr(float(v))])
        return buf.getvalue()


def compute_constants(ops: RegularizedOperators, epsilon: Optional[float] = None,
                      panel_steps: int = 64, max_rounds: int = 4) -> ErrorConstants:
    """Evaluate every error constant by composite Simpson quadrature.

    The truncation time ``T*`` is grown until the exponential tail bound
    ``L R M_hat exp(-omega T*) / omega`` of each integrand is below
    ``1e-8`` of its integral (``L``, ``R`` are the norms of the factors
    flanking the semigroup).
    """
    if epsilon is None:
        epsilon = ops.plant.epsilon
    kern = compute_kernels(ops)
    ev = kern.ev
    space = ops.plant.space
    omega = -ev.abscissa
    t_fast = 1.0 / ev.radius
    beta = ops.beta
    I0 = ops.I0
    Ibd = I0 @ ops.plant.b_d
    q = kern._q
    eye = np.eye(ops.n)

    # norms of the fixed factors around exp(A_beta t)
    flank = {
        "D": space.functional_norm(q) * space.norm(ops.B) / beta,
        "D_d": space.functional_norm(q) * space.norm(Ibd),
        "D_H": space.functional_norm(ops.c_w) * space.operator_norm(I0),
        "D_B": space.norm(ops.B),
        "D_Abeta": space.operator_norm(I0),
        "D_Bd": space.norm(Ibd),
    }

    T_star = 30.0 / omega
    for _ in range(max_rounds):
        t, w = _simpson_panels(t_fast, T_star, panel_steps)
        grow = ev.operator_norms(t, eye, space)
        M_hat = float(np.max(grow * np.exp(omega * t)))
        vals = {
            "D": np.abs(kern.K(t)),
            "D_d": np.abs(kern.K_d(t)),
            "D_H": kern.H_norm(t),
            "D_B": space.norm(ev.vectors(t, ops.B)),
            "D_Abeta": ev.operator_norms(t, I0, space),
            "D_Bd": space.norm(ev.vectors(t, Ibd)),
        }
        ints = {k: float(w @ v) for k, v in vals.items()}
        tails = {k: float(flank[k] * M_hat * np.exp(-omega * T_star) / omega) for k in ints}
        short = [k for k in ints if tails[k] > TAIL_REL_TOL * ints[k] and flank[k] > 0]
        if not short:
            break
        need = max(np.log(flank[k] * M_hat / (omega * TAIL_REL_TOL * max(ints[k], 1e-300))) / omega
                   for k in short)
        T_star = max(need * 1.05, T_star * 1.5)

    calD = calD_d = None
    if epsilon * ints["D_Abeta"] < 1.0:
        den = 1.0 - epsilon * ints["D_Abeta"]
        calD = ints["D_H"] * ints["D_B"] * epsilon / den
        calD_d = ints["D_H"] * ints["D_Bd"] * epsilon / den
    return ErrorConstants(
        beta=beta, epsilon=float(epsilon),
        D=ints["D"], D_d=ints["D_d"], D_H=ints["D_H"], D_B=ints["D_B"],
        D_Abeta=ints["D_Abeta"], D_Bd=ints["D_Bd"],
        M_beta=M_hat, omega_beta=omega, T_star=float(T_star), nodes=len(t),
        tails=tails, calD=calD, calD_d=calD_d,
    )


def _check_order(sig, k):
    if sig.order is not None and sig.order < k:
        raise InsufficientSmoothness(
            f"insufficient signal smoothness: {sig.label} declares order {sig.order} < {k}")


def _alpha_bar(signals: SignalPair):
    freqs = [s.freq for s in (signals.r, signals.d) if not s.is_zero]
    if any(f is None for f in freqs):
        return None
    return max(freqs, default=0.0)


def linear_bound(n: int, constants: ErrorConstants, signals: SignalPair) -> dict:
    """Bounds on ``limsup |e_n|`` for a linear plant.

    Returns a dict with ``general = D^n C_n``, ``harmonic`` (or None) and
    ``alpha_D`` (``alpha_bar * D``, or None if the frequency is unknown).
    """
    r, d = signals.r, signals.d
    _check_order(r, n)
    if not d.is_zero:
        _check_order(d, n)
    D = constants.D
    frak = constants.frakD if not d.is_zero else 0.0
    C_n = max(r.sup_norm(j) for j in range(n + 1))
    if frak > 0:
        C_n += frak * max(d.sup_norm(j) for j in range(n + 1))
    harm = None
    if r.harmonic is not None and d.harmonic is not None:
        _, a_r, w_r, _ = r.harmonic
        _, a_d, w_d, _ = d.harmonic
        harm = D ** n * (abs(a_r) * w_r ** n + abs(a_d) * frak * w_d ** n)
    ab = _alpha_bar(signals)
    return {"n": n, "C_n": C_n, "general": D ** n * C_n, "harmonic": harm,
            "alpha_D": None if ab is None else ab * D}


def nonlinear_bound(level: str, constants: ErrorConstants, signals: SignalPair) -> float:
    """Bounds on ``limsup |e_0|`` (``level='e0'``) or ``limsup |e_1|`` (``'e1'``)."""
    if not constants.nonlinear_defined:
        raise ValueError("nonlinear constants undefined: eps * D_Abeta >= 1")
    k = {"e0": 1, "e1": 2}[level]
    r, d = signals.r, signals.d
    _check_order(r, k)
    Dr = constants.D + constants.calD
    Dd = constants.D_d + constants.calD_d
    rn = norm_k(r, k)
    dn = 0.0 if d.is_zero else norm_k(d, k)
    if level == "e0":
        return Dr * rn + Dd * dn
    return Dr ** 2 * (rn + (Dd / Dr) * dn)


def limsup_estimate(trace, grid, omega_hat: float, fraction: float = TAIL_FRACTION) -> float:
    """Sup of ``|trace|`` over the final ``fraction`` of the horizon."""
    grid = np.asarray(grid)
    T = grid[-1] - grid[0]
    if T < 10.0 / omega_hat * (1 - 1e-12):
        raise ValueError("horizon too short for limsup estimate")
    mask = grid >= grid[-1] - fraction * T - 1e-12 * T
    return float(np.max(np.abs(np.asarray(trace)[mask])))


@dataclass
class BoundVerdict:
    n: int
    formula: str
    bound: float
    measured: float
    passed: bool
    note: str = ""
    informative: bool = True  # False rows are reported but do not gate the suite

    @classmethod
    def check(cls, n, formula, bound, measured, note="", informative=True, floor=0.0):
        ok = bool(measured <= bound * (1.0 + VERDICT_SLACK) + floor)
        return cls(n, formula, float(bound), float(measured), ok, note, informative)


def suite_passed(verdicts: List["BoundVerdict"]) -> bool:
    """True when every informative verdict passed."""
    return all(v.passed for v in verdicts if v.informative)


def verdicts_to_csv(verdicts: List[BoundVerdict]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["n", "formula", "bound", "measured", "verdict", "note"])
    for v in verdicts:
        wr.writerow([v.n, v.formula, repr(v.bound), repr(v.measured),
                     "pass" if v.passed else "fail", v.note])
    return buf.getvalue()


def verdict_table(verdicts: List[BoundVerdict]) -> str:
    lines = [f"{'n':>2}  {'formula':<22} {'bound':>12} {'measured':>12}  verdict  note"]
    for v in verdicts:
        lines.append(f"{v.n:>2}  {v.formula:<22} {v.bound:12.5e} {v.measured:12.5e}  "
                     f"{'pass' if v.passed else 'FAIL':<7}  {v.note}")
    return "\n".join(lines)


def verdict_suite(stack, constants: ErrorConstants,
                  closed_loop_tol: Optional[float] = None) -> List[BoundVerdict]:
    """Check every available bound against measured tail sups of ``e_n``.

    Also adds a tail-monotonicity row (decreasing expected when
    ``alpha_bar D < 1``, non-decreasing otherwise), the closed-loop
    consistency row, and a ``diverged`` row if the iteration blew up.
    """
    if abs(stack.ops.beta - constants.beta) > 1e-15:
        raise ValueError("constants were computed for a different beta")
    out: List[BoundVerdict] = []
    t = stack.t
    omega = constants.omega_beta
    tails = [limsup_estimate(rec.e, t, omega) for rec in stack.records]
    linear = stack.plant.is_linear
    sig = stack.signals
    floor = NOISE_FLOOR * max(1.0, sig.r.sup_norm(0) + sig.d.sup_norm(0))
    alpha_D = None
    for n, meas in enumerate(tails):
        try:
            lb = linear_bound(n, constants, sig)
        except InsufficientSmoothness as exc:
            out.append(BoundVerdict(n, "linear", float("nan"), meas, False, str(exc)))
            continue
        alpha_D = lb["alpha_D"]
        note = ""
        informative = alpha_D is None or alpha_D < 1.0
        if not informative:
            note = "bound non-informative, divergence expected"
        if linear:
            out.append(BoundVerdict.check(n, "D^n C_n", lb["general"], meas, note, informative,
                                          floor))
            if lb["harmonic"] is not None:
                out.append(BoundVerdict.check(n, "harmonic", lb["harmonic"], meas, note,
                                              informative, floor))
        if n <= 1 and constants.nonlinear_defined:
            level = "e0" if n == 0 else "e1"
            try:
                nb = nonlinear_bound(level, constants, sig)
                out.append(BoundVerdict.check(n, f"nonlinear {level}", nb, meas, floor=floor))
            except InsufficientSmoothness as exc:
                out.append(BoundVerdict(n, f"nonlinear {level}", float("nan"), meas, False, str(exc)))
    if len(tails) >= 2:
        # once a tail is at the noise floor the sequence has converged
        dec = all(b < a or a <= floor for a, b in zip(tails, tails[1:]))
        nondec = all(b >= a for a, b in zip(tails, tails[1:]))
        expect_div = alpha_D is not None and alpha_D >= 1.0
        if expect_div:
            out.append(BoundVerdict(len(tails) - 1, "tails non-decreasing", 0.0, tails[-1],
                                    nondec or stack.diverged is not None, "observation"))
        else:
            out.append(BoundVerdict(len(tails) - 1, "tails decreasing", tails[0], tails[-1],
                                    dec, "observation"))
    if stack.e_true is not None:
        tol = closed_loop_tol if closed_loop_tol is not None else (1e-4 if linear else 1e-3)
        gap = float(np.max(np.abs(stack.e_true - stack.records[-1].e)))
        out.append(BoundVerdict(len(tails) - 1, "closed-loop", tol, gap, gap <= tol,
                                "true plant vs internal e_n"))
    if stack.diverged is not None:
        j, when, msg = stack.diverged
        out.append(BoundVerdict(j, "diverged", float("nan"), float("inf"), False,
                                f"blow-up at t={when:.6g}"))
    return out
