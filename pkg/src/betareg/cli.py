"""Command-line front end: ``betareg {verify,run,oracle,sweep}``.

Exit codes: 0 success, 1 failed check, 2 bad configuration,
3 unexpected integrator blow-up.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .analysis import (BoundVerdict, UnstableGeneratorError, compute_constants, limsup_estimate,
                       suite_passed, verdict_suite, verdict_table, verdicts_to_csv)
from .config import ConfigError, ExperimentConfig, load, parse, serialize
from .iterctl import (control_consistency_check, default_horizon,
                      run_beta_iteration, setpoint_init, slowest_frequency)
from .oracle import RESIDUAL_TOL, RegulatorError, oracle_closed_loop, solve_regulator
from .model import spectral_abscissa
from .regop import build_regularized, verify_identities
from .simulate import IntegratorConfig

log = logging.getLogger("betareg")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3
BOUND_FORMULAS = ("D^n C_n", "harmonic", "nonlinear e0", "nonlinear e1", "linear")


class _ConfigProblem(Exception):
    pass


def _say(args, text):
    if not args.quiet:
        print(text)


def _write(out: Path, name: str, body: str):
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", newline="") as fh:
        fh.write(body)
    return path


def _check_columns(body: str):
    rows = list(csv.reader(io.StringIO(body)))
    width = len(rows[0])
    for i, row in enumerate(rows):
        if row and len(row) != width:
            raise ValueError(f"CSV row {i} has {len(row)} columns, header has {width}")


def _setup(cfg: ExperimentConfig):
    """Plant and operators, mapping construction errors to config problems."""
    try:
        plant = cfg.build_plant()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ops = build_regularized(plant, cfg["beta"], check=False)
    except ValueError as exc:
        raise _ConfigProblem(str(exc)) from None
    return plant, ops


def _integrator(cfg: ExperimentConfig, ops, signals) -> IntegratorConfig:
    T = cfg["integrator.T"] or default_horizon(ops, slowest_frequency(signals))
    try:
        return IntegratorConfig(cfg["integrator.dt"], T, cfg["integrator.scheme"])
    except ValueError as exc:
        raise _ConfigProblem(str(exc)) from None


@dataclass
class RunResult:
    code: int
    verdicts: List[BoundVerdict] = field(default_factory=list)
    tails: List[float] = field(default_factory=list)
    messages: List[str] = field(default_factory=list)
    stack: object = None
    constants: object = None
    identities: object = None


def execute_run(cfg: ExperimentConfig, tol: Optional[float] = None) -> RunResult:
    """Run one experiment end to end and decide its exit status."""
    plant, ops = _setup(cfg)
    signals = cfg.build_signals()
    icfg = _integrator(cfg, ops, signals)
    res = RunResult(EXIT_OK)
    if cfg["verdicts.identities"]:
        res.identities = verify_identities(ops)
        if not res.identities.passed:
            res.messages.append("operator identities failed")
            res.code = EXIT_FAIL
    z0 = None
    if cfg["init"] == "setpoint":
        z0 = setpoint_init(plant, float(signals.r(0.0)), float(signals.d(0.0))).z
    try:
        C = compute_constants(ops)
    except UnstableGeneratorError as exc:
        res.messages.append(str(exc))
        return RunResult(EXIT_FAIL, messages=res.messages)
    res.constants = C
    stack = run_beta_iteration(plant, ops, signals, z0, cfg["iterations"], icfg,
                               closed_loop=cfg["verdicts.closed_loop"])
    res.stack = stack
    verdicts = verdict_suite(stack, C, closed_loop_tol=tol)
    if not cfg["verdicts.bounds"]:
        verdicts = [v for v in verdicts if v.formula not in BOUND_FORMULAS]
    if cfg["verdicts.consistency"] and stack.records:
        rep = control_consistency_check(stack)
        verdicts.append(BoundVerdict(0, "control consistency", rep.tolerance, rep.discrepancy,
                                     rep.passed, "derivative form vs closed formula"))
    res.verdicts = verdicts
    res.tails = [limsup_estimate(r.e, stack.t, C.omega_beta) for r in stack.records]

    observed = stack.diverged is not None or any(
        v.formula == "tails non-decreasing" and v.passed for v in verdicts)
    if cfg["expect_divergence"]:
        if observed:
            res.messages.append("divergence observed, as expected")
        else:
            res.messages.append("divergence was expected but not observed")
            res.code = EXIT_FAIL
    elif stack.diverged is not None:
        res.messages.append(f"unexpected blow-up in iteration {stack.diverged[0]}: {stack.diverged[2]}")
        res.code = EXIT_BLOWUP
    elif not suite_passed(verdicts):
        res.messages.append("verdict failure")
        res.code = max(res.code, EXIT_FAIL)
    return res


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    _, ops = _setup(cfg)
    rep = verify_identities(ops, tol=args.tol if args.tol is not None else 1e-8)
    body = rep.to_csv()
    _check_columns(body)
    _write(args.out, "identities.csv", body)
    _say(args, rep.table())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_run(cfg: ExperimentConfig, args) -> int:
    res = execute_run(cfg, args.tol)
    out = args.out
    _write(out, "config.cfg", serialize(cfg))
    if res.stack is not None and res.stack.records:
        body = res.stack.to_csv()
        _check_columns(body)
        _write(out, "trace.csv", body)
    if res.constants is not None:
        _write(out, "constants.csv", res.constants.to_csv())
    _write(out, "verdicts.csv", verdicts_to_csv(res.verdicts))
    if res.identities is not None:
        _write(out, "identities.csv", res.identities.to_csv())
    _say(args, verdict_table(res.verdicts))
    for msg in res.messages:
        _say(args, msg)
    return res.code


def cmd_oracle(cfg: ExperimentConfig, args) -> int:
    try:
        plant = cfg.build_plant()
    except ValueError as exc:
        raise _ConfigProblem(str(exc)) from None
    if not plant.is_linear:
        raise _ConfigProblem("oracle requires a linear plant")
    exo = cfg.build_exosystem()
    if exo is None:
        raise _ConfigProblem("oracle requires signals.kind = exosystem")
    try:
        sol = solve_regulator(plant, exo)
    except RegulatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    tol = args.tol if args.tol is not None else RESIDUAL_TOL
    z0 = sol.Pi @ exo.w0 if cfg["init"] == "setpoint" else np.zeros(plant.n)
    omega = -spectral_abscissa(plant.A)
    T = cfg["integrator.T"] or max(20.0, 10.0 / omega)
    freq = slowest_frequency(cfg.build_signals())
    if freq and not cfg["integrator.T"]:
        T = max(T, 10 * np.pi / freq)
    icfg = IntegratorConfig(cfg["integrator.dt"], T, cfg["integrator.scheme"])
    traj, err = oracle_closed_loop(plant, exo, sol, z0, icfg)
    r = traj.y + err
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["t", "r", "y", "e"])
    for row in zip(traj.t, r, traj.y, err):
        wr.writerow([repr(float(v)) for v in row])
    _write(args.out, "regulator.csv", sol.to_csv())
    _write(args.out, "oracle_trace.csv", buf.getvalue())
    ok = max(sol.residual_state, sol.residual_output) < tol
    _say(args, f"Gamma = {np.array2string(sol.Gamma, precision=10)}")
    _say(args, f"residuals: state {sol.residual_state:.3e}, output {sol.residual_output:.3e} "
               f"(tol {tol:.1e}) {'pass' if ok else 'FAIL'}")
    _say(args, f"oracle tail error {limsup_estimate(err, traj.t, omega):.3e}")
    return EXIT_OK if ok else EXIT_FAIL


def _sweep_one(payload):
    text, key, value, tol = payload
    cfg = parse(text).with_value(key, value)
    try:
        res = execute_run(cfg, tol)
    except _ConfigProblem as exc:
        return value, EXIT_CONFIG, [], str(exc)
    return value, res.code, res.tails, "; ".join(res.messages)


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    key, values = cfg["sweep.key"], cfg["sweep.values"]
    if not key or not values:
        raise _ConfigProblem("sweep requires sweep.key and sweep.values")
    if key.startswith("sweep."):
        raise _ConfigProblem("sweep.key cannot name a sweep setting")
    conv = type(cfg[key])
    if conv not in (int, float):
        raise _ConfigProblem(f"sweep.key {key!r} is not numeric")
    text = serialize(cfg)
    payloads = [(text, key, conv(v), args.tol) for v in values]
    try:
        for p in payloads:  # validate every point before running any
            parse(text).with_value(key, p[2])
    except ConfigError as exc:
        raise _ConfigProblem(str(exc)) from None
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, payloads))
    else:
        rows = [_sweep_one(p) for p in payloads]
    n = cfg["iterations"]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow([key] + [f"tail_{j}" for j in range(n + 1)] + ["exit", "note"])
    for value, code, tails, note in rows:
        padded = [repr(float(x)) for x in tails] + ["nan"] * (n + 1 - len(tails))
        wr.writerow([repr(value)] + padded + [code, note])
        _say(args, f"{key}={value!r}: exit {code} tails {' '.join(f'{x:.3e}' for x in tails)}")
    body = buf.getvalue()
    _check_columns(body)
    _write(args.out, "sweep.csv", body)
    return max(code for _, code, _, _ in rows)


COMMANDS = {"verify": cmd_verify, "run": cmd_run, "oracle": cmd_oracle, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="betareg", description="Regularized tracking experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="config file path or bundled benchmark name")
        p.add_argument("--out", type=Path, default=Path("betareg-out"), help="output directory")
        p.add_argument("--tol", type=float, default=None, help="override the check tolerance")
        p.add_argument("--quiet", action="store_true")
        if name == "sweep":
            p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, _ConfigProblem) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
