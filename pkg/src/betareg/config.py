"""Flat ``key = value`` experiment configs with dotted section keys.

Example::

    # linear heat benchmark
    plant.recipe = heat
    plant.n = 50
    beta = 0.9
    signals.kind = direct
    signals.r.kind = harmonic
    signals.r.freq = 3.0

Lines starting with ``#`` are comments.  Every key has a declared type and
default; unknown keys are errors.  :func:`serialize` writes every key in
sorted order, so ``serialize(parse(x))`` is the normal form of ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .model import build_heat_plant, build_scalar_plant, rotation_exosystem
from .signals import SignalPair, constant, from_exosystem, harmonic, signal_sum, zero

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse",
    "serialize",
    "load",
    "bundled_benchmarks",
]


class ConfigError(ValueError):
    pass


def _floats(s):
    s = s.strip()
    if not s:
        return ()
    return tuple(float(x) for x in s.split(","))


def _bool(s):
    v = s.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    return str(v)


_SIGNAL_KEYS = {
    "kind": (str, "zero"),
    "offset": (float, 0.0),
    "amp": (float, 1.0),
    "freq": (float, 1.0),
    "phase": (float, 0.0),
    # kind = sum: offset plus one sinusoid per entry of the three lists
    "amps": (_floats, ()),
    "freqs": (_floats, ()),
    "phases": (_floats, ()),
    "order": (int, -1),  # highest declared derivative order, -1 for smooth
}

SCHEMA: Dict[str, tuple] = {
    "name": (str, "experiment"),
    "plant.recipe": (str, "heat"),
    "plant.n": (int, 50),
    "plant.nu": (float, 1.0),
    "plant.actuator": (_floats, (0.2, 0.4)),
    "plant.sensor": (_floats, (0.2, 0.4)),
    "plant.disturbance": (_floats, (0.6, 0.8)),
    "plant.weights": (str, "uniform"),
    "plant.a": (float, -1.0),
    "plant.b": (float, 1.0),
    "plant.c": (float, 1.0),
    "plant.b_d": (float, 0.0),
    "plant.nonlinearity": (str, "zero"),
    "plant.epsilon": (float, 0.0),
    "beta": (float, 0.9),
    "iterations": (int, 3),
    "init": (str, "zero"),
    "signals.kind": (str, ""),
    "exo.freqs": (_floats, ()),
    "exo.q": (_floats, ()),
    "exo.p": (_floats, ()),
    "exo.w0": (_floats, ()),
    "integrator.dt": (float, 1e-3),
    "integrator.T": (float, 0.0),  # 0 selects the default horizon
    "integrator.scheme": (str, "imex-cnab2"),
    "verdicts.identities": (_bool, True),
    "verdicts.bounds": (_bool, True),
    "verdicts.closed_loop": (_bool, True),
    "verdicts.consistency": (_bool, True),
    "expect_divergence": (_bool, False),
    "sweep.key": (str, ""),
    "sweep.values": (_floats, ()),
}
for _s in ("r", "d"):
    for _k, _v in _SIGNAL_KEYS.items():
        SCHEMA[f"signals.{_s}.{_k}"] = _v

_CHOICES = {
    "plant.recipe": ("heat", "scalar"),
    "plant.weights": ("uniform", "trapezoid"),
    "plant.nonlinearity": ("zero", "tanh", "cubic"),
    "init": ("zero", "setpoint"),
    "signals.kind": ("direct", "exosystem"),
    "signals.r.kind": ("zero", "constant", "harmonic", "sum"),
    "signals.d.kind": ("zero", "constant", "harmonic", "sum"),
    "integrator.scheme": ("imex-cnab2", "imex-euler", "dense-oracle"),
}


@dataclass
class ExperimentConfig:
    """Typed view over a flat key/value mapping (all keys always present)."""

    values: Dict[str, object] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def with_value(self, key: str, value) -> "ExperimentConfig":
        v = dict(self.values)
        v[key] = value
        cfg = ExperimentConfig(v)
        cfg.validate()
        return cfg

    def validate(self):
        v = self.values
        beta = v["beta"]
        if not (0.0 < beta <= 1.0):
            raise ConfigError("β must lie in (0,1]")
        if v["signals.kind"] == "":
            raise ConfigError("empty signal spec: set signals.kind")
        for key, options in _CHOICES.items():
            if v[key] not in options:
                raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {v[key]!r}")
        if v["signals.kind"] == "direct" and v["signals.r.kind"] == "zero" and v["signals.d.kind"] == "zero":
            raise ConfigError("empty signal spec: both r and d are zero")
        if v["signals.kind"] == "exosystem":
            nf = v["exo.freqs"]
            if not nf:
                raise ConfigError("empty signal spec: exo.freqs is empty")
            N = sum(1 if f == 0 else 2 for f in nf)
            for key in ("exo.q", "exo.p", "exo.w0"):
                if len(v[key]) != N:
                    raise ConfigError(f"{key} must have {N} entries")
        for w in ("r", "d"):
            if v["signals.kind"] == "direct" and v[f"signals.{w}.kind"] == "sum":
                n = len(v[f"signals.{w}.freqs"])
                if n == 0:
                    raise ConfigError(f"empty signal spec: signals.{w}.freqs is empty")
                for key in ("amps", "phases"):
                    got = len(v[f"signals.{w}.{key}"])
                    if got not in (0, n) or (key == "amps" and got != n):
                        raise ConfigError(f"signals.{w}.{key} must have {n} entries")
                if any(f < 0 for f in v[f"signals.{w}.freqs"]):
                    raise ConfigError(f"signals.{w}.freqs must be nonnegative")
            if v[f"signals.{w}.order"] < -1:
                raise ConfigError(f"signals.{w}.order must be -1 or a nonnegative integer")
        if v["iterations"] < 0:
            raise ConfigError("iterations must be nonnegative")
        if v["integrator.dt"] <= 0:
            raise ConfigError("integrator.dt must be positive")
        for key in ("plant.actuator", "plant.sensor", "plant.disturbance"):
            if len(v[key]) != 2:
                raise ConfigError(f"{key} must be a pair lo,hi")
        if v["plant.nonlinearity"] == "zero" and v["plant.epsilon"] != 0:
            raise ConfigError("plant.epsilon must be 0 for the zero nonlinearity")
        if v["sweep.key"] and v["sweep.key"] not in SCHEMA:
            raise ConfigError(f"sweep.key: unknown key {v['sweep.key']!r}")

    # builders -----------------------------------------------------------

    def build_plant(self):
        v = self.values
        if v["plant.recipe"] == "heat":
            return build_heat_plant(v["plant.n"], v["plant.nu"], tuple(v["plant.actuator"]),
                                    tuple(v["plant.sensor"]), tuple(v["plant.disturbance"]),
                                    v["plant.nonlinearity"], v["plant.epsilon"], v["plant.weights"])
        return build_scalar_plant(v["plant.a"], v["plant.b"], v["plant.c"], v["plant.b_d"],
                                  v["plant.nonlinearity"], v["plant.epsilon"])

    def build_exosystem(self):
        v = self.values
        if v["signals.kind"] != "exosystem":
            return None
        return rotation_exosystem(v["exo.freqs"], v["exo.q"], v["exo.p"], v["exo.w0"])

    def build_signals(self) -> SignalPair:
        exo = self.build_exosystem()
        if exo is not None:
            return SignalPair(*from_exosystem(exo))
        return SignalPair(self._direct("r"), self._direct("d"))

    def _direct(self, which):
        v = {k.rsplit(".", 1)[1]: x for k, x in self.values.items()
             if k.startswith(f"signals.{which}.")}
        order = None if v["order"] < 0 else v["order"]
        kind = v["kind"]
        if kind == "zero":
            return zero()
        if kind == "constant":
            return constant(v["offset"], order=order)
        if kind == "harmonic":
            return harmonic(v["offset"], v["amp"], v["freq"], v["phase"], order=order)
        phases = v["phases"] or (0.0,) * len(v["freqs"])
        out = constant(v["offset"], order=order)
        for a, f, ph in zip(v["amps"], v["freqs"], phases):
            out = signal_sum(out, harmonic(0.0, a, f, ph, order=order))
        return out


def _strip(line):
    i = line.find("#")
    return (line if i < 0 else line[:i]).strip()


def parse(text: str) -> ExperimentConfig:
    """Parse config text; raises :class:`ConfigError` on any problem."""
    values = {k: d for k, (_, d) in SCHEMA.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        conv = SCHEMA[key][0]
        try:
            parsed = conv(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        if isinstance(parsed, float) and not math.isfinite(parsed):
            raise ConfigError(f"line {lineno}: {key} must be finite")
        if isinstance(parsed, tuple) and not np.all(np.isfinite(parsed)):
            raise ConfigError(f"line {lineno}: {key} must be finite")
        values[key] = parsed
    cfg = ExperimentConfig(values)
    cfg.validate()
    return cfg


def serialize(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {_fmt(cfg.values[k])}\n" for k in sorted(SCHEMA))


def bundled_benchmarks() -> Dict[str, str]:
    """Names and texts of the configs shipped with the package."""
    root = resources.files("betareg") / "benchmarks"
    return {p.name[:-4]: p.read_text() for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".cfg")}


def load(ref: str) -> ExperimentConfig:
    """Load a config from a file path or a bundled benchmark name."""
    path = Path(ref)
    if path.is_file():
        return parse(path.read_text())
    bundled = bundled_benchmarks()
    if ref in bundled:
        return parse(bundled[ref])
    raise ConfigError(f"no config file or bundled benchmark named {ref!r}")
