"""Declarative experiment configuration (JSON) and its schema."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..errors import ConfigurationError, SchemaError

MODES = ("glauber", "phi42", "oracle", "compare", "kernel-scan", "besov-corpus", "ode-check")

# key: (default, description)
SCHEMA = {
    "mode": ("glauber", f"one of {', '.join(MODES)}"),
    "gammas": ([0.25], "Kac ranges; each runs on Lambda_N with N = round(gamma^-2)"),
    "A": (0.0, "mass coupling in beta = 1 + gamma^2 (C_gamma + A) and a_1 = A"),
    "b": (0.0, "external field (Glauber and oracle)"),
    "profile": ("bump", "kernel profile: bump, moment4 or flat"),
    "periodize": ("auto", "sum kernel over periodic images: true, false or auto (when 3/gamma >= N)"),
    "seed": (0, "root seed; replicas use SeedSequence(seed).spawn"),
    "replicas": (1, "independent replicas per gamma"),
    "T_burn": (1.0, "macroscopic burn-in time"),
    "T_sample": (10.0, "macroscopic sampling time after burn-in"),
    "cadence": (0.1, "macroscopic time between recorded samples"),
    "observables": (["lp2", "lp4", "pair:cos10"],
                    "lpP (||X||_P^P), pair:<test function>, magnetization"),
    "M": (None, "Galerkin half-size for phi42; defaults to N of the first gamma"),
    "dt": (0.005, "phi42 time step"),
    "scheme": ("euler", "phi42 integrator: euler or etd2"),
    "restart_interval": (10.0, "phi42 local time between restarts"),
    "batch": (1, "phi42 replicas advanced together per worker"),
    "N": (2, "oracle lattice half-size"),
    "beta": (0.9, "oracle inverse temperature"),
    "b_grid": ([0.0, 0.25, 0.5, 1.0], "oracle external fields"),
    "oracle_gamma": (0.5, "oracle kernel range (periodized)"),
    "test_function": ("cos10", "compare: test function of the pairing"),
    "n_samples": (500, "compare: samples per model"),
    "nu": (0.1, "besov-corpus: regularity"),
    "corpus_size": (50, "besov-corpus: fields per kind"),
    "ode_draws": (100, "ode-check: random parameter draws"),
}


@dataclass
class ExperimentConfig:
    mode: str = "glauber"
    gammas: list = field(default_factory=lambda: [0.25])
    A: float = 0.0
    b: float = 0.0
    profile: str = "bump"
    periodize: object = "auto"
    seed: int = 0
    replicas: int = 1
    T_burn: float = 1.0
    T_sample: float = 10.0
    cadence: float = 0.1
    observables: list = field(default_factory=lambda: ["lp2", "lp4", "pair:cos10"])
    M: int | None = None
    dt: float = 0.005
    scheme: str = "euler"
    restart_interval: float = 10.0
    batch: int = 1
    N: int = 2
    beta: float = 0.9
    b_grid: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0])
    oracle_gamma: float = 0.5
    test_function: str = "cos10"
    n_samples: int = 500
    nu: float = 0.1
    corpus_size: int = 50
    ode_draws: int = 100

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.gammas = [float(g) for g in self.gammas]
        for g in self.gammas:
            if not 0 < g < 1:
                raise ConfigurationError(f"gamma must lie in (0, 1), got {g}")
        if self.replicas < 1 or self.batch < 1:
            raise ConfigurationError("replicas and batch must be positive")
        if self.cadence <= 0 or self.T_burn < 0 or self.T_sample < 0:
            raise ConfigurationError("need cadence > 0 and nonnegative T_burn, T_sample")
        if self.periodize not in (True, False, "auto"):
            raise ConfigurationError("periodize must be true, false or \"auto\"")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise SchemaError(key)
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def lattice_size(gamma):
    """``N = round(gamma^-2)``; ``eps = 1/N`` differs from ``gamma^2`` by the rounding."""
    return max(1, int(round(gamma ** -2)))


def scaling_record(gamma):
    N = lattice_size(gamma)
    return {"gamma": gamma, "N": N, "epsilon": 1.0 / N, "gamma_squared": gamma * gamma,
            "epsilon_mismatch": 1.0 / N - gamma * gamma}


def wants_periodize(setting, gamma, N):
    if setting == "auto":
        return 3.0 / gamma >= N
    return bool(setting)


def schema_markdown():
    """The configuration schema as a Markdown table."""
    lines = ["| key | default | meaning |", "|---|---|---|"]
    for k, (default, doc) in SCHEMA.items():
        d = json.dumps(default) if not (isinstance(default, float) and math.isinf(default)) else "inf"
        lines.append(f"| `{k}` | `{d}` | {doc} |")
    return "\n".join(lines)
