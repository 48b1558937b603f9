"""
Experiment configuration.

A configuration file is a JSON object whose keys are the fields of
:class:`ExperimentConfig`; missing keys take the per-experiment defaults in
:data:`DEFAULTS`, unknown keys are an error.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional

__all__ = ["EXPERIMENTS", "DEFAULTS", "ExperimentConfig", "load_config", "make_config"]

EXPERIMENTS = ("pev-sweep-s", "pev-sweep-k", "qp-sweep-k", "certify")

_PEV = dict(delta=0.05, gamma=0.02, trials=50)
DEFAULTS = {
    "pev-sweep-s": dict(_PEV, s_values=[100, 500, 1000, 2000, 3000], k_values=[1000]),
    "pev-sweep-k": dict(_PEV, s_values=[3000], k_values=[100, 500, 1000, 5000, 10000]),
    "qp-sweep-k": dict(delta=0.05, gamma=0.01, trials=50, s_values=[10000],
                       k_values=[100, 1000, 10000]),
    "certify": dict(_PEV, trials=1, s_values=[3000], k_values=[1000]),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines the output of a sweep.

    Attributes
    ----------
    experiment : str
        One of :data:`EXPERIMENTS`.
    s_values, k_values : list of int
        Dataset sizes and iteration counts. The swept axis is ``s`` for
        ``pev-sweep-s`` and ``k`` for the ``*-sweep-k`` experiments; the
        other list must hold a single value.
    trials : int
        Trials per sweep value.
    delta : float
        Confidence parameter of the certificates.
    gamma : float
        Step size.
    seed : int
        Master seed in ``[0, 2**64)``.
    data_path : str or None
        Price CSV; a synthetic pool is generated when absent.
    output_dir : str
    pool_size : int
        Size of the synthetic price pool.
    game_seed : int
        Seed of the random charging game, ignored with ``instance_path``.
    instance_path : str or None
        Game instance file written by :func:`fbcert.games.pev.save_game`.
    n_agents, horizon : int
        Size of the random charging game.
    qp_dim : int
        Dimension of the random QP instances.
    constants : str
        ``"analytic"`` (computed for the instance) or ``"table"`` (the
        reference constants of the 20-vehicle instance).
    record_runtime : bool
        Write wall-clock trial times into the CSVs. Off by default because
        timings break byte-reproducibility; they are then written as 0.
    """

    experiment: str
    s_values: List[int] = field(default_factory=list)
    k_values: List[int] = field(default_factory=list)
    trials: int = 50
    delta: float = 0.05
    gamma: float = 0.02
    seed: int = 0
    data_path: Optional[str] = None
    output_dir: str = "results"
    pool_size: int = 3649
    game_seed: int = 0
    instance_path: Optional[str] = None
    n_agents: int = 20
    horizon: int = 14
    qp_dim: int = 10
    constants: str = "analytic"
    record_runtime: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        object.__setattr__(self, "s_values", [int(v) for v in self.s_values])
        object.__setattr__(self, "k_values", [int(v) for v in self.k_values])
        if not self.s_values or not self.k_values:
            raise ValueError("s_values and k_values must be nonempty")
        if min(self.s_values) < 1 or min(self.k_values) < 1:
            raise ValueError("s and k values must be >= 1")
        if self.experiment == "pev-sweep-s" and len(self.k_values) != 1:
            raise ValueError("pev-sweep-s takes a single k value")
        if self.experiment in ("pev-sweep-k", "qp-sweep-k") and len(self.s_values) != 1:
            raise ValueError(f"{self.experiment} takes a single s value")
        if self.experiment == "certify" and (len(self.s_values) != 1 or len(self.k_values) != 1):
            raise ValueError("certify takes a single s and a single k value")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.constants not in ("analytic", "table"):
            raise ValueError("constants must be 'analytic' or 'table'")
        if min(self.pool_size, self.n_agents, self.horizon, self.qp_dim) < 1:
            raise ValueError("sizes must be >= 1")

    @property
    def sweep_axis(self) -> str:
        return "s" if self.experiment in ("pev-sweep-s", "certify") else "k"

    @property
    def sweep_values(self) -> List[int]:
        return self.s_values if self.sweep_axis == "s" else self.k_values

    @property
    def game(self) -> str:
        return "qp" if self.experiment == "qp-sweep-k" else "pev"

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Copy with the non-``None`` keyword values replaced."""
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def make_config(experiment: str, **kw) -> ExperimentConfig:
    """Config for ``experiment`` with its defaults, updated by ``kw``."""
    if experiment not in DEFAULTS:
        raise ValueError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    known = {f.name for f in fields(ExperimentConfig)}
    bad = set(kw) - known
    if bad:
        raise ValueError(f"unknown config keys: {sorted(bad)}")
    values = dict(DEFAULTS[experiment])
    values.update({k: v for k, v in kw.items() if v is not None})
    values["experiment"] = experiment
    return ExperimentConfig(**values)


def load_config(path, experiment: Optional[str] = None) -> ExperimentConfig:
    """Read a JSON config file.

    ``experiment`` fills in the key when the file does not set it and must
    agree with it otherwise.
    """
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    exp = doc.pop("experiment", experiment)
    if exp is None:
        raise ValueError(f"{path}: no experiment given")
    if experiment is not None and exp != experiment:
        raise ValueError(f"{path}: config is for {exp!r}, not {experiment!r}")
    return make_config(exp, **doc)
