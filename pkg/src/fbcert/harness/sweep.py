"""
Seeded trial orchestration, sweeps and CSV export.

Every trial draws its randomness from its own stream,
``numpy.random.default_rng(SeedSequence([seed, sweep_value, trial_index]))``.
``SeedSequence`` hashes the whole entropy tuple, so streams of different
trials are independent and do not depend on execution order. The price pool
is generated from ``SeedSequence([seed])``, a distinct entropy tuple.

Charging game trials subsample ``s`` prices uniformly without replacement
from the pool; the pool's empirical distribution plays the role of the true
price law. QP trials draw a fresh instance and ``s`` fresh perturbations
from the trial stream; the true operator is the noise-free ``q + P x``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import subprocess
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .. import __version__
from ..certificates import epsilon_zero_coco
from ..games.pev import (REFERENCE_CONSTANTS, PevGame, alg3_run, epsilon_sne_certificate,
                         load_game, make_pev_game, pev_constants, pev_kkt_residual,
                         reference_sne)
from ..games.qp import QpOracle, qp_bound_m, qp_generate, qp_reference, qp_samples
from ..operators import OperatorConstants, normal_cone_distance
from ..splitting import (Dataset, DivergenceError, analytic_loss_bound, empirical_risk,
                         fb_run_data)
from .config import ExperimentConfig
from .data import load_prices, synth_prices
from .stats import BoxStats, box_stats

__all__ = [
    "CSV_COLUMNS",
    "SUMMARY_COLUMNS",
    "TrialRecord",
    "SweepResult",
    "trial_rng",
    "PevContext",
    "pev_context",
    "run_pev_trial",
    "run_qp_trial",
    "run_sweep",
    "write_outputs",
    "summarize_table2",
    "format_table2",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("trial_index", "s", "k", "relative_error", "epsilon_relative",
               "empirical_risk", "runtime_ms")
SUMMARY_COLUMNS = ("sweep_value", "trials", "failed", "median", "q1", "q3",
                   "whisker_low", "whisker_high", "outliers", "mean_relative_error",
                   "mean_epsilon", "mean_epsilon_relative", "sound_fraction")


@dataclass
class TrialRecord:
    """Outcome of one trial.

    ``epsilon`` is the certified radius, ``truth_residual`` the normal-cone
    distance of the output under the true operator (the quantity the
    certificate bounds). Failed trials carry ``nan`` metrics and the error.
    """

    trial_index: int
    s: int
    k: int
    relative_error: float
    epsilon_relative: float
    empirical_risk: float
    runtime_ms: float
    epsilon: float = math.nan
    truth_residual: float = math.nan
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def sound(self) -> bool:
        return not self.failed and self.truth_residual <= self.epsilon

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass
class SweepResult:
    config: ExperimentConfig
    records: Dict[int, List[TrialRecord]]
    stats: Dict[int, Optional[BoxStats]]
    meta: dict = field(default_factory=dict)

    def all_records(self) -> List[TrialRecord]:
        return [r for v in self.records for r in self.records[v]]


def trial_rng(seed: int, sweep_value: int, trial_index: int) -> np.random.Generator:
    """Independent stream of one trial."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(sweep_value),
                                                         int(trial_index)]))


def _failed(trial_index, s, k, exc) -> TrialRecord:
    return TrialRecord(trial_index, s, k, math.nan, math.nan, math.nan, math.nan,
                       error=f"{type(exc).__name__}: {exc}")


# charging game


@dataclass(frozen=True)
class PevContext:
    """Quantities shared by all trials of a charging game sweep."""

    game: PevGame
    pool: Dataset
    reference: np.ndarray
    constants: OperatorConstants
    loss_bound: float
    pool_mean: np.ndarray


def pev_context(config: ExperimentConfig) -> PevContext:
    if config.data_path:
        pool = load_prices(config.data_path, config.horizon)
    else:
        pool = synth_prices(config.pool_size, config.horizon,
                            seed=np.random.SeedSequence([int(config.seed)]))
    if config.instance_path:
        game = load_game(config.instance_path)
    else:
        game = make_pev_game(config.game_seed, n_agents=config.n_agents, horizon=config.horizon)
    if pool.dim != game.horizon:
        raise ValueError(f"prices have {pool.dim} slots, game horizon is {game.horizon}")
    if max(config.s_values) > len(pool):
        raise ValueError(f"s={max(config.s_values)} exceeds the pool of {len(pool)} samples")
    if config.constants == "table":
        constants = REFERENCE_CONSTANTS
        lbar = constants.loss_bound
    else:
        constants = pev_constants(game, pool)
        lbar = analytic_loss_bound(game.diameter(), config.gamma, constants.bound_m)
        constants = OperatorConstants(constants.mu, constants.kappa, constants.bound_m,
                                      loss_bound=lbar)
    if not config.gamma < constants.step_limit():
        raise ValueError(f"gamma={config.gamma} is not below 2 mu / kappa^2 = "
                         f"{constants.step_limit():.6g} for these constants")
    x_ref = reference_sne(game, pool)
    return PevContext(game, pool, x_ref, constants, lbar, pool.mean())


def run_pev_trial(ctx: PevContext, config: ExperimentConfig, s: int, k: int,
                  trial_index: int, sweep_value: int) -> TrialRecord:
    rng = trial_rng(config.seed, sweep_value, trial_index)
    idx = rng.choice(len(ctx.pool), size=s, replace=False)
    data = ctx.pool.subset(idx)
    t0 = time.perf_counter()
    try:
        h, _ = alg3_run(ctx.game, data, config.gamma, k, record=False)
    except DivergenceError as exc:
        log.warning("trial %d (s=%d, k=%d) diverged: %s", trial_index, s, k, exc)
        return _failed(trial_index, s, k, exc)
    ref_norm = float(np.linalg.norm(ctx.reference))
    cert = epsilon_sne_certificate(h, ctx.game, data, config.gamma, config.delta,
                                   ctx.constants, k=k, loss_bound=ctx.loss_bound,
                                   reference_norm=ref_norm if ref_norm > 0 else None)
    runtime = (time.perf_counter() - t0) * 1e3 if config.record_runtime else 0.0
    gap = float(np.linalg.norm(h.x - ctx.reference))
    return TrialRecord(
        trial_index, s, k,
        relative_error=gap / ref_norm if ref_norm > 0 else gap,
        epsilon_relative=cert.epsilon_relative if ref_norm > 0 else cert.epsilon,
        empirical_risk=cert.empirical_term, runtime_ms=runtime, epsilon=cert.epsilon,
        truth_residual=pev_kkt_residual(h.x, ctx.game, ctx.pool_mean))


# box-constrained QP


def run_qp_trial(config: ExperimentConfig, s: int, k: int, trial_index: int,
                 sweep_value: int) -> TrialRecord:
    rng = trial_rng(config.seed, sweep_value, trial_index)
    inst = qp_generate(config.qp_dim, rng)
    data = qp_samples(config.qp_dim, s, rng)
    oracle = QpOracle(inst)
    t0 = time.perf_counter()
    try:
        h, _ = fb_run_data(np.zeros(inst.dim), data, oracle, inst.resolvent(),
                           config.gamma, k, record=False)
    except DivergenceError as exc:
        log.warning("trial %d (s=%d, k=%d) diverged: %s", trial_index, s, k, exc)
        return _failed(trial_index, s, k, exc)
    lam = inst.lambda_max()
    m = qp_bound_m(inst, data)
    lbar = analytic_loss_bound(inst.box.diameter(), config.gamma, m)
    r_hat = empirical_risk(h, data, oracle, config.gamma)
    x_ref = qp_reference(inst)
    ref_norm = float(np.linalg.norm(x_ref))
    # the bound on the oracle is taken over the drawn samples, hence empirical
    cert = epsilon_zero_coco(r_hat, config.gamma, m, lbar, s, k, config.delta,
                             theta=1.0 / lam if lam > 0 else None,
                             loss_bound_provenance="empirical",
                             reference_norm=ref_norm if ref_norm > 0 else None)
    runtime = (time.perf_counter() - t0) * 1e3 if config.record_runtime else 0.0
    gap = float(np.linalg.norm(h.x - x_ref))
    truth = inst.q + inst.p_bar @ h.x
    return TrialRecord(
        trial_index, s, k,
        relative_error=gap / ref_norm if ref_norm > 0 else gap,
        epsilon_relative=cert.epsilon_relative if ref_norm > 0 else cert.epsilon,
        empirical_risk=r_hat, runtime_ms=runtime, epsilon=cert.epsilon,
        truth_residual=normal_cone_distance(h.x, truth, inst.box))


# sweeps


def _version() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def run_sweep(config: ExperimentConfig, write: bool = True,
              trial_indices: Optional[Sequence[int]] = None) -> SweepResult:
    """Run every trial of every sweep value of ``config``.

    Records are grouped by sweep value and sorted by trial index, so the
    result does not depend on ``trial_indices``' order. Diverged trials are
    kept as failed records and left out of the statistics. With ``write``
    the CSVs and the run manifest go to ``config.output_dir``.
    """
    start = time.perf_counter()
    order = list(range(config.trials)) if trial_indices is None else list(trial_indices)
    ctx = pev_context(config) if config.game == "pev" else None
    records: Dict[int, List[TrialRecord]] = {}
    for value in config.sweep_values:
        s = value if config.sweep_axis == "s" else config.s_values[0]
        k = value if config.sweep_axis == "k" else config.k_values[0]
        recs = []
        for t in order:
            if ctx is not None:
                recs.append(run_pev_trial(ctx, config, s, k, t, value))
            else:
                recs.append(run_qp_trial(config, s, k, t, value))
        records[value] = sorted(recs, key=lambda r: r.trial_index)
    stats = {}
    for value, recs in records.items():
        ok = [r.relative_error for r in recs if not r.failed]
        stats[value] = box_stats(ok) if ok else None
    meta = {
        "subsampling": "uniform without replacement" if ctx is not None else "fresh draws",
        "quantiles": "linear interpolation (type 7)",
        "trial_streams": "SeedSequence([seed, sweep_value, trial_index])",
    }
    if ctx is not None:
        meta.update(pool_size=len(ctx.pool), reference_norm=float(np.linalg.norm(ctx.reference)),
                    constants=asdict(ctx.constants))
    result = SweepResult(config, records, stats, meta)
    if write:
        write_outputs(result, wall_time=time.perf_counter() - start)
    return result


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_outputs(result: SweepResult, wall_time: Optional[float] = None) -> List[Path]:
    """Per-value CSVs, a summary CSV and a JSON manifest; returns the paths written."""
    cfg = result.config
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for value, recs in result.records.items():
        p = out / f"{cfg.experiment}_{cfg.sweep_axis}{value}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in recs:
                w.writerow([_fmt(v) for v in r.row()])
        paths.append(p)
    p = out / f"{cfg.experiment}_summary.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for value, recs in result.records.items():
            ok = [r for r in recs if not r.failed]
            st = result.stats[value]
            box = ([st.median, st.q1, st.q3, st.whisker_low, st.whisker_high, len(st.outliers)]
                   if st else [math.nan] * 5 + [0])
            mean = (lambda a: float(np.mean(a)) if a else math.nan)
            w.writerow([_fmt(v) for v in [
                value, len(recs), len(recs) - len(ok), *box,
                mean([r.relative_error for r in ok]), mean([r.epsilon for r in ok]),
                mean([r.epsilon_relative for r in ok]),
                mean([float(r.sound) for r in ok])]])
    paths.append(p)
    p = out / f"{cfg.experiment}_manifest.json"
    failed = [{"sweep_value": v, "trial_index": r.trial_index, "error": r.error}
              for v, recs in result.records.items() for r in recs if r.failed]
    doc = {"config": cfg.to_dict(), "version": _version(), "wall_time_s": wall_time,
           "failed_trials": failed, **result.meta}
    p.write_text(json.dumps(doc, indent=2) + "\n")
    paths.append(p)
    return paths


def summarize_table2(records: Sequence[TrialRecord],
                     k_values: Optional[Sequence[int]] = None) -> dict:
    """Mean relative error (in units of 1e-3) and mean epsilon per iteration count.

    Parameters
    ----------
    records : sequence of TrialRecord
        Failed records are ignored.
    k_values : sequence of int, optional
        Required columns; defaults to the iteration counts present.

    Returns
    -------
    dict
        ``{"k": [...], "avg_dx_e3": [...], "avg_eps": [...]}``.

    Raises
    ------
    ValueError
        If a requested ``k`` has no successful record.
    """
    by_k: Dict[int, List[TrialRecord]] = {}
    for r in records:
        if not r.failed:
            by_k.setdefault(int(r.k), []).append(r)
    ks = sorted(by_k) if k_values is None else [int(k) for k in k_values]
    missing = [k for k in ks if k not in by_k]
    if missing or not ks:
        raise ValueError(f"no records for k = {missing}")
    return {
        "k": ks,
        "avg_dx_e3": [1e3 * float(np.mean([r.relative_error for r in by_k[k]])) for k in ks],
        "avg_eps": [float(np.mean([r.epsilon for r in by_k[k]])) for k in ks],
    }


def format_table2(table: dict) -> str:
    """Plain-text rendering of :func:`summarize_table2` output."""
    head = ["K"] + [str(k) for k in table["k"]]
    rows = [["avg(dx) x1e-3"] + [f"{v:.4g}" for v in table["avg_dx_e3"]],
            ["avg(eps)"] + [f"{v:.4g}" for v in table["avg_eps"]]]
    widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [head] + rows)
