"""
Forward-backward iterations driven by a finite dataset.

An oracle is any callable ``oracle(x, xi)`` returning a noisy evaluation of
the forward operator at ``x``. It is called with ``xi`` either a single
sample of shape ``(d,)`` or a batch of shape ``(m, d)``; in the batch case
it must return an array broadcastable to ``(m, n)``. Plain numpy
expressions such as ``lambda x, xi: 2 * x + xi`` satisfy this.

An oracle may also expose ``averager(samples)``, returning a callable
``x -> (1/s) sum_i O(x, xi_i)`` for a fixed batch. Oracles that are affine
in the sample use it to evaluate the average in ``O(n)`` per step; the
result must agree with the batched mean up to rounding.

A resolvent is any callable mapping ``y`` to ``J(y)``, typically a
projection from :mod:`fbcert.operators`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

__all__ = [
    "DivergenceError",
    "Dataset",
    "Hypothesis",
    "Trajectory",
    "approx_operator",
    "fb_step_exact",
    "fb_run_data",
    "losses",
    "loss",
    "empirical_risk",
    "estimate_loss_bound",
    "analytic_loss_bound",
    "DIVERGENCE_LIMIT",
    "MAX_STORED",
]

#: iterates with a larger norm abort the run
DIVERGENCE_LIMIT = 1e12
#: trajectories longer than this are thinned
MAX_STORED = 10_000


class DivergenceError(RuntimeError):
    """Raised when an iterate becomes non-finite or exceeds the norm limit."""

    def __init__(self, iteration: int, norm: float):
        super().__init__(f"iterate diverged at iteration {iteration} (norm {norm:.3e})")
        self.iteration = iteration
        self.norm = norm


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of ``s`` samples of dimension ``d``.

    One-dimensional input is read as ``s`` scalar samples.
    """

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("a dataset needs at least one sample of shape (d,)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("dataset contains non-finite values")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def replace(self, i: int, xi) -> "Dataset":
        """Copy of the dataset with sample ``i`` replaced by ``xi``."""
        arr = self.samples.copy()
        arr[i] = xi
        return Dataset(arr)

    def permuted(self, perm) -> "Dataset":
        return Dataset(self.samples[np.asarray(perm)])

    def subset(self, idx) -> "Dataset":
        return Dataset(self.samples[np.asarray(idx)])

    def mean(self) -> np.ndarray:
        return _mean_rows(self.samples)


@dataclass(frozen=True)
class Hypothesis:
    """Output pair of one forward-backward step: ``y`` before and ``x`` after the resolvent."""

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        if np.shape(self.y) != np.shape(self.x):
            raise ValueError("y and x must have the same dimension")

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.y, self.x])


@dataclass
class Trajectory:
    """Hypotheses recorded along a run.

    Row ``j`` of ``ys``/``xs`` is the hypothesis after step ``steps[j]``
    (1-based). Every step is kept up to :data:`MAX_STORED` steps; longer
    runs keep every ``stride``-th step plus the last one.
    """

    ys: np.ndarray
    xs: np.ndarray
    steps: np.ndarray
    iterations: int
    gamma: float
    stride: int = 1

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def hypotheses(self) -> List[Hypothesis]:
        return [Hypothesis(y, x) for y, x in zip(self.ys, self.xs)]

    @property
    def final(self) -> Hypothesis:
        return Hypothesis(self.ys[-1], self.xs[-1])


def _mean_rows(values: np.ndarray) -> np.ndarray:
    # reduce along a contiguous axis so numpy uses pairwise summation
    cols = np.ascontiguousarray(values.T)
    return cols.sum(axis=1) / values.shape[0]


def _evaluate(oracle: Callable, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
    out = np.asarray(oracle(x, samples), dtype=float)
    return np.broadcast_to(out, (samples.shape[0], x.size))


def approx_operator(x, oracle: Callable, dataset: Dataset) -> np.ndarray:
    """Sample-average approximation ``(1/s) sum_i O(x, xi_i)``.

    Always evaluates the oracle on the whole batch, ignoring any
    ``averager`` shortcut.
    """
    x = np.asarray(x, dtype=float)
    return _mean_rows(_evaluate(oracle, x, dataset.samples))


def _averager(oracle: Callable, samples: np.ndarray, use_shortcut: bool) -> Callable:
    make = getattr(oracle, "averager", None) if use_shortcut else None
    if make is not None:
        return make(samples)
    return lambda x: _mean_rows(_evaluate(oracle, x, samples))


def fb_step_exact(x, b_op: Callable, resolvent: Callable, gamma: float) -> Hypothesis:
    """One forward-backward step ``y = x - gamma B(x)``, ``x+ = J(y)``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = np.asarray(x, dtype=float)
    y = x - gamma * np.asarray(b_op(x), dtype=float)
    return Hypothesis(y=y, x=np.asarray(resolvent(y), dtype=float))


def fb_run_data(x0, dataset: Dataset, oracle: Callable, resolvent: Callable,
                gamma: float, K: int, record: bool = True, use_shortcut: bool = True
                ) -> Tuple[Hypothesis, Optional[Trajectory]]:
    """Run ``K`` data-driven forward-backward steps from ``x0``.

    Each step uses the sample average of the oracle over the whole dataset
    as forward operator. The returned hypothesis is the ``(y, x)`` pair of
    the last step; the loss and certificates are evaluated on it.

    Parameters
    ----------
    x0 : array_like
        Initial point.
    dataset : Dataset
    oracle : callable
        Batched oracle, see the module docstring.
    resolvent : callable
    gamma : float
        Step size.
    K : int
        Number of steps, at least 1.
    record : bool
        Whether to keep the trajectory (``None`` is returned otherwise).
    use_shortcut : bool
        Use the oracle's ``averager`` when it has one.

    Raises
    ------
    DivergenceError
        If an iterate is non-finite or its norm exceeds :data:`DIVERGENCE_LIMIT`.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = np.array(x0, dtype=float)
    average = _averager(oracle, dataset.samples, use_shortcut)
    stride = max(1, math.ceil(K / MAX_STORED))
    ys, xs, steps = [], [], []
    y = x
    for k in range(1, K + 1):
        y = x - gamma * average(x)
        x = np.asarray(resolvent(y), dtype=float)
        norm = max(np.linalg.norm(y), np.linalg.norm(x))
        if not np.isfinite(norm) or norm > DIVERGENCE_LIMIT:
            raise DivergenceError(k, norm)
        if record and (k % stride == 0 or k == K):
            ys.append(y)
            xs.append(x)
            steps.append(k)
    h = Hypothesis(y=y, x=x)
    if not record:
        return h, None
    traj = Trajectory(ys=np.array(ys), xs=np.array(xs), steps=np.array(steps),
                      iterations=K, gamma=gamma, stride=stride)
    return h, traj


def losses(h: Hypothesis, samples, oracle: Callable, gamma: float) -> np.ndarray:
    """Vector of losses ``||x - gamma O(x, xi) - y||`` over a batch of samples."""
    samples = np.asarray(getattr(samples, "samples", samples), dtype=float)
    if samples.ndim == 1:
        samples = samples[None, :]
    x = np.asarray(h.x, dtype=float)
    r = (x - np.asarray(h.y, dtype=float)) - gamma * _evaluate(oracle, x, samples)
    return np.sqrt(np.einsum("ij,ij->i", r, r))


def loss(h: Hypothesis, xi, oracle: Callable, gamma: float) -> float:
    """Loss of hypothesis ``h`` on one sample: ``||x - gamma O(x, xi) - y||``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = np.asarray(h.x, dtype=float)
    r = x - gamma * np.asarray(oracle(x, np.asarray(xi, dtype=float)), dtype=float) - h.y
    return float(np.linalg.norm(r))


def empirical_risk(h: Hypothesis, dataset: Dataset, oracle: Callable, gamma: float) -> float:
    """Average loss of ``h`` over the dataset."""
    return float(np.mean(losses(h, dataset.samples, oracle, gamma)))


def estimate_loss_bound(trajectory: Trajectory, dataset: Dataset, oracle: Callable,
                        gamma: float, margin: float = 0.0,
                        max_hypotheses: Optional[int] = None) -> float:
    """Largest loss over recorded hypotheses and samples, times ``1 + margin``.

    This is an empirical surrogate for an analytic loss bound; certificates
    built on it should be marked as such. With ``max_hypotheses`` only that
    many evenly spaced hypotheses (always including the last) are scanned.
    """
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    rows = np.arange(len(trajectory))
    if max_hypotheses is not None and len(rows) > max_hypotheses:
        rows = np.unique(np.linspace(0, len(rows) - 1, max(1, max_hypotheses)).round().astype(int))
    worst = 0.0
    for y, x in zip(trajectory.ys[rows], trajectory.xs[rows]):
        worst = max(worst, float(losses(Hypothesis(y, x), dataset.samples, oracle, gamma).max()))
    return worst * (1.0 + margin)


def analytic_loss_bound(diameter: float, gamma: float, bound_m: float) -> float:
    """Uniform loss bound ``diameter + 2 gamma M`` for outputs of a run.

    A hypothesis pairs ``y = x_prev - gamma Obar(x_prev)`` with
    ``x = J(y)``, both iterates in the resolvent's range, so
    ``||x - gamma O(x, xi) - y|| <= ||x - x_prev|| + 2 gamma M``.
    Valid for runs of at least two steps, or from a start inside the set.
    """
    if diameter < 0 or not gamma > 0 or bound_m < 0:
        raise ValueError("diameter and bound_m must be nonnegative and gamma positive")
    return float(diameter + 2.0 * gamma * bound_m)
