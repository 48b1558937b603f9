"""
Operator constants, polyhedral sets, projections and normal cones.

The sets here are the only resolvents the library needs: a box, and a box
intersected with a lower bound on the coordinate sum (an EV charging set).
Projections are exact; normal cones are evaluated through their active
generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import nnls

__all__ = [
    "OperatorConstants",
    "BoxSet",
    "BoxHalfspaceSet",
    "active_tolerance",
    "contraction_factor",
    "project_box",
    "project_box_halfspace",
    "project",
    "normal_cone_distance",
    "estimate_constants",
]


@dataclass(frozen=True)
class OperatorConstants:
    """Monotonicity and boundedness constants of an operator/oracle.

    Parameters
    ----------
    mu : float
        Strong monotonicity modulus (0 when only cocoercivity is known).
    kappa : float
        Lipschitz constant.
    bound_m : float
        Upper bound on the oracle norm.
    theta : float, optional
        Cocoercivity modulus.
    loss_bound : float
        Upper bound on the loss, used by the concentration term.
    """

    mu: float
    kappa: float
    bound_m: float
    theta: Optional[float] = None
    loss_bound: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.bound_m > 0:
            raise ValueError(f"bound_m must be positive, got {self.bound_m}")
        if self.mu < 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if self.mu > self.kappa:
            raise ValueError(f"mu={self.mu} exceeds kappa={self.kappa}")
        if self.theta is not None and not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.loss_bound < 0:
            raise ValueError(f"loss_bound must be nonnegative, got {self.loss_bound}")

    def step_limit(self) -> float:
        """Supremum of admissible step sizes in the strongly monotone regime."""
        if self.mu <= 0:
            raise ValueError("step_limit requires mu > 0")
        return 2.0 * self.mu / self.kappa**2


@dataclass(frozen=True)
class BoxSet:
    """The box ``{x : lower <= x <= upper}``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D with equal length")
        if np.any(lower > upper):
            raise ValueError("infeasible box: lower > upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class BoxHalfspaceSet:
    """The set ``{x : lower <= x <= upper, sum(x) >= zeta}``."""

    lower: np.ndarray
    upper: np.ndarray
    zeta: float = 0.0

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D with equal length")
        if np.any(lower > upper):
            raise ValueError("infeasible set: lower > upper")
        if self.zeta < 0:
            raise ValueError(f"zeta must be nonnegative, got {self.zeta}")
        if upper.sum() < self.zeta:
            raise ValueError(
                f"infeasible set: sum(upper)={upper.sum()} < zeta={self.zeta}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "zeta", float(self.zeta))

    @property
    def dim(self) -> int:
        return self.lower.size

    def diameter(self) -> float:
        """Diameter of the enclosing box, an upper bound on the set's."""
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        in_box = np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol)
        return bool(in_box and x.sum() >= self.zeta - tol * x.size)


ConvexSet = Union[BoxSet, BoxHalfspaceSet]


def active_tolerance(s: ConvexSet) -> float:
    """Tolerance used to decide whether a face of ``s`` is active."""
    return 1e-9 * (1.0 + float(np.max(np.abs(s.upper))))


def contraction_factor(gamma: float, constants: OperatorConstants) -> float:
    r"""Lipschitz modulus of ``x -> x - gamma * O(x)``.

    For a ``mu``-strongly monotone, ``kappa``-Lipschitz map,

    .. math:: \tau = \sqrt{1 - \gamma (2\mu - \gamma\kappa^2)}

    which lies in ``[0, 1)`` exactly when ``0 < gamma < 2 mu / kappa**2``.
    """
    mu, kappa = constants.mu, constants.kappa
    if mu <= 0:
        raise ValueError("contraction_factor requires a strongly monotone operator (mu > 0)")
    limit = 2.0 * mu / kappa**2
    if not 0 < gamma < limit:
        raise ValueError(f"gamma={gamma} outside the admissible interval (0, {limit})")
    tau_sq = 1.0 - gamma * (2.0 * mu - gamma * kappa**2)
    # tau_sq is >= 1 - mu^2/kappa^2 >= 0 analytically; guard rounding only
    return math.sqrt(max(tau_sq, 0.0))


def _check_dim(x, s: ConvexSet) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != s.lower.shape:
        raise ValueError(f"dimension mismatch: point {x.shape} vs set {s.lower.shape}")
    return x


def project_box(x, box: BoxSet) -> np.ndarray:
    """Euclidean projection onto a box (componentwise clamp)."""
    x = _check_dim(x, box)
    return np.clip(x, box.lower, box.upper)


def project_box_halfspace(x, s: BoxHalfspaceSet) -> np.ndarray:
    """Euclidean projection onto ``{lower <= z <= upper, sum(z) >= zeta}``.

    The minimizer has the form ``clip(x + lam, lower, upper)`` for a scalar
    multiplier ``lam >= 0``. The map ``lam -> sum(clip(x + lam))`` is
    nondecreasing and piecewise linear with kinks at ``lower - x`` and
    ``upper - x``, so the multiplier is found exactly by scanning sorted
    breakpoints.
    """
    x = _check_dim(x, s)
    z = np.clip(x, s.lower, s.upper)
    if z.sum() >= s.zeta:
        return z

    lo = s.lower - x
    hi = s.upper - x
    knots = np.unique(np.concatenate([lo, hi]))
    knots = knots[knots > 0]
    sums = np.clip(x[None, :] + knots[:, None], s.lower, s.upper).sum(axis=1)
    # sum(upper) >= zeta, so the last knot always reaches the target
    j = min(int(np.searchsorted(sums, s.zeta)), len(knots) - 1)
    left_lam = 0.0 if j == 0 else knots[j - 1]
    left_sum = z.sum() if j == 0 else sums[j - 1]
    right_lam, right_sum = knots[j], sums[j]
    if right_sum == left_sum:
        lam = right_lam
    else:
        lam = left_lam + (s.zeta - left_sum) * (right_lam - left_lam) / (right_sum - left_sum)
    return np.clip(x + lam, s.lower, s.upper)


def project(x, s: ConvexSet) -> np.ndarray:
    """Dispatch to the projection matching the set type."""
    if isinstance(s, BoxHalfspaceSet):
        return project_box_halfspace(x, s)
    if isinstance(s, BoxSet):
        return project_box(x, s)
    raise TypeError(f"unsupported set type {type(s).__name__}")


def normal_cone_distance(x, v, s: ConvexSet, tol: Optional[float] = None) -> float:
    """Distance ``min_{z in N_s(x)} ||z + v||``.

    This is the residual that decides membership of ``x`` in the set of
    epsilon-zeros of ``N_s + B`` when ``v = B(x)``.

    Parameters
    ----------
    x : array_like
        Point in ``s`` (up to ``tol``).
    v : array_like
        Operator value at ``x``.
    s : BoxSet or BoxHalfspaceSet
    tol : float, optional
        Face activity tolerance, defaults to :func:`active_tolerance`.
    """
    x = _check_dim(x, s)
    v = np.asarray(v, dtype=float)
    if v.shape != x.shape:
        raise ValueError(f"dimension mismatch: v {v.shape} vs x {x.shape}")
    tol = active_tolerance(s) if tol is None else tol
    if not s.contains(x, tol):
        raise ValueError("x lies outside the set beyond the activity tolerance")

    at_upper = x >= s.upper - tol
    at_lower = x <= s.lower + tol
    sum_active = isinstance(s, BoxHalfspaceSet) and x.sum() <= s.zeta + tol * x.size

    if not sum_active:
        # separable: pick z_j to cancel v_j whenever the sign is admissible
        r = v.copy()
        r[at_upper & (v < 0)] = 0.0
        r[at_lower & (v > 0)] = 0.0
        return float(np.linalg.norm(r))

    gens = [np.eye(x.size)[:, at_upper], -np.eye(x.size)[:, at_lower],
            -np.ones((x.size, 1))]
    g = np.hstack(gens)
    _, resid = nnls(g, -v)
    return float(resid)


def estimate_constants(oracle: Callable, sampler: Callable, dataset, n_pairs: int,
                       seed=0) -> OperatorConstants:
    """Empirical operator constants from random point pairs.

    Over ``n_pairs`` pairs ``(x, y)`` drawn with ``sampler(rng)`` and every
    sample of ``dataset``, this returns

    - ``kappa``: max of ``||O(x) - O(y)|| / ||x - y||`` (a lower bound on the
      true Lipschitz constant),
    - ``mu``: min of ``<x - y, O(x) - O(y)> / ||x - y||**2``, floored at 0
      (an upper bound on the true modulus),
    - ``theta``: min of ``<x - y, O(x) - O(y)> / ||O(x) - O(y)||**2`` when
      positive (an upper bound on the true cocoercivity modulus),
    - ``bound_m``: max of ``||O(x)||`` over the sampled points (a lower bound
      on the true operator bound).

    These one-sided estimates are diagnostics. Certificates should be fed
    analytic constants whenever they are available.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    samples = np.asarray(getattr(dataset, "samples", dataset), dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]

    kappa, mu, theta, bound_m = 0.0, math.inf, math.inf, 0.0
    used = 0
    for _ in range(n_pairs):
        x = np.asarray(sampler(rng), dtype=float)
        y = np.asarray(sampler(rng), dtype=float)
        d = x - y
        dd = float(d @ d)
        if dd == 0.0:
            continue
        used += 1
        ox = np.broadcast_to(oracle(x, samples), (len(samples), x.size))
        oy = np.broadcast_to(oracle(y, samples), (len(samples), x.size))
        diff = ox - oy
        inner = diff @ d
        sq = np.einsum("ij,ij->i", diff, diff)
        kappa = max(kappa, float(np.sqrt(sq.max() / dd)))
        mu = min(mu, float(inner.min() / dd))
        nz = sq > 0
        if np.any(nz):
            theta = min(theta, float((inner[nz] / sq[nz]).min()))
        bound_m = max(bound_m, float(np.linalg.norm(ox, axis=1).max()),
                      float(np.linalg.norm(oy, axis=1).max()))
    if used == 0:
        raise ValueError("all sampled pairs were degenerate (x == y)")
    if kappa <= 0:
        raise ValueError("estimated kappa is zero: the oracle is constant on the sampled pairs")
    theta_est = theta if math.isfinite(theta) and theta > 0 else None
    return OperatorConstants(mu=max(mu, 0.0), kappa=kappa, theta=theta_est,
                             bound_m=max(bound_m, np.finfo(float).tiny))
