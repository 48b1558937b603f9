"""
Stability constants and finite-sample epsilon-zero certificates.

The certified quantity is the fixed-point residual
``||J(x - gamma B(x)) - x||`` of the true operator ``B`` at the output of a
data-driven forward-backward run. With probability at least ``1 - delta``
over the draw of the dataset it is bounded by

    eps_gamma = r_hat + beta + (s * beta + loss_bound) * sqrt(2 ln(1/delta) / s)

where ``r_hat`` is the empirical risk and ``beta`` the uniform stability of
the run. Dividing by ``gamma`` gives the radius ``epsilon`` of the
epsilon-zero set the output belongs to.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .operators import OperatorConstants, contraction_factor

__all__ = [
    "Certificate",
    "beta_strong",
    "beta_coco",
    "deviation_width",
    "generalization_bound",
    "epsilon_zero_strong",
    "epsilon_zero_coco",
    "fixed_point_residual",
]

STRONG = "strongly-monotone"
COCO = "cocoercive"


@dataclass(frozen=True)
class Certificate:
    """Probabilistic guarantee attached to the output of a run.

    ``epsilon * gamma == empirical_term + stability_term + deviation_term``.
    """

    epsilon: float
    delta: float
    s: int
    k: Optional[int]
    regime: str
    empirical_term: float
    stability_term: float
    deviation_term: float
    loss_bound_provenance: str
    gamma: float
    reference_norm: Optional[float] = None

    @property
    def epsilon_relative(self) -> Optional[float]:
        if not self.reference_norm:
            return None
        return self.epsilon / self.reference_norm

    def with_reference(self, reference_norm: float) -> "Certificate":
        d = asdict(self)
        d["reference_norm"] = float(reference_norm)
        return Certificate(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilon_relative"] = self.epsilon_relative
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        d = {k: v for k, v in d.items() if k != "epsilon_relative"}
        return cls(**d)


def _check_delta(delta: float):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _check_s(s: int):
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")


def beta_strong(gamma: float, constants: OperatorConstants, s: int) -> float:
    """Uniform stability ``2 gamma M (1 + tau) / (s (1 - tau))`` of a run
    with a strongly monotone, Lipschitz oracle. Independent of the number of
    iterations."""
    _check_s(s)
    tau = contraction_factor(gamma, constants)
    if tau >= 1.0:
        raise ValueError("contraction factor is not below 1")
    return 2.0 * gamma * constants.bound_m * (1.0 + tau) / (s * (1.0 - tau))


def beta_coco(gamma: float, bound_m: float, k: int, s: int) -> float:
    """Uniform stability ``4 gamma M K / s`` of ``K`` steps with a
    cocoercive oracle. The caller is responsible for ``gamma < 2 theta``."""
    _check_s(s)
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return 4.0 * gamma * bound_m * k / s


def deviation_width(s: int, delta: float, form: str = "replacement") -> float:
    """The factor multiplying ``(c * s * beta + loss_bound)`` in the bound."""
    _check_s(s)
    _check_delta(delta)
    if form == "replacement":
        return math.sqrt(2.0 * math.log(1.0 / delta) / s)
    if form == "removal":
        return math.sqrt(math.log(1.0 / delta) / (2.0 * s))
    raise ValueError(f"unknown form {form!r}")


def _terms(empirical_risk, beta, loss_bound, s, delta, form):
    if empirical_risk < 0 or beta < 0 or loss_bound < 0:
        raise ValueError("empirical_risk, beta and loss_bound must be nonnegative")
    w = deviation_width(s, delta, form)
    if form == "replacement":
        return empirical_risk, beta, (s * beta + loss_bound) * w
    return empirical_risk, 2.0 * beta, (4.0 * s * beta + loss_bound) * w


def generalization_bound(empirical_risk: float, beta: float, loss_bound: float,
                         s: int, delta: float, form: str = "replacement") -> float:
    """High-probability upper bound on the risk of a ``beta``-stable algorithm.

    ``form="replacement"`` (default) gives
    ``r_hat + beta + (s beta + lbar) sqrt(2 ln(1/delta) / s)``, matching
    stability under replacement of one sample. ``form="removal"`` gives the
    classical removal-stability variant
    ``r_hat + 2 beta + (4 s beta + lbar) sqrt(ln(1/delta) / (2 s))``.
    """
    return float(sum(_terms(empirical_risk, beta, loss_bound, s, delta, form)))


def _certificate(regime, empirical_risk, beta, loss_bound, gamma, s, k, delta,
                 provenance, reference_norm, form):
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if provenance not in ("analytic", "empirical"):
        raise ValueError("loss_bound_provenance must be 'analytic' or 'empirical'")
    emp, stab, dev = _terms(empirical_risk, beta, loss_bound, s, delta, form)
    return Certificate(
        epsilon=(emp + stab + dev) / gamma,
        delta=float(delta), s=int(s), k=None if k is None else int(k), regime=regime,
        empirical_term=float(emp), stability_term=float(stab), deviation_term=float(dev),
        loss_bound_provenance=provenance, gamma=float(gamma),
        reference_norm=None if reference_norm is None else float(reference_norm))


def epsilon_zero_strong(empirical_risk: float, gamma: float, constants: OperatorConstants,
                        s: int, delta: float, k: Optional[int] = None,
                        loss_bound: Optional[float] = None,
                        loss_bound_provenance: str = "analytic",
                        reference_norm: Optional[float] = None,
                        form: str = "replacement") -> Certificate:
    """Certificate for a strongly monotone, Lipschitz oracle.

    ``loss_bound`` defaults to ``constants.loss_bound``. The radius does not
    depend on the number of iterations ``k``, which is only recorded.
    """
    _check_delta(delta)
    beta = beta_strong(gamma, constants, s)
    lbar = constants.loss_bound if loss_bound is None else loss_bound
    return _certificate(STRONG, empirical_risk, beta, lbar, gamma, s, k, delta,
                        loss_bound_provenance, reference_norm, form)


def epsilon_zero_coco(empirical_risk: float, gamma: float, bound_m: float,
                      loss_bound: float, s: int, k: int, delta: float,
                      theta: Optional[float] = None,
                      loss_bound_provenance: str = "analytic",
                      reference_norm: Optional[float] = None,
                      form: str = "replacement") -> Certificate:
    """Certificate for a cocoercive oracle after ``k`` steps.

    When ``theta`` is given the step is checked against ``(0, 2 theta)``.
    """
    _check_delta(delta)
    if theta is not None and not 0 < gamma < 2.0 * theta:
        raise ValueError(f"gamma={gamma} outside (0, 2 theta) = (0, {2.0 * theta})")
    beta = beta_coco(gamma, bound_m, k, s)
    return _certificate(COCO, empirical_risk, beta, loss_bound, gamma, s, k, delta,
                        loss_bound_provenance, reference_norm, form)


def fixed_point_residual(x, mean_op: Callable, resolvent: Callable, gamma: float) -> float:
    """A posteriori residual ``||J(x - gamma B(x)) - x||``.

    Zero exactly at zeros of ``A + B``; divided by ``gamma`` it bounds the
    distance of ``-B`` from ``A`` at the resolvent output.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(resolvent(x - gamma * np.asarray(mean_op(x))) - x))
