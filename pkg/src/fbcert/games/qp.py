"""
Box-constrained convex QP with randomly perturbed Hessian.

The forward operator is ``B(x) = q + P x`` and samples perturb the diagonal,
``O(x, xi) = q + (P + diag(xi)) x``. Since the perturbation has zero mean the
oracle is unbiased, but individual samples need not be positive
semidefinite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..operators import BoxSet, project_box
from ..splitting import Dataset

__all__ = [
    "QpInstance",
    "NOISE_STD",
    "qp_generate",
    "qp_samples",
    "qp_oracle",
    "QpOracle",
    "qp_operator",
    "qp_reference",
    "qp_bound_m",
]

#: entries of q and of the diagonal perturbation are N(0, 0.5), i.e. variance 0.5
NOISE_STD = float(np.sqrt(0.5))


@dataclass(frozen=True)
class QpInstance:
    """Problem data ``min q'x + x'Px/2`` over ``box``."""

    p_bar: np.ndarray
    q: np.ndarray
    box: BoxSet
    perturbations: Optional[Dataset] = None

    def __post_init__(self):
        p = np.asarray(self.p_bar, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.shape != (q.size, q.size) or self.box.dim != q.size:
            raise ValueError("inconsistent dimensions")
        if np.max(np.abs(p - p.T)) > 1e-12:
            raise ValueError("p_bar must be symmetric")
        object.__setattr__(self, "p_bar", p)
        object.__setattr__(self, "q", q)

    @property
    def dim(self) -> int:
        return self.q.size

    def lambda_max(self) -> float:
        return float(np.linalg.eigvalsh(self.p_bar)[-1])

    def resolvent(self):
        box = self.box
        return lambda y: project_box(y, box)


def qp_generate(n: int, seed, n_samples: int = 0) -> QpInstance:
    """Random instance: ``P = Q diag(linspace(0, 1, n)) Q'`` with ``Q`` the
    orthogonal factor of a Gaussian matrix, ``q ~ N(0, 0.5)`` entrywise and
    box ``[0, a]^n`` with ``a ~ U(0, 2)``. Optionally draws ``n_samples``
    diagonal perturbations from the same generator."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.linspace(0.0, 1.0, n) if n > 1 else np.ones(1)
    p = (Q * lam) @ Q.T
    p = 0.5 * (p + p.T)
    q = NOISE_STD * rng.standard_normal(n)
    a = rng.uniform(0.0, 2.0)
    pert = qp_samples(n, n_samples, rng) if n_samples > 0 else None
    return QpInstance(p_bar=p, q=q, box=BoxSet(np.zeros(n), np.full(n, a)), perturbations=pert)


def qp_samples(n: int, s: int, rng) -> Dataset:
    """``s`` diagonal perturbations with i.i.d. N(0, 0.5) entries."""
    return Dataset(NOISE_STD * rng.standard_normal((s, n)))


def qp_oracle(x, xi, instance: QpInstance) -> np.ndarray:
    """Noisy operator ``q + (P + diag(xi)) x``; ``xi`` may be a batch ``(m, n)``."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return instance.q + instance.p_bar @ x + xi * x


class QpOracle:
    """Oracle bound to an instance; the batch average is ``q + (P + diag(mean xi)) x``."""

    def __init__(self, instance: QpInstance):
        self.instance = instance

    def __call__(self, x, xi):
        return qp_oracle(x, xi, self.instance)

    def averager(self, samples):
        mean_xi = Dataset(samples).mean()
        return lambda x: qp_oracle(x, mean_xi, self.instance)


def qp_operator(instance: QpInstance):
    """Noise-free operator ``x -> q + P x``."""
    return lambda x: instance.q + instance.p_bar @ np.asarray(x, dtype=float)


def qp_reference(instance: QpInstance, tol: float = 1e-10, x0=None,
                 max_iter: int = 10**6) -> np.ndarray:
    """Minimizer of the noise-free QP by projected gradient with step ``1/lambda_max``.

    Stops once the fixed-point residual ``||proj(x - B(x)/L) - x||`` is at
    most ``tol``.
    """
    L = instance.lambda_max()
    gamma = 1.0 / L if L > 0 else 1.0
    x = np.zeros(instance.dim) if x0 is None else np.asarray(x0, dtype=float)
    for _ in range(max_iter):
        x_new = project_box(x - gamma * (instance.q + instance.p_bar @ x), instance.box)
        if np.linalg.norm(x_new - x) <= tol:
            return x_new
        x = x_new
    raise RuntimeError(f"reference solver did not reach tol={tol} in {max_iter} iterations")


def qp_bound_m(instance: QpInstance, samples, chunk: int = 64) -> float:
    """Largest oracle norm over the box and the given samples.

    The norm is convex in ``x``, so the maximum over the box sits at a
    vertex; vertices are enumerated exactly for ``n <= 16`` and an interval
    bound is used beyond that.
    """
    xi = np.asarray(getattr(samples, "samples", samples), dtype=float)
    lo, hi = instance.box.lower, instance.box.upper
    n = instance.dim
    if n > 16:
        mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
        base = np.abs(instance.q + instance.p_bar @ mid)[None, :] + (np.abs(instance.p_bar) @ rad)[None, :]
        worst = base + np.abs(xi) * np.maximum(np.abs(lo), np.abs(hi))[None, :]
        return float(np.linalg.norm(np.max(worst, axis=0)))
    best = 0.0
    verts = np.array(list(itertools.product(*zip(lo, hi))))
    for start in range(0, len(verts), chunk):
        v = verts[start:start + chunk]
        det = instance.q[None, :] + v @ instance.p_bar.T
        vals = det[:, None, :] + xi[None, :, :] * v[:, None, :]
        best = max(best, float(np.sqrt(np.einsum("vsj,vsj->vs", vals, vals).max())))
    return best
