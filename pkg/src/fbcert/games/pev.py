"""
Plug-in electric vehicle charging game.

Each of ``N`` vehicles picks a charging profile ``x_i`` over ``T`` slots and
pays

    J_i(x, xi) = x_i' Q_i x_i + c_i' x_i + xi' x_i + (sigma(x) - sigma_ref)' P (sigma(x) - sigma_ref)

with ``sigma(x)`` the average profile and ``xi`` the random day-ahead price.
The feasible set of agent ``i`` is ``[0, xbar_i]^T`` with a minimum total
charge ``zeta_i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from ..certificates import Certificate, epsilon_zero_strong
from ..operators import BoxHalfspaceSet, OperatorConstants, normal_cone_distance
from ..splitting import Dataset, Hypothesis, Trajectory, empirical_risk, fb_run_data

__all__ = [
    "PevGame",
    "SneResult",
    "REFERENCE_CONSTANTS",
    "make_pev_game",
    "pev_cost",
    "pev_pseudogradient",
    "PevOracle",
    "pev_oracle",
    "pev_constants",
    "pev_bound_m",
    "ProductProjection",
    "alg3_run",
    "epsilon_sne_certificate",
    "reference_sne",
    "pev_kkt_residual",
    "save_game",
    "load_game",
]

#: operator constants reported for the 20-vehicle, 14-slot instance
REFERENCE_CONSTANTS = OperatorConstants(mu=0.0127, kappa=0.1159, bound_m=39.2192,
                                      loss_bound=24.3852)


@dataclass(frozen=True)
class PevGame:
    """Data of the charging game.

    ``q_diag[i]`` and ``c[i]`` hold the diagonal of ``Q_i`` and the vector
    ``c_i``; ``p`` is the ``T x T`` aggregate penalty.
    """

    q_diag: np.ndarray
    c: np.ndarray
    p: np.ndarray
    sigma_ref: np.ndarray
    sets: Tuple[BoxHalfspaceSet, ...]
    seed: Optional[int] = None

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q_diag, dtype=float))
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        sref = np.atleast_1d(np.asarray(self.sigma_ref, dtype=float))
        n_agents, horizon = q.shape
        if c.shape != q.shape:
            raise ValueError("c must have shape (n_agents, horizon)")
        if p.shape != (horizon, horizon) or sref.shape != (horizon,):
            raise ValueError("p must be (T, T) and sigma_ref of length T")
        if np.any(q <= 0):
            raise ValueError("Q_i must be positive definite")
        if not np.allclose(p, p.T, atol=1e-12) or np.linalg.eigvalsh(p).min() <= 0:
            raise ValueError("P must be symmetric positive definite")
        sets = tuple(self.sets)
        if len(sets) != n_agents or any(s.dim != horizon for s in sets):
            raise ValueError("one feasible set of dimension T per agent is required")
        object.__setattr__(self, "q_diag", q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "sigma_ref", sref)
        object.__setattr__(self, "sets", sets)

    @property
    def n_agents(self) -> int:
        return self.q_diag.shape[0]

    @property
    def horizon(self) -> int:
        return self.q_diag.shape[1]

    @property
    def dim(self) -> int:
        return self.n_agents * self.horizon

    def aggregate(self, x) -> np.ndarray:
        """Average charging profile ``sigma(x)``."""
        return np.asarray(x, dtype=float).reshape(self.n_agents, self.horizon).mean(axis=0)

    def resolvent(self) -> "ProductProjection":
        return ProductProjection(self.sets)

    def diameter(self) -> float:
        """Upper bound on the diameter of the joint feasible set."""
        return float(np.sqrt(sum(s.diameter() ** 2 for s in self.sets)))

    def contains(self, x, tol: float = 1e-9) -> bool:
        blocks = np.asarray(x, dtype=float).reshape(self.n_agents, self.horizon)
        return all(s.contains(b, tol) for s, b in zip(self.sets, blocks))


@dataclass(frozen=True)
class SneResult:
    """Output profile of a run with its certificate and, when a reference
    equilibrium is known, the relative gap to it."""

    x: np.ndarray
    certificate: Certificate
    reference_gap: Optional[float] = None


def make_pev_game(seed: int, n_agents: int = 20, horizon: int = 14, cap: float = 2.5,
                  q_range=(0.002, 0.008), c_range=(0.02, 0.075),
                  zeta_range=(12.0, 18.0)) -> PevGame:
    """Random instance following the simulation table: ``Q_i = q_i I``,
    ``c_i = c_i 1``, ``P = I_T``, ``sigma_ref = 1`` and per-agent minimum
    charge ``zeta_i``, all uniform draws from ``seed``."""
    rng = np.random.default_rng(seed)
    q = rng.uniform(*q_range, size=n_agents)
    c = rng.uniform(*c_range, size=n_agents)
    zeta = rng.uniform(*zeta_range, size=n_agents)
    sets = tuple(BoxHalfspaceSet(np.zeros(horizon), np.full(horizon, cap), z) for z in zeta)
    return PevGame(q_diag=np.repeat(q[:, None], horizon, axis=1),
                   c=np.repeat(c[:, None], horizon, axis=1),
                   p=np.eye(horizon), sigma_ref=np.ones(horizon), sets=sets, seed=seed)


def pev_cost(x, xi, game: PevGame) -> np.ndarray:
    """Vector of agents' costs at profile ``x`` and price ``xi``."""
    X = np.asarray(x, dtype=float).reshape(game.n_agents, game.horizon)
    d = X.mean(axis=0) - game.sigma_ref
    penalty = d @ game.p @ d
    return (np.einsum("it,it->i", game.q_diag * X, X) + np.einsum("it,it->i", game.c, X)
            + X @ np.asarray(xi, dtype=float) + penalty)


def _deterministic_part(x, game: PevGame) -> np.ndarray:
    X = np.asarray(x, dtype=float).reshape(game.n_agents, game.horizon)
    d = X.mean(axis=0) - game.sigma_ref
    return 2.0 * game.q_diag * X + game.c + (2.0 / game.n_agents) * (game.p @ d)


def pev_pseudogradient(x, xi, game: PevGame) -> np.ndarray:
    """Stacked partial gradients ``F_i = 2 Q_i x_i + c_i + xi + (2/N) P (sigma - sigma_ref)``.

    ``xi`` may be a single price vector ``(T,)`` or a batch ``(m, T)``; the
    result has shape ``(N*T,)`` or ``(m, N*T)`` accordingly.
    """
    x = np.asarray(x, dtype=float)
    if x.size != game.dim:
        raise ValueError(f"x has {x.size} entries, expected {game.dim}")
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != game.horizon:
        raise ValueError(f"price vector length {xi.shape[-1]} != horizon {game.horizon}")
    g = _deterministic_part(x, game)
    if xi.ndim == 1:
        return (g + xi).ravel()
    return (g[None, :, :] + xi[:, None, :]).reshape(xi.shape[0], game.dim)


class PevOracle:
    """Oracle ``(x, xi) -> F(x, xi)`` bound to a game.

    ``F`` is affine in the price with identity coefficient, so the batch
    average is ``F(x, mean(xi))``; :meth:`averager` exploits this.
    """

    def __init__(self, game: PevGame):
        self.game = game

    def __call__(self, x, xi):
        return pev_pseudogradient(x, xi, self.game)

    def averager(self, samples):
        mean_price = Dataset(samples).mean()
        return lambda x: pev_pseudogradient(x, mean_price, self.game)


def pev_oracle(game: PevGame) -> PevOracle:
    return PevOracle(game)


def pev_jacobian(game: PevGame) -> np.ndarray:
    """Constant Jacobian of the pseudogradient (symmetric for symmetric ``P``)."""
    n, t = game.n_agents, game.horizon
    jac = np.kron(np.ones((n, n)), game.p) * (2.0 / n**2)
    jac += np.diag(2.0 * game.q_diag.ravel())
    return jac


def pev_constants(game: PevGame, prices: Optional[Dataset] = None,
                  loss_bound: float = 0.0) -> OperatorConstants:
    """Analytic strong monotonicity and Lipschitz constants of ``F(., xi)``.

    With ``prices`` the operator bound is :func:`pev_bound_m` over those
    prices, otherwise it is left at 1 and must be replaced by the caller.
    """
    jac = pev_jacobian(game)
    sym = 0.5 * (jac + jac.T)
    mu = float(np.linalg.eigvalsh(sym).min())
    kappa = float(np.linalg.norm(jac, 2))
    m = pev_bound_m(game, prices) if prices is not None else 1.0
    return OperatorConstants(mu=mu, kappa=kappa, bound_m=m, loss_bound=loss_bound)


def pev_bound_m(game: PevGame, prices) -> float:
    """Interval-arithmetic upper bound on ``||F(x, xi)||`` over the box
    hull of the feasible sets and the coordinate range of ``prices``."""
    samples = np.asarray(getattr(prices, "samples", prices), dtype=float)
    lo_x = np.array([s.lower for s in game.sets])
    hi_x = np.array([s.upper for s in game.sets])
    d_lo = lo_x.mean(axis=0) - game.sigma_ref
    d_hi = hi_x.mean(axis=0) - game.sigma_ref
    pos, neg = np.clip(game.p, 0, None), np.clip(game.p, None, 0)
    pd_lo = pos @ d_lo + neg @ d_hi
    pd_hi = pos @ d_hi + neg @ d_lo
    k = 2.0 / game.n_agents
    f_lo = 2.0 * game.q_diag * lo_x + game.c + samples.min(axis=0) + k * pd_lo
    f_hi = 2.0 * game.q_diag * hi_x + game.c + samples.max(axis=0) + k * pd_hi
    return float(np.linalg.norm(np.maximum(np.abs(f_lo), np.abs(f_hi))))


class ProductProjection:
    """Agent-wise projection onto the product of the feasible sets.

    All agents are handled at once: each block is ``clip(y_i + lam_i)`` with
    its own multiplier, found by the breakpoint scan of
    :func:`~fbcert.operators.project_box_halfspace` run row-wise.
    """

    def __init__(self, sets: Sequence[BoxHalfspaceSet]):
        self.sets = tuple(sets)
        self.horizon = self.sets[0].dim
        if any(s.dim != self.horizon for s in self.sets):
            raise ValueError("all agents must share the horizon")
        self.lower = np.array([s.lower for s in self.sets])
        self.upper = np.array([s.upper for s in self.sets])
        self.zeta = np.array([s.zeta for s in self.sets])

    def __call__(self, y) -> np.ndarray:
        Y = np.asarray(y, dtype=float).reshape(len(self.sets), self.horizon)
        Z = np.clip(Y, self.lower, self.upper)
        base = Z.sum(axis=1)
        rows = np.flatnonzero(base < self.zeta)
        if rows.size == 0:
            return Z.ravel()
        Yr, lo, up, zeta = Y[rows], self.lower[rows], self.upper[rows], self.zeta[rows]
        knots = np.maximum(np.sort(np.concatenate([lo - Yr, up - Yr], axis=1), axis=1), 0.0)
        sums = np.clip(Yr[:, None, :] + knots[:, :, None], lo[:, None, :], up[:, None, :]).sum(axis=2)
        # the largest knot puts every slot at its upper bound, which is feasible
        j = np.argmax(sums >= zeta[:, None], axis=1)
        idx = np.arange(rows.size)
        left_lam = np.where(j > 0, knots[idx, j - 1], 0.0)
        left_sum = np.where(j > 0, sums[idx, j - 1], base[rows])
        right_lam, right_sum = knots[idx, j], sums[idx, j]
        width = right_sum - left_sum
        safe = np.where(width > 0, width, 1.0)
        lam = np.where(width > 0, left_lam + (zeta - left_sum) * (right_lam - left_lam) / safe,
                       right_lam)
        Z[rows] = np.clip(Yr + lam[:, None], lo, up)
        return Z.ravel()


def alg3_run(game: PevGame, dataset: Dataset, gamma: float, K: int, x0=None,
             record: bool = True) -> Tuple[Hypothesis, Optional[Trajectory]]:
    """Data-driven projected pseudogradient method.

    Every agent moves along the sample average of its partial gradient and
    projects back on its own feasible set; stacked, this is a data-driven
    forward-backward run with the product projection as resolvent. ``x0``
    defaults to the zero profile.
    """
    x0 = np.zeros(game.dim) if x0 is None else np.asarray(x0, dtype=float)
    return fb_run_data(x0, dataset, pev_oracle(game), game.resolvent(), gamma, K,
                       record=record)


def epsilon_sne_certificate(h: Hypothesis, game: PevGame, dataset: Dataset, gamma: float,
                            delta: float, constants: OperatorConstants, k=None,
                            loss_bound: Optional[float] = None,
                            loss_bound_provenance: str = "analytic",
                            reference_norm: Optional[float] = None) -> Certificate:
    """Epsilon-equilibrium certificate for the output of :func:`alg3_run`."""
    r_hat = empirical_risk(h, dataset, pev_oracle(game), gamma)
    return epsilon_zero_strong(r_hat, gamma, constants, len(dataset), delta, k=k,
                               loss_bound=loss_bound,
                               loss_bound_provenance=loss_bound_provenance,
                               reference_norm=reference_norm)


def reference_sne(game: PevGame, full_pool: Dataset, tol: float = 1e-10, x0=None,
                  gamma: Optional[float] = None, max_iter: int = 10**6) -> np.ndarray:
    """Equilibrium of the game under the empirical price distribution of ``full_pool``.

    Runs exact forward-backward steps on the pool-mean pseudogradient until
    the fixed-point residual drops below ``tol``. Because ``F`` is affine in
    the price, the pool mean of ``F(x, xi)`` equals ``F(x, mean(xi))``, which
    is what gets evaluated. The default step ``2 / (mu + kappa)`` is valid
    because the Jacobian is symmetric positive definite.
    """
    if len(full_pool) < 1:
        raise ValueError("empty pool")
    mean_price = full_pool.mean()
    jac = pev_jacobian(game)
    eig = np.linalg.eigvalsh(0.5 * (jac + jac.T))
    if gamma is None:
        gamma = 2.0 / (eig[0] + eig[-1])
    proj = game.resolvent()
    x = np.zeros(game.dim) if x0 is None else np.asarray(x0, dtype=float)
    for _ in range(max_iter):
        x_new = proj(x - gamma * pev_pseudogradient(x, mean_price, game))
        if np.linalg.norm(x_new - x) <= tol:
            return x_new
        x = x_new
    raise RuntimeError(f"reference solver did not reach tol={tol} in {max_iter} iterations")


def pev_kkt_residual(x, game: PevGame, price) -> float:
    """Distance of ``-F(x, price)`` from the normal cone of the joint feasible set.

    The cone of a product is the product of the agents' cones, so the
    distance is the root sum of squares of the per-agent distances.
    """
    f = pev_pseudogradient(x, price, game).reshape(game.n_agents, game.horizon)
    X = np.asarray(x, dtype=float).reshape(game.n_agents, game.horizon)
    parts = [normal_cone_distance(xi, fi, s) for xi, fi, s in zip(X, f, game.sets)]
    return float(np.sqrt(np.sum(np.square(parts))))


def save_game(game: PevGame, path) -> None:
    """Write the instance as a JSON key-value file.

    Only diagonal ``P`` is representable in the file format.
    """
    if not np.allclose(game.p, np.diag(np.diag(game.p))):
        raise ValueError("only diagonal P can be serialized")
    doc = {
        "n_agents": game.n_agents,
        "horizon": game.horizon,
        "q_diag": game.q_diag.tolist(),
        "c": game.c.tolist(),
        "p_diag": np.diag(game.p).tolist(),
        "sigma_ref": game.sigma_ref.tolist(),
        "upper": [s.upper.tolist() for s in game.sets],
        "zeta": [s.zeta for s in game.sets],
        "seed": game.seed,
    }
    Path(path).write_text(json.dumps(doc, indent=2))


def load_game(path) -> PevGame:
    """Read an instance written by :func:`save_game`."""
    doc = json.loads(Path(path).read_text())
    n, t = int(doc["n_agents"]), int(doc["horizon"])
    upper = np.asarray(doc["upper"], dtype=float)
    if upper.ndim == 1:
        upper = np.repeat(upper[:, None], t, axis=1) if upper.size == n else np.tile(upper, (n, 1))
    zeta = np.broadcast_to(np.asarray(doc["zeta"], dtype=float), (n,))
    sets = tuple(BoxHalfspaceSet(np.zeros(t), upper[i], float(zeta[i])) for i in range(n))
    return PevGame(q_diag=np.broadcast_to(np.asarray(doc["q_diag"], dtype=float), (n, t)),
                   c=np.broadcast_to(np.asarray(doc["c"], dtype=float), (n, t)),
                   p=np.diag(np.broadcast_to(np.asarray(doc["p_diag"], dtype=float), (t,))),
                   sigma_ref=np.broadcast_to(np.asarray(doc["sigma_ref"], dtype=float), (t,)),
                   sets=sets, seed=doc.get("seed"))
