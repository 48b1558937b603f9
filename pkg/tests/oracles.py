"""
Independent reference implementations used by the tests.

Formulas are evaluated in 50-digit arithmetic with mpmath; projections and
normal-cone distances are found by brute force over grids; derivatives by
central finite differences. None of this shares code with the package.
"""

import itertools

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def mp_tau(gamma, mu, kappa):
    g, m, k = mp.mpf(gamma), mp.mpf(mu), mp.mpf(kappa)
    return mp.sqrt(1 - g * (2 * m - g * k**2))


def mp_beta_strong(gamma, mu, kappa, bound_m, s):
    t = mp_tau(gamma, mu, kappa)
    return 2 * mp.mpf(gamma) * mp.mpf(bound_m) * (1 + t) / (mp.mpf(s) * (1 - t))


def mp_beta_coco(gamma, bound_m, k, s):
    return 4 * mp.mpf(gamma) * mp.mpf(bound_m) * mp.mpf(k) / mp.mpf(s)


def mp_bound(r_hat, beta, lbar, s, delta):
    r, b, l, s_, d = map(mp.mpf, (r_hat, beta, lbar, s, delta))
    return r + b + (s_ * b + l) * mp.sqrt(2 * mp.log(1 / d) / s_)


def mp_bound_removal(r_hat, beta, lbar, s, delta):
    r, b, l, s_, d = map(mp.mpf, (r_hat, beta, lbar, s, delta))
    return r + 2 * b + (4 * s_ * b + l) * mp.sqrt(mp.log(1 / d) / (2 * s_))


def mp_eps_strong(r_hat, gamma, mu, kappa, bound_m, lbar, s, delta):
    """Radius written out as in the strongly monotone theorem's proof."""
    g, m_, l = mp.mpf(gamma), mp.mpf(bound_m), mp.mpf(lbar)
    t = mp_tau(gamma, mu, kappa)
    sb = 2 * g * m_ * (1 + t) / (1 - t)
    s_ = mp.mpf(s)
    eps = mp.mpf(r_hat) + sb / s_ + (sb + l) * mp.sqrt(2 * mp.log(1 / mp.mpf(delta)) / s_)
    return eps / g


def mp_eps_coco(r_hat, gamma, bound_m, lbar, s, k, delta):
    g, m_, l, s_, k_ = map(mp.mpf, (gamma, bound_m, lbar, s, k))
    eps = (mp.mpf(r_hat) + 4 * g * m_ * k_ / s_
           + (4 * g * m_ * k_ + l) * mp.sqrt(2 * mp.log(1 / mp.mpf(delta)) / s_))
    return eps / g


def mp_mean(rows):
    """Exact column means of a float array via mpmath's fsum."""
    rows = np.asarray(rows, dtype=float)
    return np.array([float(mp.fsum([mp.mpf(float(v)) for v in col]) / rows.shape[0])
                     for col in rows.T])


def grid_project(x, lower, upper, zeta=None, n=401, rounds=8):
    """Nearest point of ``box (and sum >= zeta)`` by iterated grid refinement (2-D)."""
    lo, hi = np.array(lower, float), np.array(upper, float)
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    for _ in range(rounds):
        g0 = np.linspace(max(lo[0], c[0] - half[0]), min(hi[0], c[0] + half[0]), n)
        g1 = np.linspace(max(lo[1], c[1] - half[1]), min(hi[1], c[1] + half[1]), n)
        A, B = np.meshgrid(g0, g1, indexing="ij")
        d = (A - x[0]) ** 2 + (B - x[1]) ** 2
        if zeta is not None:
            d[A + B < zeta - 1e-12] = np.inf
        i = np.unravel_index(np.argmin(d), d.shape)
        c = np.array([A[i], B[i]])
        half = np.array([4 * (g0[1] - g0[0]), 4 * (g1[1] - g1[0])])
    return c


def grid_cone_distance(v, generators, n=201, cmax=None):
    """``min ||G c + v||`` over ``c >= 0`` by grid search and local refinement."""
    G = np.asarray(generators, float)
    v = np.asarray(v, float)
    m = G.shape[1]
    cmax = cmax or 2 * np.linalg.norm(v) + 1
    centers = np.zeros(m)
    half = np.full(m, cmax)
    best = np.inf
    for _ in range(10):
        axes = [np.linspace(max(0.0, c - h), c + h, n if m <= 2 else 41) for c, h in zip(centers, half)]
        pts = np.array(list(itertools.product(*axes)))
        vals = np.linalg.norm(pts @ G.T + v, axis=1)
        j = np.argmin(vals)
        best = min(best, vals[j])
        centers = pts[j]
        half = np.array([2 * (a[1] - a[0]) if len(a) > 1 else 0.0 for a in axes])
    return float(best)


def fd_gradient(f, x, h=1e-6):
    """Central finite differences of a scalar function."""
    x = np.asarray(x, float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def pev_cost_direct(x, xi, q_diag, c, p, sigma_ref):
    """Costs of all agents, written with explicit loops."""
    n, t = q_diag.shape
    X = np.asarray(x, float).reshape(n, t)
    sigma = sum(X[j] for j in range(n)) / n
    d = sigma - sigma_ref
    pen = float(d @ p @ d)
    return np.array([float(X[i] @ np.diag(q_diag[i]) @ X[i] + c[i] @ X[i] + xi @ X[i] + pen)
                     for i in range(n)])


def pev_gradient_fd(x, xi, q_diag, c, p, sigma_ref, h=1e-6):
    """Stacked partial gradients of each agent's own cost by finite differences."""
    n, t = q_diag.shape
    x = np.asarray(x, float)
    out = np.empty(n * t)
    for i in range(n):
        for j in range(t):
            e = np.zeros(n * t)
            e[i * t + j] = h
            out[i * t + j] = (pev_cost_direct(x + e, xi, q_diag, c, p, sigma_ref)[i]
                              - pev_cost_direct(x - e, xi, q_diag, c, p, sigma_ref)[i]) / (2 * h)
    return out


def best_response_grid(cost, n_agents, grids, iters=60):
    """Round-robin best responses of agents choosing from finite grids of strategies.

    ``cost(i, profile)`` returns agent ``i``'s cost; ``grids[i]`` is an array
    of candidate strategies (rows).
    """
    profile = [g[0] for g in grids]
    for _ in range(iters):
        changed = False
        for i in range(n_agents):
            vals = []
            for cand in grids[i]:
                trial = list(profile)
                trial[i] = cand
                vals.append(cost(i, trial))
            best = grids[i][int(np.argmin(vals))]
            if not np.array_equal(best, profile[i]):
                profile[i] = best
                changed = True
        if not changed:
            break
    return np.concatenate(profile)
