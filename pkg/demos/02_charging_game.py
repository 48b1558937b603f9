"""
Certified equilibrium seeking in an electric vehicle charging game.

Twenty vehicles share a 14-slot charging window. Each one runs projected
pseudogradient steps on the sample-average price, and the final profile is
certified against the equilibrium of the full price pool.
"""

from dataclasses import replace

import numpy as np

from fbcert import analytic_loss_bound
from fbcert.games.pev import (alg3_run, epsilon_sne_certificate, make_pev_game, pev_constants,
                              pev_kkt_residual, reference_sne)
from fbcert.harness.data import synth_prices

game = make_pev_game(0)
pool = synth_prices(3649, seed=np.random.SeedSequence([0]))

c = pev_constants(game, pool)
c = replace(c, loss_bound=analytic_loss_bound(game.diameter(), 0.02, c.bound_m))
print(f"mu={c.mu:.5f} kappa={c.kappa:.4f} M={c.bound_m:.3f} step limit={c.step_limit():.3f}")

# %%
# Equilibrium under the pool distribution, used as ground truth
x_star = reference_sne(game, pool)
print("KKT residual of the reference:", pev_kkt_residual(x_star, game, pool.mean()))

# %%
# One day-ahead dataset of 3000 price profiles
rng = np.random.default_rng(1)
data = pool.subset(rng.choice(len(pool), 3000, replace=False))
h, traj = alg3_run(game, data, 0.02, 1000)
cert = epsilon_sne_certificate(h, game, data, 0.02, 0.05, c, k=1000,
                               reference_norm=np.linalg.norm(x_star))
err = np.linalg.norm(h.x - x_star) / np.linalg.norm(x_star)
print(f"relative error {err:.4f} vs certified radius {cert.epsilon_relative:.1f}")
print("empirical risk term:", cert.empirical_term)
