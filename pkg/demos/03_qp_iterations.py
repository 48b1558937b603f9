"""
Random box-constrained quadratic programs and the iteration trade-off.

For merely cocoercive operators the stability constant grows with the number
of iterations, so running longer lowers the optimization error while the
certificate radius grows.
"""

import numpy as np

from fbcert import analytic_loss_bound, epsilon_zero_coco, fixed_point_residual
from fbcert.games.qp import QpOracle, qp_bound_m, qp_generate, qp_operator, qp_reference, qp_samples
from fbcert.splitting import empirical_risk, fb_run_data

rng = np.random.default_rng(0)
inst = qp_generate(10, rng)
data = qp_samples(10, 10000, rng)
x_star = qp_reference(inst)
m = qp_bound_m(inst, data)
lbar = analytic_loss_bound(inst.box.diameter(), 0.01, m)
print(f"M={m:.3f} loss bound={lbar:.3f}")

oracle = QpOracle(inst)
for k in (100, 1000, 10000):
    h, _ = fb_run_data(np.zeros(10), data, oracle, inst.resolvent(), 0.01, k, record=False)
    r = empirical_risk(h, data, oracle, 0.01)
    cert = epsilon_zero_coco(r, 0.01, m, lbar, len(data), k, 0.05, theta=1.0)
    res = fixed_point_residual(h.x, qp_operator(inst), inst.resolvent(), 0.01)
    print(f"K={k:>6d}  |x - x*|={np.linalg.norm(h.x - x_star):.2e}  "
          f"residual/gamma={res / 0.01:.2e}  epsilon={cert.epsilon:.1f}")
