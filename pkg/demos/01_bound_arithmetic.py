"""
How the certificate radius depends on the sample size.

The stability constant of a strongly monotone game shrinks like 1/s while
the deviation term shrinks like 1/sqrt(s), so the radius eventually decays
at the square-root rate.
"""

import numpy as np

from fbcert import OperatorConstants, beta_strong, contraction_factor, epsilon_zero_strong

# constants of a 20-vehicle charging game, with a loss bound of 24.4
c = OperatorConstants(mu=0.0127, kappa=0.1159, bound_m=39.2192, loss_bound=24.3852)
gamma, delta = 0.02, 0.05

print("step limit 2 mu / kappa^2 =", round(c.step_limit(), 4))
print("contraction factor tau   =", contraction_factor(gamma, c))

# %%
# Radius with zero empirical risk for a range of sample sizes
for s in (10**2, 10**3, 10**4, 10**5, 10**6):
    cert = epsilon_zero_strong(0.0, gamma, c, s, delta)
    print(f"s={s:>8d}  beta={beta_strong(gamma, c, s):10.4f}  epsilon={cert.epsilon:12.2f}")

s = np.logspace(2, 6, 9)
eps = [epsilon_zero_strong(0.0, gamma, c, int(v), delta).epsilon for v in s]
print("log-log slope:", np.polyfit(np.log(s), np.log(eps), 1)[0])
