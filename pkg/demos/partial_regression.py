"""
Cochran's formula and partial regression with p > n
===================================================

With more columns than rows the short and long minimum-norm regressions are
still linked by Cochran's decomposition, and the partially regularized fit
gives a Frisch-Waugh-Lovell style estimator for a small block of interest.
"""

import numpy as np

from olsinterp import ColSplit, ate_estimate, cochran, partial_regularized

rng = np.random.default_rng(1)
n, p = 30, 80
x = rng.standard_normal((n, p))
y = x[:, -2:] @ [2.0, -1.0] + 0.1 * rng.standard_normal(n)

# %%
# J holds the first 78 columns, J^c the last two.
split = ColSplit.from_indices(x, range(p - 2))
print("B2 holds:", split.b2_satisfied)

rep = cochran(x, y, split)
print("short = long_J + Delta long_Jc, deviation:", rep.deviation)

# %%
# Penalizing only J leaves the last two coefficients unshrunk.
part = partial_regularized(x, y, split)
print("J^c block:", part.beta_jc.round(3))
print("min-norm fit of same block:", rep.triple.beta_hat[-2:].round(3))

# %%
# A randomized treatment with many covariates.
z = rng.integers(0, 2, n).astype(float)
cov = rng.standard_normal((n, 60))
yz = 1.5 * z + cov @ rng.standard_normal(60) / 8 + 0.1 * rng.standard_normal(n)
print("treatment effect:", round(ate_estimate(cov, z, yz), 3))
