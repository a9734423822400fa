"""
Leave-one-out without refitting
===============================

Every leave-one-out quantity of a minimum-norm fit follows from the full fit.
Here the shortcuts are checked against brute-force refits for a tall and a
wide design.
"""

import numpy as np

from olsinterp import fit, jackknife, jackknife_plus_interval, loo_beta, loo_residuals

rng = np.random.default_rng(0)

# %%
# A wide design interpolates: every in-sample residual is zero, but the
# leave-one-out residuals are not.
x = rng.standard_normal((8, 20))
y = x @ rng.standard_normal(20) / np.sqrt(20) + rng.standard_normal(8)
r = fit(x, y)
print("regime:", r.regime.label)
print("max |in-sample residual|:", np.abs(r.residuals).max())

loo = loo_residuals(x, y)
print("PRESS:", loo.press)

# %%
# The same numbers from eight refits.
brute = []
for i in range(8):
    keep = np.arange(8) != i
    beta_i = np.linalg.lstsq(x[keep], y[keep], rcond=None)[0]
    brute.append(y[i] - x[i] @ beta_i)
    assert np.allclose(beta_i, loo_beta(x, y, i))
print("shortcut vs refit:", np.abs(loo.loo_residuals - brute).max())

# %%
# Jackknife and jackknife+ come for free once the LOO residuals are known.
jk = jackknife(x, y)
print("jackknife sd:", np.sqrt(np.diag(jk.v_jack))[:4].round(3))
iv = jackknife_plus_interval(x, y, rng.standard_normal(20), alpha=0.2)
print(f"jackknife+ interval: [{iv.lower:.3f}, {iv.upper:.3f}]")
