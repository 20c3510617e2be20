"""Empirical law of the standardized statistic against the Gumbel distribution."""
# %%
import numpy as np

from maxgap.experiments import CampaignConfig, mc_limit_law

# %%
rep = mc_limit_law(CampaignConfig(n=20000, d=1, reps=500, base_seed=3))
print(f"KS distance to Gumbel: {rep.ks_distance:.4f}")
print(f"P(T <= 0) = {rep.extra['p_le_0']:.3f} (limit {np.exp(-1):.3f})")

# %%
print(" t      empirical  gumbel")
for t, emp, g in rep.extra["cdf_table"][::4]:
    print(f"{t:5.2f}  {emp:9.3f}  {g:6.3f}")
