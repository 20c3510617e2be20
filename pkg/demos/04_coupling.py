"""The acceptance-rejection coupling on a low-density ball.

Points inside S come from the observed sample; the coupled proposals are
uniform on S, and the number of proposals needed has a known mean and variance.
"""
# %%
from maxgap.experiments import mc_coupling
from maxgap.sampling import CappedBall, coupled_sample, coupling_moments

# %%
spec = CappedBall.with_volume(0.1, 2, level=0.4)
cloud, trace = coupled_sample(spec, 1000, epsilon=0.5, seed=4)
print(f"N_n = {trace.N_n} points in S, L_n = {trace.L_n} proposals, kappa = {trace.kappa:.2f}")
print("theory (mean, var):", coupling_moments(1000, 0.5, spec.ball_volume, spec.p))

# %%
rep = mc_coupling(1000, 0.5, spec, reps=100, seed=4)
print(f"violations: {rep.subsample_violations} + {rep.tilde_violations}")
print(f"E L = {rep.L_mean:.2f} +/- {rep.L_mean_se:.2f}, Var L = {rep.L_var:.1f} +/- {rep.L_var_se:.1f}")
