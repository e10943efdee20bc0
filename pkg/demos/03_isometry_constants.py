# %% [markdown]
# # Restricted isometry constants
#
# delta_s is the worst spectral deviation from the identity over all
# s-column Gram submatrices. For small n we can enumerate every support;
# otherwise we sample supports and sharpen each one by power iteration,
# which gives a lower bound.

# %%
import numpy as np

from circsense import rip
from circsense.circulant import PartialCirculantOperator, make_generator, sample_set

op = PartialCirculantOperator(make_generator("deterministic", 4, values=[1, 1, -1, 1]),
                              sample_set(4, 2, "equispaced"))
est = rip.exact_rip(op, 2)
print(est.delta, est.witness_support)

# %% [markdown]
# On a random instance the sampled estimate stays under the exact value
# and approaches it as trials accumulate.

# %%
op = rip.draw_operator("rademacher", 40, 16, "uniform", seed=1, tag="demo", index=0)
exact = rip.exact_rip(op, 3).delta
for trials in (1, 10, 100, 1000):
    print(trials, rip.monte_carlo_rip(op, 3, trials=trials, seed=2).delta, "<=", exact)

# %% [markdown]
# Averaging over random operators shows the decay in m. The bound
# formulas carry constants nobody knows, so they are only comparable in
# shape; the ratio column should stay roughly flat.

# %%
params = rip.BoundParams()
for row in rip.mean_delta("rademacher", 64, [8, 16, 32, 64], 2, draws=40, seed=0):
    bound = rip.theoretical_mean_bound(params, 64, row.m, 2)
    print(f"m={row.m:3d}  mean={row.mean:.3f} +- {row.stderr:.3f}  bound(c1=1)={bound:.3f}  ratio={row.mean / bound:.3f}")

# %% [markdown]
# The spread of delta_s around its mean has a Gaussian-looking tail:
# log P(delta >= mean + lambda) falls off roughly linearly in lambda^2.

# %%
prof = rip.tail_profile("rademacher", 64, 32, 2, draws=400, lambda_grid=np.linspace(0, 0.3, 7), seed=0)
for lam, p in zip(prof.lambdas, prof.exceed_prob):
    print(f"lambda={lam:.2f}  P={p:.3f}")
print("fitted slope of log P against lambda^2:", prof.slope)
