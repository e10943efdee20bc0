# %% [markdown]
# # Recovering sparse signals
#
# We measure an s-sparse vector with a partial circulant operator and
# hand the measurements to four solvers. All of them only touch the
# operator through `apply` and `adjoint`.

# %%
import numpy as np

from circsense import recovery
from circsense.circulant import PartialCirculantOperator, make_generator, sample_set

rng = np.random.default_rng(7)
n, m, s = 512, 128, 5
op = PartialCirculantOperator(make_generator("rademacher", n, seed=7), sample_set(n, m, "uniform", rng))
x0 = np.zeros(n)
x0[rng.choice(n, s, replace=False)] = rng.standard_normal(s)
problem = recovery.RecoveryProblem(op, op.apply(x0), s)

for alg in recovery.ALGORITHMS:
    rep = recovery.recover(alg, problem)
    err = np.linalg.norm(rep.xhat - x0) / np.linalg.norm(x0)
    print(f"{alg:7s} rel err {err:.1e}  iterations {rep.iterations}")

# %% [markdown]
# With noise of norm tau, the error should scale with tau. The stability
# ratio divides the error by tau (plus the best s-term tail of x0, which
# is zero here), so it stays bounded.

# %%
e = rng.standard_normal(m)
for tau in (1e-4, 1e-3, 1e-2):
    noisy = recovery.RecoveryProblem(op, op.apply(x0) + tau * e / np.linalg.norm(e), s, tau=tau)
    rep = recovery.htp(noisy)
    print(tau, recovery.stability_ratio(x0, rep.xhat, s, tau))

# %% [markdown]
# For small problems the exact isometry constant can certify a solver in
# advance. Each algorithm has its own order kappa*s and threshold.

# %%
small = PartialCirculantOperator(make_generator("gaussian", 12, seed=3), sample_set(12, 12, "consecutive"))
for alg in recovery.ALGORITHMS:
    cert = recovery.rip_certificate_check(small, alg, 1)
    print(alg, cert.kappa, round(cert.delta_star, 4), round(cert.delta_measured, 4), cert.certified)
