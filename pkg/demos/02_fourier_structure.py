# %% [markdown]
# # Fourier structure of the sampling pattern
#
# Conjugating the row selector by the DFT gives a small dense matrix whose
# properties drive the whole analysis. It is circulant and Hermitian, with
# a constant diagonal m/n^2 and exactly m eigenvalues equal to 1/n.

# %%
import numpy as np

from circsense import spectral
from circsense.circulant import PartialCirculantOperator, make_generator, sample_set

samples = sample_set(16, 5, "uniform", np.random.default_rng(3))
P = spectral.fourier_projector(samples).matrix
print(np.round(np.diag(P).real * 16**2, 12))
print(np.round(np.sort(np.linalg.eigvalsh(P)) * 16, 12))

# %% [markdown]
# `projector_deviations` measures how far a matrix is from each of those
# properties. For the real thing every entry is at rounding level.

# %%
for name, dev in spectral.projector_deviations(P, samples.m).items():
    print(f"{name:20s} {dev:.1e}")

# %% [markdown]
# The DFT turns cyclic shifts into modulations. That identity is what lets
# the deviation of a sparse vector be rewritten in the Fourier domain.

# %%
print(spectral.modulation_deviation(16, 5))

# %% [markdown]
# For a Rademacher pulse, the isometry defect of a unit vector x,
# ||A x||^2 - ||x||^2, is a quadratic form in the signs with a hollow
# matrix Z_x. Four ways of computing it agree.

# %%
n = 24
op = PartialCirculantOperator(make_generator("rademacher", n, seed=5), sample_set(n, 8, "uniform", np.random.default_rng(5)))
x = np.zeros(n)
x[[2, 9, 17]] = [0.6, -0.64, 0.48]
eps = op.generator.values
print(spectral.chaos_value(op, x, s=3))
print(spectral.chaos_value_time(eps, op.samples, x))
print(spectral.chaos_value_fourier(eps, op.samples, x))
print(spectral.chaos_matrix(x, op.samples).quadratic_form(eps))
