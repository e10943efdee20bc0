# %% [markdown]
# # Partial circulant operators
#
# A circulant matrix is fixed by its first column. Every other column is a
# cyclic shift of it, so multiplying by the matrix is a circular
# convolution and costs two FFTs instead of n^2 multiplications.

# %%
import numpy as np

from circsense import (
    PartialCirculantOperator,
    circulant_apply,
    make_generator,
    materialize,
    sample_set,
    toeplitz_generator,
    toeplitz_operator,
)

phi = make_generator("deterministic", 4, values=[1, 1, -1, 1])
x = np.array([1.0, 2.0, 0.0, -1.0])
print(circulant_apply(phi, x))  # [ 2.  4.  0. -2.]

# %% [markdown]
# Keeping only some rows and dividing by sqrt(m) gives the measurement
# operator. Here we keep rows 0 and 2 and look at the dense matrix.

# %%
op = PartialCirculantOperator(phi, sample_set(4, 2, "equispaced"))
print(op.samples.indices)
print(materialize(op) * np.sqrt(2))

# %% [markdown]
# Random pulses are the interesting case. With Rademacher signs every
# column has unit norm; the fast path and the dense matrix agree to
# rounding error.

# %%
rng = np.random.default_rng(0)
n, m = 256, 64
op = PartialCirculantOperator(make_generator("rademacher", n, seed=1), sample_set(n, m, "uniform", rng))
A = materialize(op)
v = rng.standard_normal(n)
print("column norms", np.linalg.norm(A, axis=0)[:4])
print("fast vs dense", np.max(np.abs(op.apply(v) - A @ v)))
w = rng.standard_normal(m)
print("<w, Av> - <A*w, v> =", np.vdot(w, op.apply(v)) - np.vdot(op.adjoint(w), v))

# %% [markdown]
# Toeplitz matrices are handled by embedding into a circulant of twice the
# size, so the same FFT machinery applies.

# %%
T_op = toeplitz_operator(toeplitz_generator([2.0, -1.0, -1.0], [2.0, 1.0, 0.0]), [0, 1, 2], 3)
print(T_op.apply(np.ones(3)))  # [3. 2. 0.]
