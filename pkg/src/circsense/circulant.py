"""Partial circulant measurement operators.

The circulant matrix generated by a pulse ``phi`` has entries
``C[i, j] = phi[(i - j) mod n]``, so its first column is ``phi`` itself and
``C @ x`` is the circular convolution ``phi * x``.  A partial circulant
operator keeps the rows listed in a sample set and scales by ``1/sqrt(m)``.

Fast paths use the FFT (any ``n``, not only powers of two); the dense
:func:`materialize` path exists as an oracle and is capped at
:data:`DENSE_LIMIT` columns.
"""

from dataclasses import dataclass, field

import numpy as np

from circsense import rng

DENSE_LIMIT = 4096

MODELS = ("rademacher", "gaussian", "fourier-bernoulli", "deterministic")

# Imaginary residue tolerated when a real operator acts on a real vector,
# relative to ||x||_2.
IMAG_TOL = 1e-10


class TransformError(RuntimeError):
    """Raised when a real-valued transform leaves a non-negligible imaginary part."""


@dataclass(frozen=True, eq=False)
class GeneratorSequence:
    """A length-n pulse together with how it was produced.

    Attributes
    ----------
    values : ndarray
        The pulse, real for every model except ``fourier-bernoulli``.
    model : str
        One of :data:`MODELS`.
    seed : int
        Seed used to draw the values (ignored for ``deterministic``).
    """

    values: np.ndarray
    model: str
    seed: int = 0

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("generator must be a non-empty 1-d vector")
        if self.model not in MODELS:
            raise ValueError(f"unknown generator model {self.model!r}")
        if not np.iscomplexobj(values):
            values = values.astype(float)
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self):
        return self.values.size

    @property
    def is_real(self):
        return not np.iscomplexobj(self.values)


def make_generator(model, n, seed=0, values=None):
    """Draw a generator sequence.

    Parameters
    ----------
    model : {"rademacher", "gaussian", "fourier-bernoulli", "deterministic"}
        ``rademacher`` draws i.i.d. signs; ``gaussian`` i.i.d. N(0, 1);
        ``fourier-bernoulli`` returns ``sqrt(n) * ifft(eps)`` for a sign
        vector ``eps``, a complex pulse whose DFT has constant modulus
        ``sqrt(n)``.  ``deterministic`` uses ``values`` when given and the
        unit impulse otherwise.
    n : int
        Length of the pulse.
    seed : int
        Any integer; the same ``(model, n, seed)`` always gives the same
        values.
    values : array_like, optional
        Explicit pulse for the ``deterministic`` model.
    """
    if model not in MODELS:
        raise ValueError(f"unknown generator model {model!r}")
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    if model == "deterministic":
        if values is None:
            values = np.zeros(n)
            values[0] = 1.0
        values = np.asarray(values)
        if values.shape != (n,):
            raise ValueError(f"expected {n} generator values, got shape {values.shape}")
        return GeneratorSequence(values, model, int(seed))
    if values is not None:
        raise ValueError("explicit values are only accepted for the deterministic model")

    g = rng.stream(seed, f"generator/{model}", n)
    if model == "rademacher":
        vals = 2.0 * g.integers(0, 2, size=n) - 1.0
    elif model == "gaussian":
        vals = g.standard_normal(n)
    else:
        signs = 2.0 * g.integers(0, 2, size=n) - 1.0
        vals = np.sqrt(n) * np.fft.ifft(signs)
    return GeneratorSequence(vals, model, int(seed))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Strictly increasing row indices kept from the circulant output."""

    indices: np.ndarray
    n: int

    def __post_init__(self):
        idx = np.asarray(self.indices)
        n = int(self.n)
        if idx.ndim != 1 or idx.size < 1:
            raise ValueError("sample set must contain at least one index")
        if not np.issubdtype(idx.dtype, np.integer):
            if not np.all(np.equal(np.mod(idx, 1), 0)):
                raise ValueError("sample indices must be integers")
        idx = idx.astype(np.intp)
        if idx.size > n:
            raise ValueError(f"sample set larger than n={n}")
        if idx[0] < 0 or idx[-1] >= n:
            raise ValueError(f"sample indices must lie in [0, {n - 1}]")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("sample indices must be strictly increasing")
        idx = idx.copy()
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "n", n)

    @property
    def m(self):
        return self.indices.size

    def __len__(self):
        return self.indices.size


OMEGA_MODES = ("uniform", "consecutive", "equispaced")


def sample_set(n, m, mode="uniform", generator=None):
    """Choose ``m`` of ``n`` output samples.

    ``uniform`` draws a subset without replacement (needs ``generator``),
    ``consecutive`` keeps ``0..m-1`` and ``equispaced`` keeps
    ``floor(k n / m)``.
    """
    n, m = int(n), int(m)
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if mode == "uniform":
        if generator is None:
            raise ValueError("uniform sampling needs a random generator")
        idx = np.sort(generator.choice(n, size=m, replace=False))
    elif mode == "consecutive":
        idx = np.arange(m)
    elif mode == "equispaced":
        idx = (np.arange(m) * n) // m
    else:
        raise ValueError(f"unknown omega mode {mode!r}")
    return SampleSet(idx, n)


def _real_part(z, x_norm, what):
    resid = np.max(np.abs(z.imag), initial=0.0)
    if resid > IMAG_TOL * max(x_norm, np.finfo(float).tiny):
        raise TransformError(
            f"{what}: imaginary residue {resid:.3e} exceeds {IMAG_TOL:g} * ||x||"
        )
    return z.real.copy()


def _check_vector(x, length, name):
    x = np.asarray(x)
    if x.shape != (length,):
        raise ValueError(f"{name} must have shape ({length},), got {x.shape}")
    return x


def circulant_apply(generator, x):
    """Circular convolution ``phi * x`` (the full n x n circulant times ``x``)."""
    phi = generator.values if isinstance(generator, GeneratorSequence) else np.asarray(generator)
    n = phi.size
    x = _check_vector(x, n, "x")
    z = np.fft.ifft(np.fft.fft(phi) * np.fft.fft(x))
    if np.iscomplexobj(phi) or np.iscomplexobj(x):
        return z
    return _real_part(z, np.linalg.norm(x), "circulant_apply")


@dataclass(frozen=True, eq=False)
class PartialCirculantOperator:
    """``(1/sqrt(m)) R_Omega C(phi)`` with the pulse spectrum cached.

    Instances are immutable and can be shared between threads.
    """

    generator: GeneratorSequence
    samples: SampleSet
    fhat: np.ndarray = field(init=False, repr=False)
    scale: float = field(init=False)

    def __post_init__(self):
        if self.generator.n != self.samples.n:
            raise ValueError(
                f"generator length {self.generator.n} != sample-set dimension {self.samples.n}"
            )
        fhat = np.fft.fft(self.generator.values)
        fhat.setflags(write=False)
        object.__setattr__(self, "fhat", fhat)
        object.__setattr__(self, "scale", 1.0 / np.sqrt(self.samples.m))

    @property
    def n(self):
        return self.samples.n

    @property
    def m(self):
        return self.samples.m

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def is_real(self):
        return self.generator.is_real

    def apply(self, x):
        x = _check_vector(x, self.n, "x")
        z = np.fft.ifft(self.fhat * np.fft.fft(x))[self.samples.indices]
        if self.is_real and not np.iscomplexobj(x):
            z = _real_part(z, np.linalg.norm(x), "apply")
        return self.scale * z

    def adjoint(self, y):
        y = _check_vector(y, self.m, "y")
        full = np.zeros(self.n, dtype=np.result_type(y.dtype, float))
        full[self.samples.indices] = y
        z = np.fft.ifft(np.conj(self.fhat) * np.fft.fft(full))
        if self.is_real and not np.iscomplexobj(y):
            z = _real_part(z, np.linalg.norm(y), "adjoint")
        return self.scale * z

    def column(self, j):
        """Column ``j`` of the dense matrix, built without materializing it."""
        idx = (self.samples.indices - int(j)) % self.n
        return self.scale * self.generator.values[idx]

    def columns(self, support):
        """Dense ``m x len(support)`` submatrix of the selected columns."""
        support = np.asarray(support, dtype=np.intp)
        idx = (self.samples.indices[:, None] - support[None, :]) % self.n
        return self.scale * self.generator.values[idx]

    def materialize(self, limit=DENSE_LIMIT):
        if self.n > limit:
            raise ValueError(f"n={self.n} exceeds the dense limit {limit}")
        return self.columns(np.arange(self.n))


def make_operator(generator, samples):
    return PartialCirculantOperator(generator, samples)


def apply(op, x):
    """``op @ x`` through the fast path."""
    return op.apply(x)


def adjoint(op, y):
    """Conjugate-transpose action ``op^* @ y``."""
    return op.adjoint(y)


def materialize(op, limit=DENSE_LIMIT):
    """Dense ``m x n`` matrix with entries ``scale * phi[(Omega[i] - j) mod n]``."""
    return op.materialize(limit)


def toeplitz_generator(first_column, first_row):
    """Pack a Toeplitz matrix's diagonals in wrap order.

    Returns ``(t_0, t_1, ..., t_{n-1}, t_{-(n-1)}, ..., t_{-1})`` where
    ``T[i, j] = t_{i-j}``; this is the layout :func:`toeplitz_operator` expects.
    """
    col = np.asarray(first_column)
    row = np.asarray(first_row)
    if col.shape != row.shape or col.ndim != 1:
        raise ValueError("first column and first row must be 1-d with equal length")
    return np.concatenate([col, row[:0:-1]])


class ToeplitzOperator:
    """Selected rows of an n x n Toeplitz matrix, applied through a 2n circulant.

    Unlike :class:`PartialCirculantOperator` this map is not rescaled:
    ``apply(x)`` equals ``T[rows] @ x`` exactly.
    """

    def __init__(self, diagonals, rows, n):
        n = int(n)
        diagonals = np.asarray(diagonals)
        if diagonals.ndim != 1 or diagonals.size < 2 * n - 1:
            raise ValueError(f"need at least {2 * n - 1} diagonal values for n={n}")
        diagonals = diagonals[: 2 * n - 1]
        # t_0..t_{n-1} at 0..n-1, slot n unused, t_{-(n-1)}..t_{-1} at n+1..2n-1
        col = np.zeros(2 * n, dtype=diagonals.dtype if np.iscomplexobj(diagonals) else float)
        col[:n] = diagonals[:n]
        col[n + 1 :] = diagonals[n:]
        rows = np.asarray(rows, dtype=np.intp)
        if rows.size and (rows.min() < 0 or rows.max() >= n):
            raise ValueError(f"Toeplitz row indices must lie in [0, {n - 1}]")
        self.n = n
        self.circulant = PartialCirculantOperator(
            GeneratorSequence(col, "deterministic"), SampleSet(rows, 2 * n)
        )
        self._unscale = np.sqrt(self.circulant.m)

    @property
    def m(self):
        return self.circulant.m

    @property
    def shape(self):
        return (self.m, self.n)

    def apply(self, x):
        x = _check_vector(x, self.n, "x")
        padded = np.concatenate([x, np.zeros(self.n, dtype=x.dtype)])
        return self._unscale * self.circulant.apply(padded)

    def adjoint(self, y):
        return self._unscale * self.circulant.adjoint(y)[: self.n]


def toeplitz_operator(diagonals, row_indices, n):
    """Map ``x -> T[row_indices] @ x`` for the Toeplitz matrix with ``T[i, j] = t_{i-j}``.

    ``diagonals`` is in the wrap order produced by :func:`toeplitz_generator`.
    """
    return ToeplitzOperator(diagonals, row_indices, n)
