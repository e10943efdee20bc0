"""Fourier-domain objects behind the restricted isometry analysis.

Conventions: the DFT matrix is unnormalized, ``F[w, l] = exp(-2j pi w l / n)``,
so ``F F^* = n I``.  ``S`` is the downward cyclic shift,
``(S^k x)[l] = x[(l - k) mod n]``, and ``M = diag(exp(-2j pi w / n))`` is the
matching modulation, ``F S^k = M^k F``.

Everything here is dense ``n x n`` and meant for verification at small
sizes; the fast operator paths live in :mod:`circsense.circulant`.
"""

from dataclasses import dataclass

import numpy as np

from circsense.circulant import DENSE_LIMIT, SampleSet

PROJECTOR_TOL = 1e-9


def _check_dense(n, limit=DENSE_LIMIT):
    if n > limit:
        raise ValueError(f"n={n} exceeds the dense limit {limit}")


def dft_matrix(n):
    w = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(w, w) / n)


def shift_matrix(n, k):
    """Dense ``S^k``; ``shift_matrix(n, k) @ x == np.roll(x, k)``."""
    rows = np.arange(n)
    S = np.zeros((n, n))
    S[rows, (rows - k) % n] = 1.0
    return S


def modulation_diagonal(n, k=1):
    """Diagonal of ``M^k``."""
    return np.exp(-2j * np.pi * np.arange(n) * k / n)


def modulation_deviation(n, k):
    """Largest entrywise gap between ``F S^k`` and ``M^k F``."""
    n, k = int(n), int(k)
    if not 0 <= k < n:
        raise ValueError(f"need 0 <= k < n, got k={k}, n={n}")
    _check_dense(n)
    F = dft_matrix(n)
    lhs = F @ shift_matrix(n, k)
    rhs = modulation_diagonal(n, k)[:, None] * F
    return float(np.max(np.abs(lhs - rhs)))


def modulation_identity_check(n, k, tol=1e-10):
    """True iff ``F S^k`` and ``M^k F`` agree entrywise to ``tol``."""
    return modulation_deviation(n, k) <= tol


@dataclass(frozen=True, eq=False)
class FourierProjector:
    """``n^{-1} F P_Omega F^{-1}`` for the coordinate projector ``P_Omega``."""

    matrix: np.ndarray
    source: SampleSet

    @property
    def n(self):
        return self.source.n

    @property
    def m(self):
        return self.source.m


def fourier_projector(samples):
    n = samples.n
    _check_dense(n)
    F = dft_matrix(n)
    # F^{-1} = F^* / n
    P = (F[:, samples.indices] @ F[:, samples.indices].conj().T) / n**2
    return FourierProjector(P, samples)


def projector_deviations(matrix, m):
    """Largest violation of each structural property of a Fourier projector.

    Returns a dict with keys ``circulant``, ``conjugate_symmetric``,
    ``diagonal``, ``off_diagonal``, ``row_energy``, ``eigenvalues``,
    ``spectral_norm`` and ``frobenius``.  Every value is an absolute
    deviation; zero means the property holds exactly.
    """
    P = np.asarray(matrix)
    n = P.shape[0]
    level = m / n**2
    idx = np.arange(n)
    ref = P[0, (idx[None, :] - idx[:, None]) % n]
    out = {}
    out["circulant"] = float(np.max(np.abs(P - ref)))
    out["conjugate_symmetric"] = float(np.max(np.abs(P - P.conj().T)))
    out["diagonal"] = float(np.max(np.abs(np.diag(P) - level)))
    off = np.abs(P[~np.eye(n, dtype=bool)])
    out["off_diagonal"] = float(max(0.0, np.max(off, initial=0.0) - level))
    energy = np.abs(P) ** 2
    row_dev = np.abs(energy.sum(axis=1) - m / n**3)
    col_dev = np.abs(energy.sum(axis=0) - m / n**3)
    out["row_energy"] = float(max(row_dev.max(), col_dev.max()))
    eig = np.linalg.eigvalsh((P + P.conj().T) / 2)
    expected = np.concatenate([np.zeros(n - m), np.full(m, 1.0 / n)])
    out["eigenvalues"] = float(np.max(np.abs(np.sort(eig) - expected)))
    out["spectral_norm"] = float(abs(np.linalg.norm(P, 2) - 1.0 / n))
    out["frobenius"] = float(abs(np.linalg.norm(P, "fro") ** 2 - level))
    return out


def _check_membership(x, s=None):
    x = np.asarray(x)
    norm = np.linalg.norm(x)
    if norm > 1.0 + 1e-12:
        raise ValueError(f"x is outside the unit ball (||x||_2 = {norm:.6g})")
    if s is not None and np.count_nonzero(x) > s:
        raise ValueError(f"x has {np.count_nonzero(x)} nonzeros, more than s={s}")
    return x


def chaos_value(op, x, s=None):
    """``x^*(A^*A - I)x = ||A x||^2 - ||x||^2`` through two fast transforms.

    ``x`` must lie in the unit ball and, when ``s`` is given, have at most
    ``s`` nonzeros; violations raise ``ValueError``.
    """
    x = _check_membership(x, s)
    return float(np.linalg.norm(op.apply(x)) ** 2 - np.linalg.norm(x) ** 2)


def _shifted_restrictions(x, samples):
    # W[i, k] = (S^k x)[Omega_i] = x[(Omega_i - k) mod n]
    n = samples.n
    return np.asarray(x)[(samples.indices[:, None] - np.arange(n)[None, :]) % n]


def chaos_value_time(signs, samples, x):
    """Off-diagonal shift-sum form of the chaos process.

    ``(1/m) sum_{k != l} conj(e_k) e_l <S^k x, P_Omega S^l x>`` with
    ``e = signs``.  For unimodular signs (Rademacher) this equals
    ``||A x||^2 - ||x||^2`` of the operator generated by ``signs``.
    """
    eps = np.asarray(signs)
    W = _shifted_restrictions(x, samples)
    H = W.conj().T @ W
    np.fill_diagonal(H, 0.0)
    return float(np.real(eps.conj() @ H @ eps) / samples.m)


def chaos_value_fourier(signs, samples, x, projector=None):
    """The same process written with modulations of ``x_hat = F x``.

    Sums ``(1/m) conj(e_k) e_l x_hat^* M^{-k} P_hat M^l x_hat`` over
    ``k != l``.
    """
    eps = np.asarray(signs)
    n = samples.n
    _check_dense(n)
    P = fourier_projector(samples).matrix if projector is None else np.asarray(projector)
    xhat = np.fft.fft(x)
    # column l holds M^l x_hat
    V = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) * xhat[:, None]
    H = V.conj().T @ P @ V
    np.fill_diagonal(H, 0.0)
    return float(np.real(eps.conj() @ H @ eps) / samples.m)


@dataclass(frozen=True, eq=False)
class ChaosMatrix:
    """Hollow Hermitian matrix ``Z`` with ``G_x = <eps, Z eps>``."""

    matrix: np.ndarray
    x: np.ndarray

    def quadratic_form(self, eps):
        eps = np.asarray(eps)
        return float(np.real(eps.conj() @ self.matrix @ eps))


def chaos_matrix(x, samples, m=None, s=None):
    """``Z_x = (1/m)(B - diag(B))`` with ``B = F^* X^* P_hat X F``, ``X = diag(F x)``."""
    x = _check_membership(x, s)
    n = samples.n
    _check_dense(n)
    m = samples.m if m is None else int(m)
    F = dft_matrix(n)
    xhat = F @ x
    P = fourier_projector(samples).matrix
    B = F.conj().T @ (xhat.conj()[:, None] * P * xhat[None, :]) @ F
    np.fill_diagonal(B, 0.0)
    return ChaosMatrix(B / m, x)
