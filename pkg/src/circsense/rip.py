"""Restricted isometry constants: exact enumeration, Monte Carlo, statistics.

``delta_s`` of a matrix ``A`` is the largest spectral deviation
``||A_S^* A_S - I||`` over column subsets ``S`` of size ``s``.  For small
problems :func:`exact_rip` enumerates every support; :func:`monte_carlo_rip`
samples supports and refines each one by power iteration, which always
yields a lower bound.

The theoretical bound evaluators carry unspecified universal constants
(``c1``, ``c2``, ``c3``, default 1.0).  Their outputs are for comparing
shapes only, never absolute predictions.
"""

import functools
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from circsense import rng
from circsense.circulant import (
    DENSE_LIMIT,
    PartialCirculantOperator,
    make_generator,
    sample_set,
)

ENUMERATION_BUDGET = 2_000_000
SHAPE_ONLY_NOTE = "unspecified universal constants - shape comparison only"

_CHUNK = 200_000
_CACHE_ROWS = 500_000


class BudgetExceeded(ValueError):
    """The number of supports to enumerate is above the configured budget."""


@dataclass
class RipEstimate:
    """Estimated restricted isometry constant of order ``s``.

    ``witness_support`` attains the value for the exact method and is the
    best sampled support for Monte Carlo; ``witness_vector`` is the unit
    vector (on that support) whose deviation was recorded, when known.
    """

    delta: float
    s: int
    method: str
    witness_support: tuple = ()
    trials: int = 0
    witness_vector: np.ndarray = field(default=None, repr=False)


@dataclass
class TailProfile:
    lambdas: np.ndarray
    exceed_prob: np.ndarray
    exceed_count: np.ndarray
    draws: int
    empirical_mean: float
    slope: float
    deltas: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class BoundParams:
    """Universal constants of the mean, sample-count and tail bounds.

    The defaults are placeholders (1.0); no values are known.
    """

    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0

    def __post_init__(self):
        for name in ("c1", "c2", "c3"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a finite non-negative number, got {value}")


# ---------------------------------------------------------------------------
# Gram matrices and support enumeration


def gram_matrix(op, limit=DENSE_LIMIT):
    """``A^* A`` computed as ``(R^* R) / m`` on the unscaled rows.

    Dividing once at the end keeps integer-valued generators exact, so
    Rademacher operators get a unit diagonal with no rounding.
    """
    if op.n > limit:
        raise ValueError(f"n={op.n} exceeds the dense limit {limit}")
    if isinstance(op, PartialCirculantOperator):
        idx = (op.samples.indices[:, None] - np.arange(op.n)[None, :]) % op.n
        R = op.generator.values[idx]
        return (R.conj().T @ R) / op.m
    A = op.materialize(limit) if hasattr(op, "materialize") else np.asarray(op.matrix)
    return A.conj().T @ A


@functools.lru_cache(maxsize=8)
def _cached_combinations(n, s):
    arr = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(n), s)),
        dtype=np.intp,
        count=math.comb(n, s) * s,
    ).reshape(-1, s)
    arr.setflags(write=False)
    return arr


def support_chunks(n, s, chunk=_CHUNK):
    """Yield all size-``s`` supports of ``range(n)`` as ``(k, s)`` arrays, lexicographically."""
    total = math.comb(n, s)
    if total <= _CACHE_ROWS:
        combos = _cached_combinations(n, s)
        for start in range(0, total, chunk):
            yield combos[start : start + chunk]
        return
    it = itertools.combinations(range(n), s)
    while True:
        block = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(it, chunk)), dtype=np.intp
        )
        if block.size == 0:
            return
        yield block.reshape(-1, s)


def _deviation_blocks(G, supports):
    s = supports.shape[1]
    D = G[supports[:, :, None], supports[:, None, :]]
    D = D - np.eye(s)
    return D


def support_deviation(G, support):
    """``||G_S - I||`` for one support (symmetric eigensolve)."""
    support = np.asarray(support, dtype=np.intp)
    D = G[np.ix_(support, support)] - np.eye(support.size)
    return float(np.max(np.abs(np.linalg.eigvalsh(D))))


def _check_order(n, s):
    s = int(s)
    if s < 1:
        raise ValueError("sparsity s must be at least 1")
    if s > n:
        raise ValueError(f"s={s} exceeds n={n}")
    return s


def exact_rip(op, s, budget=ENUMERATION_BUDGET, gram=None):
    """Exact ``delta_s`` by enumerating every size-``s`` support.

    Raises :class:`BudgetExceeded` when ``C(n, s) > budget``.  Ties are
    resolved in favour of the lexicographically first support.
    """
    n = op.shape[1]
    s = _check_order(n, s)
    count = math.comb(n, s)
    if count > budget:
        raise BudgetExceeded(f"C({n}, {s}) = {count} supports exceeds budget {budget}")
    G = gram_matrix(op) if gram is None else gram
    best, best_support = -1.0, None
    for block in support_chunks(n, s):
        dev = np.max(np.abs(np.linalg.eigvalsh(_deviation_blocks(G, block))), axis=1)
        k = int(np.argmax(dev))
        if dev[k] > best:
            best, best_support = float(dev[k]), tuple(int(i) for i in block[k])
    return RipEstimate(best, s, "exact", best_support)


# ---------------------------------------------------------------------------
# Monte Carlo


def _batched_power(D, v, steps, tol=None):
    """Power iteration on each ``D[b]`` followed by a Rayleigh-Ritz step.

    The Ritz step on ``span{v, Dv}`` resolves eigenvalue pairs ``+l, -l`` of
    equal modulus, where plain power iteration oscillates.  Returns the
    extreme Ritz value per batch entry and its unit Ritz vector; every value
    is attained by that vector, so it never exceeds ``||D[b]||``.
    """
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    prev = None
    for _ in range(steps):
        w = np.einsum("bij,bj->bi", D, v)
        nrm = np.linalg.norm(w, axis=1, keepdims=True)
        zero = nrm[:, 0] == 0
        nrm[zero] = 1.0
        w = w / nrm
        w[zero] = v[zero]
        v = w
        if tol is not None:
            rq = np.abs(np.einsum("bi,bij,bj->b", v.conj(), D, v))
            if prev is not None and np.max(np.abs(rq - prev)) <= tol:
                break
            prev = rq
    Dv = np.einsum("bij,bj->bi", D, v)
    a = np.real(np.einsum("bi,bi->b", v.conj(), Dv))
    r = Dv - a[:, None] * v
    beta = np.linalg.norm(r, axis=1)
    scale = np.maximum(np.abs(a), np.max(np.abs(D), axis=(1, 2)))
    krylov = beta > 1e-13 * np.maximum(scale, 1e-300)
    q = np.zeros_like(v)
    q[krylov] = r[krylov] / beta[krylov, None]
    Dq = np.einsum("bij,bj->bi", D, q)
    c = np.real(np.einsum("bi,bi->b", q.conj(), Dq))
    # 2x2 projected matrix [[a, beta], [beta, c]]
    mid, half = (a + c) / 2, np.hypot((a - c) / 2, beta)
    lam_hi, lam_lo = mid + half, mid - half
    take_hi = np.abs(lam_hi) >= np.abs(lam_lo)
    lam = np.where(take_hi, lam_hi, lam_lo)
    lam = np.where(krylov, lam, a)
    # eigenvector of [[a, b], [b, c]] for eigenvalue lam: (b, lam - a)
    ca, cb = beta, lam - a
    norm = np.hypot(ca, cb)
    safe = krylov & (norm > 0)
    ca = np.where(safe, ca / np.where(norm > 0, norm, 1), 1.0)
    cb = np.where(safe, cb / np.where(norm > 0, norm, 1), 0.0)
    vec = ca[:, None] * v + cb[:, None] * q
    return np.abs(lam), vec


def _support_blocks(op, supports):
    if isinstance(op, PartialCirculantOperator):
        m = op.m
        idx = (op.samples.indices[None, :, None] - supports[:, None, :]) % op.n
        R = op.generator.values[idx]  # (B, m, s), unscaled
        D = np.einsum("bki,bkj->bij", R.conj(), R) / m
    else:
        A = op.materialize() if hasattr(op, "materialize") else np.asarray(op.matrix)
        cols = A[:, supports]  # (m, B, s)
        D = np.einsum("kbi,kbj->bij", cols.conj(), cols)
    return D - np.eye(supports.shape[1])


def monte_carlo_rip(op, s, trials=1000, seed=0, steps=50, supports=None, tol=None):
    """Lower bound on ``delta_s`` from random supports refined by power iteration.

    Trial ``t`` uses its own random stream keyed by ``(seed, t)``: a uniform
    random support and Gaussian start vector, then ``steps`` power
    iterations on ``A_S^* A_S - I``.  Because trials are keyed
    independently, running more trials never lowers the estimate.

    Passing ``supports="all"`` sweeps every support instead (``trials`` is
    ignored) and iterates to ``tol`` (default 1e-12) with a cap of 1000 steps.
    """
    n = op.shape[1]
    s = _check_order(n, s)
    cdtype = complex if np.iscomplexobj(getattr(getattr(op, "generator", None), "values", 0.0)) else float
    if supports == "all":
        tol = 1e-12 if tol is None else tol
        steps = max(steps, 1000)
        best, best_support, best_vec, count = -1.0, None, None, 0
        start = rng.stream(seed, "mc-rip/all")
        for block in support_chunks(n, s, chunk=20_000):
            D = _support_blocks(op, block)
            v0 = start.standard_normal((block.shape[0], s)).astype(cdtype)
            vals, vecs = _batched_power(D, v0, steps, tol)
            k = int(np.argmax(vals))
            count += block.shape[0]
            if vals[k] > best:
                best, best_support, best_vec = float(vals[k]), block[k], vecs[k]
        return _mc_estimate(best, s, best_support, best_vec, n, count)

    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    sups = np.empty((trials, s), dtype=np.intp)
    v0 = np.empty((trials, s))
    for t in range(trials):
        g = rng.stream(seed, "mc-rip", t)
        sups[t] = np.sort(g.choice(n, size=s, replace=False))
        v0[t] = g.standard_normal(s)
    vals = np.empty(trials)
    vecs = np.empty((trials, s), dtype=cdtype)
    for start in range(0, trials, 20_000):
        sl = slice(start, start + 20_000)
        vals[sl], vecs[sl] = _batched_power(
            _support_blocks(op, sups[sl]), v0[sl].astype(cdtype), steps, tol
        )
    k = int(np.argmax(vals))
    return _mc_estimate(float(vals[k]), s, sups[k], vecs[k], n, trials)


def _mc_estimate(delta, s, support, vec, n, trials):
    x = np.zeros(n, dtype=vec.dtype)
    x[support] = vec
    return RipEstimate(
        delta, s, "monte-carlo", tuple(int(i) for i in support), trials, witness_vector=x
    )


def estimate_rip(op, s, method="auto", budget=ENUMERATION_BUDGET, trials=1000, seed=0):
    """Dispatch to :func:`exact_rip` or :func:`monte_carlo_rip`.

    ``auto`` enumerates when ``C(n, s)`` fits the budget and samples otherwise.
    """
    n = op.shape[1]
    if method == "auto":
        method = "exact" if math.comb(n, int(s)) <= budget else "monte-carlo"
    if method == "exact":
        return exact_rip(op, s, budget)
    if method == "monte-carlo":
        return monte_carlo_rip(op, s, trials, seed)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Statistics over operator draws


def draw_operator(model, n, m, omega_mode, seed, tag, index):
    """Operator for draw ``index`` of an experiment, keyed by ``(seed, tag, index)``."""
    g = rng.stream(seed, tag, index)
    generator = make_generator(model, n, int(g.integers(0, 2**63)))
    samples = sample_set(n, m, omega_mode, g)
    return PartialCirculantOperator(generator, samples)


def run_ordered(fn, items, workers=1):
    """``list(map(fn, items))``, optionally on a thread pool; order is preserved."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sample_deltas(model, n, m, s, draws, seed, omega_mode="uniform", method="auto",
                  trials=1000, budget=ENUMERATION_BUDGET, workers=1, tag=None):
    """``delta_s`` for ``draws`` independent operators, in draw order."""
    tag = tag or f"delta/{model}/{omega_mode}/n={n}/m={m}"

    def one(d):
        op = draw_operator(model, n, m, omega_mode, seed, tag, d)
        return estimate_rip(op, s, method, budget, trials, rng.child_seed(seed, tag + "/mc", d)).delta

    return np.array(run_ordered(one, range(int(draws)), workers))


@dataclass
class MeanDeltaRow:
    m: int
    mean: float
    stderr: float
    draws: int
    method: str


def mean_delta(model, n, m_list, s, draws, seed, omega_mode="uniform", method="auto",
               trials=1000, budget=ENUMERATION_BUDGET, workers=1):
    """Empirical mean and standard error of ``delta_s`` for each ``m``.

    Every ``m`` gets fresh operator draws; results depend only on the
    arguments, not on ``workers``.
    """
    draws = int(draws)
    if draws < 2:
        raise ValueError("need at least 2 draws for a standard error")
    if method == "auto":
        method = "exact" if math.comb(int(n), int(s)) <= budget else "monte-carlo"
    rows = []
    for m in m_list:
        d = sample_deltas(model, n, m, s, draws, seed, omega_mode, method, trials, budget, workers)
        rows.append(MeanDeltaRow(int(m), float(d.mean()), float(d.std(ddof=1) / np.sqrt(draws)),
                                 draws, method))
    return rows


def fit_tail_slope(lambdas, probs, counts, min_count=5):
    """Least-squares slope of ``log(prob)`` against ``lambda**2``.

    Only levels with at least ``min_count`` exceedances enter the fit;
    returns NaN when fewer than two distinct levels qualify.
    """
    keep = np.asarray(counts) >= min_count
    lam2 = np.asarray(lambdas, dtype=float)[keep] ** 2
    if np.unique(lam2).size < 2:
        return float("nan")
    slope, _ = np.polyfit(lam2, np.log(np.asarray(probs)[keep]), 1)
    return float(slope)


def tail_profile(model, n, m, s, draws, lambda_grid=None, seed=0, omega_mode="uniform",
                 method="auto", trials=1000, budget=ENUMERATION_BUDGET, workers=1):
    """Empirical ``P(delta_s >= mean + lambda)`` over a grid of ``lambda``.

    The grid is clipped to ``[0, 1]``; it must contain at least one level.
    """
    grid = np.linspace(0.0, 1.0, 101) if lambda_grid is None else np.asarray(lambda_grid, float)
    if grid.ndim != 1 or grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ValueError("lambda grid must be a non-empty finite 1-d sequence")
    grid = np.unique(np.clip(grid, 0.0, 1.0))
    deltas = sample_deltas(model, n, m, s, draws, seed, omega_mode, method, trials, budget,
                           workers, tag=f"tail/{model}/{omega_mode}/n={n}/m={m}/s={s}")
    mean = float(deltas.mean())
    counts = np.array([np.count_nonzero(deltas >= mean + lam) for lam in grid])
    probs = counts / deltas.size
    slope = fit_tail_slope(grid, probs, counts)
    return TailProfile(grid, probs, counts, int(draws), mean, slope, deltas)


# ---------------------------------------------------------------------------
# Theoretical bound formulas (natural logarithms)


def _check_logs(n, s):
    if s < 2 or n < 2:
        raise ValueError("bounds need s >= 2 and n >= 2 (log s and log n must be positive)")


def theoretical_mean_bound(params, n, m, s):
    """``c1 * max(s^1.5 / m * log(n)^1.5, sqrt(s / m) * log(s) * log(n))``."""
    _check_logs(n, s)
    if m < 1:
        raise ValueError("m must be at least 1")
    ln, ls = math.log(n), math.log(s)
    return params.c1 * max(s**1.5 / m * ln**1.5, math.sqrt(s / m) * ls * ln)


def theoretical_sample_bound(params, delta, n, s):
    """``c2 * max(s^1.5 log(n)^1.5 / delta, s log(n)^2 log(s)^2 / delta^2)``."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    _check_logs(n, s)
    ln, ls = math.log(n), math.log(s)
    return params.c2 * max(s**1.5 * ln**1.5 / delta, s * ln**2 * ls**2 / delta**2)


def theoretical_tail_variance(params, n, m, s):
    """``c3 * (s / m) * log(s)^2 * log(n)^2``."""
    _check_logs(n, s)
    if m < 1:
        raise ValueError("m must be at least 1")
    return params.c3 * (s / m) * math.log(s) ** 2 * math.log(n) ** 2
