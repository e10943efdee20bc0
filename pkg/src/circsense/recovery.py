"""Sparse recovery: IHT, HTP, CoSaMP and basis pursuit.

All solvers use the measurement operator only through ``apply``,
``adjoint`` and ``shape``, so a :class:`~circsense.circulant.PartialCirculantOperator`
and its dense materialization (:class:`DenseOperator`) are interchangeable.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from circsense import rip
from circsense.circulant import DENSE_LIMIT

# (kappa, delta_star): recovery of every s-sparse vector is guaranteed once
# delta_{kappa * s} < delta_star.
ALGORITHM_CONSTANTS = {
    "l1": (2, 3.0 / (4.0 + math.sqrt(6.0))),
    "cosamp": (4, math.sqrt(2.0 / (5.0 + math.sqrt(73.0)))),
    "iht": (3, 0.5),
    "htp": (3, 1.0 / math.sqrt(3.0)),
}
ALGORITHMS = tuple(ALGORITHM_CONSTANTS)

GREEDY_MAX_ITERS = 500
GREEDY_TOL = 1e-8
BP_MAX_ITERS = 50_000
BP_TOL = 1e-8
# Douglas-Rachford fixed-point gap ||u - x|| required at convergence,
# relative to max(1, ||x||); the objective alone can plateau for a while.
BP_GAP_TOL = 1e-6
# default prox parameter as a fraction of max|A^* y|
BP_GAMMA_FRACTION = 0.003


class DenseOperator:
    """Wrap an explicit matrix in the apply/adjoint interface."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix)
        if self.matrix.ndim != 2:
            raise ValueError("operator matrix must be 2-d")

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def m(self):
        return self.matrix.shape[0]

    @property
    def n(self):
        return self.matrix.shape[1]

    def apply(self, x):
        return self.matrix @ x

    def adjoint(self, y):
        return self.matrix.conj().T @ y

    def materialize(self, limit=None):
        return self.matrix


@dataclass
class RecoveryProblem:
    """``y = A x + e`` with ``||e||_2 <= tau`` and ``x`` (approximately) ``s``-sparse."""

    operator: object
    y: np.ndarray
    s: int
    tau: float = 0.0

    def __post_init__(self):
        m, n = self.operator.shape
        self.y = np.asarray(self.y)
        if self.y.shape != (m,):
            raise ValueError(f"y must have shape ({m},), got {self.y.shape}")
        self.s = int(self.s)
        if not 1 <= self.s <= n:
            raise ValueError(f"need 1 <= s <= n={n}, got s={self.s}")
        if self.tau < 0:
            raise ValueError("noise level tau must be non-negative")

    @property
    def n(self):
        return self.operator.shape[1]


@dataclass
class RecoveryReport:
    xhat: np.ndarray
    iterations: int
    residual: float
    support: tuple
    converged: bool
    algorithm: str
    diverged: bool = False
    ls_regularized: bool = False
    history: list = field(default_factory=list, repr=False)
    objective_trace: list = field(default_factory=list, repr=False)
    sigma_s_term: float = None
    step_fallback: bool = False


def hard_threshold(v, s):
    """Keep the ``s`` largest-magnitude entries; ties go to the lowest index."""
    order = np.argsort(-np.abs(v), kind="stable")
    keep = np.sort(order[:s])
    out = np.zeros_like(v)
    out[keep] = v[keep]
    return out, keep


def top_indices(v, k):
    order = np.argsort(-np.abs(v), kind="stable")
    return np.sort(order[:k])


def _dtype(problem):
    op = problem.operator
    values = getattr(getattr(op, "generator", None), "values", None)
    if values is None:
        values = getattr(op, "matrix", np.zeros(0))
    return np.result_type(values.dtype, problem.y.dtype, float)


def least_squares(op, y, support, tol=1e-12, max_iter=None):
    """Solve ``min ||A_T z - y||`` on ``T = support`` by CG on the normal equations.

    Only ``apply``/``adjoint`` are used.  When CG stalls on a
    (numerically) singular system the solve is repeated with a small ridge
    term and the second return value is True.
    """
    n = op.shape[1]
    support = np.asarray(support, dtype=np.intp)
    k = support.size
    dtype = np.result_type(y.dtype, float)
    if k == 0:
        return np.zeros(0, dtype=dtype), False
    max_iter = 4 * k if max_iter is None else max_iter

    def normal(z, ridge):
        full = np.zeros(n, dtype=z.dtype)
        full[support] = z
        return op.adjoint(op.apply(full))[support] + ridge * z

    rhs = op.adjoint(y)[support]
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0:
        return np.zeros(k, dtype=rhs.dtype), False

    def cg(ridge):
        z = np.zeros(k, dtype=rhs.dtype)
        r = rhs.copy()
        p = r.copy()
        rr = np.real(np.vdot(r, r))
        for _ in range(max_iter):
            Ap = normal(p, ridge)
            pAp = np.real(np.vdot(p, Ap))
            if pAp <= 1e-14 * np.real(np.vdot(p, p)) * max(rhs_norm, 1.0):
                return z, False
            alpha = rr / pAp
            z = z + alpha * p
            r = r - alpha * Ap
            rr_new = np.real(np.vdot(r, r))
            if math.sqrt(rr_new) <= tol * rhs_norm:
                return z, True
            p = r + (rr_new / rr) * p
            rr = rr_new
        # accept a solve that stopped at the cap if its true residual is small
        res = np.linalg.norm(rhs - normal(z, ridge))
        return z, res <= 1e-8 * rhs_norm

    z, ok = cg(0.0)
    if ok:
        return z, False
    ridge = 1e-10 * max(1.0, rhs_norm)
    z, _ = cg(ridge)
    return z, True


def spectral_norm_sq(op, iters=20, seed=0):
    """Power-iteration estimate of ``||A||^2`` (largest eigenvalue of ``A^*A``)."""
    n = op.shape[1]
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = op.adjoint(op.apply(v))
        est = float(np.linalg.norm(w))
        if est == 0:
            return 0.0
        v = w / est
    return est


def _residual(problem, x):
    return float(np.linalg.norm(problem.y - problem.operator.apply(x)))


def _support_of(x):
    return tuple(int(i) for i in np.flatnonzero(x))


def _finish(problem, x, iterations, converged, algorithm, **extra):
    x = np.asarray(x)
    if not np.iscomplexobj(problem.y) and np.iscomplexobj(x) and _is_real_operator(problem):
        x = x.real
    diverged = not np.all(np.isfinite(x))
    residual = float("nan") if diverged else _residual(problem, x)
    return RecoveryReport(
        xhat=x,
        iterations=iterations,
        residual=residual,
        support=_support_of(x) if not diverged else (),
        converged=converged and not diverged,
        algorithm=algorithm,
        diverged=diverged,
        **extra,
    )


def _is_real_operator(problem):
    op = problem.operator
    gen = getattr(op, "generator", None)
    if gen is not None:
        return gen.is_real
    return not np.iscomplexobj(getattr(op, "matrix", 0.0))


def _step_size(problem, normalize):
    if not normalize:
        return 1.0
    L = spectral_norm_sq(problem.operator)
    return 1.0 / L if L > 1.0 else 1.0


# IHT with a unit step is treated as diverging once the residual exceeds
# this multiple of ||y||.
DIVERGENCE_FACTOR = 1e3


def _iht_run(problem, mu, max_iters, tol, guard):
    A, y, s = problem.operator, problem.y, problem.s
    y_norm = np.linalg.norm(y)
    x = np.zeros(problem.n, dtype=_dtype(problem))
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        r = y - A.apply(x)
        if guard and np.linalg.norm(r) > DIVERGENCE_FACTOR * max(y_norm, 1e-300):
            return x, it, False, history, True
        x_new, keep = hard_threshold(x + mu * A.adjoint(r), s)
        history.append(tuple(int(i) for i in keep[x_new[keep] != 0]))
        if not np.all(np.isfinite(x_new)):
            return x_new, it, False, history, guard
        step = np.linalg.norm(x_new - x)
        x_norm = np.linalg.norm(x)
        x = x_new
        if step <= tol * x_norm:
            return x, it, True, history, False
    return x, it, False, history, False


def iht(problem, max_iters=GREEDY_MAX_ITERS, tol=GREEDY_TOL, normalize="auto"):
    """Iterative hard thresholding, ``x <- H_s(x + mu A^*(y - A x))``.

    ``normalize=False`` uses the unit step ``mu = 1``, the right choice for
    operators with (near) unit-norm columns.  ``normalize=True`` uses
    ``mu = 1 / ||A||^2`` (20 power iterations) whenever that norm exceeds
    one; it cannot diverge but converges slowly and often stalls on a wrong
    support.  The default ``"auto"`` starts with the unit step and restarts
    with the normalized one only if the residual blows up; the report's
    ``step_fallback`` flag records that.
    """
    if normalize == "auto":
        x, it, converged, history, blew_up = _iht_run(problem, 1.0, max_iters, tol, guard=True)
        if blew_up:
            mu = _step_size(problem, True)
            x, it2, converged, history, _ = _iht_run(problem, mu, max_iters, tol, guard=False)
            return _finish(problem, x, it + it2, converged, "iht", history=history,
                           step_fallback=True)
        return _finish(problem, x, it, converged, "iht", history=history)
    mu = _step_size(problem, bool(normalize))
    x, it, converged, history, _ = _iht_run(problem, mu, max_iters, tol, guard=False)
    return _finish(problem, x, it, converged, "iht", history=history)


def htp(problem, max_iters=GREEDY_MAX_ITERS, tol=GREEDY_TOL, normalize=False):
    """Hard thresholding pursuit.

    Picks the ``s`` largest entries of the gradient step (unit step unless
    ``normalize``), then re-fits by least squares on that support.  Stops
    when the support repeats or the iterate stops moving.  A small step
    makes the support freeze after the first fit, hence the unit default.
    """
    A, y, s = problem.operator, problem.y, problem.s
    mu = _step_size(problem, normalize)
    x = np.zeros(problem.n, dtype=_dtype(problem))
    history = []
    regularized = False
    converged = False
    prev = None
    it = 0
    for it in range(1, max_iters + 1):
        keep = top_indices(x + mu * A.adjoint(y - A.apply(x)), s)
        z, flagged = least_squares(A, y, keep)
        regularized |= flagged
        x_new = np.zeros_like(x, dtype=np.result_type(x.dtype, z.dtype))
        x_new[keep] = z
        history.append(tuple(int(i) for i in keep))
        if not np.all(np.isfinite(x_new)):
            x = x_new
            break
        step = np.linalg.norm(x_new - x)
        x_norm = np.linalg.norm(x)
        x = x_new
        if prev is not None and np.array_equal(keep, prev):
            converged = True
            break
        if step <= tol * x_norm:
            converged = True
            break
        prev = keep
    return _finish(problem, x, it, converged, "htp", history=history, ls_regularized=regularized)


def cosamp(problem, max_iters=GREEDY_MAX_ITERS, tol=GREEDY_TOL):
    """Compressive sampling matching pursuit.

    Each pass merges the ``2s`` largest proxy entries with the current
    support, solves least squares on the union and prunes back to ``s``.
    """
    A, y, s = problem.operator, problem.y, problem.s
    n = problem.n
    x = np.zeros(n, dtype=_dtype(problem))
    r = y.copy()
    history = []
    regularized = False
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        proxy = A.adjoint(r)
        merged = np.union1d(top_indices(proxy, min(2 * s, n)), np.flatnonzero(x))
        z, flagged = least_squares(A, y, merged)
        regularized |= flagged
        b = np.zeros(n, dtype=np.result_type(x.dtype, z.dtype))
        b[merged] = z
        x_new, keep = hard_threshold(b, s)
        history.append(tuple(int(i) for i in keep[x_new[keep] != 0]))
        if not np.all(np.isfinite(x_new)):
            x = x_new
            break
        step = np.linalg.norm(x_new - x)
        x_norm = np.linalg.norm(x)
        x = x_new
        r = y - A.apply(x)
        if step <= tol * x_norm or np.linalg.norm(r) <= tol * np.linalg.norm(y):
            converged = True
            break
    return _finish(problem, x, it, converged, "cosamp", history=history, ls_regularized=regularized)


class _MeasurementProjector:
    """Euclidean projection onto ``{z : ||A z - y||_2 <= tau}``.

    ``A A^*`` is assembled column by column from ``apply``/``adjoint`` and
    diagonalized once, after which each projection is two operator calls
    plus (for ``tau > 0``) a scalar root find for the multiplier.
    """

    def __init__(self, op, y, tau, limit=DENSE_LIMIT):
        m = op.shape[0]
        if m > limit:
            raise ValueError(f"m={m} exceeds the dense limit {limit} for the l1 solver")
        dtype = np.result_type(_op_dtype(op), y.dtype, float)
        K = np.empty((m, m), dtype=dtype)
        e = np.zeros(m, dtype=dtype)
        for i in range(m):
            e[i] = 1
            K[:, i] = op.apply(op.adjoint(e))
            e[i] = 0
        evals, self.U = np.linalg.eigh((K + K.conj().T) / 2)
        cutoff = 1e-12 * max(evals.max(initial=0.0), 1e-300)
        self.evals = np.where(evals > cutoff, evals, 0.0)
        self.op, self.y, self.tau = op, y, float(tau)
        self._mu = np.inf

    def _coords(self, v):
        return self.U.conj().T @ (self.y - self.op.apply(v))

    def _multiplier(self, c2):
        """Root of ``||r(mu)|| = tau`` with ``r_i = c_i / (1 + mu lam_i)``.

        Newton on ``1/||r(mu)|| - 1/tau`` (nearly linear in ``mu``),
        safeguarded by a bracket and warm-started from the previous call.
        """
        lam, tau = self.evals, self.tau

        def norm_and_slope(mu):
            d = 1 + mu * lam
            phi = math.sqrt(np.sum(c2 / d**2))
            dphi = -np.sum(lam * c2 / d**3) / phi
            return phi, dphi

        lo, hi = 0.0, np.inf
        mu = self._mu if np.isfinite(self._mu) else 0.0
        for _ in range(100):
            phi, dphi = norm_and_slope(mu)
            if abs(phi - tau) <= 1e-13 * tau:
                break
            if phi > tau:
                lo = mu
            else:
                hi = mu
            step = mu - (1 / phi - 1 / tau) * phi**2 / -dphi if dphi < 0 else np.inf
            if not lo < step < hi:
                step = 0.5 * (lo + hi) if np.isfinite(hi) else 2 * max(mu, 1 / lam.max())
            if step == mu:
                break
            mu = step
        self._mu = mu
        return mu

    def __call__(self, v):
        c = self._coords(v)  # residual y - A v in the eigenbasis
        lam = self.evals
        pos = lam > 0
        if self.tau == 0:
            w = np.where(pos, c / np.where(pos, lam, 1), 0)
            return v + self.op.adjoint(self.U @ w)
        if np.linalg.norm(c) <= self.tau:
            return v
        # z = v + A^* U diag(mu / (1 + mu lam)) c, with mu >= 0 chosen so that
        # the new residual ||c / (1 + mu lam)|| (range part) equals tau
        floor = np.linalg.norm(c[~pos])
        mu = np.inf if floor >= self.tau else self._multiplier(np.abs(c) ** 2)
        if np.isinf(mu):
            w = np.where(pos, c / np.where(pos, lam, 1), 0)
        else:
            w = mu * c / (1 + mu * lam)
        return v + self.op.adjoint(self.U @ w)


def _op_dtype(op):
    values = getattr(getattr(op, "generator", None), "values", None)
    if values is None:
        values = getattr(op, "matrix", np.zeros(0))
    return values.dtype


def _soft(v, t):
    mag = np.abs(v)
    return np.where(mag > t, (1 - t / np.maximum(mag, 1e-300)) * v, 0)


def basis_pursuit(problem, max_iters=BP_MAX_ITERS, tol=BP_TOL, window=50, gamma=None, x0=None):
    """l1 minimization subject to ``||A z - y||_2 <= tau`` (equality when tau = 0).

    Douglas-Rachford splitting between the l1 prox (soft thresholding at
    ``gamma``, default :data:`BP_GAMMA_FRACTION` times ``max|A^* y|``) and
    the projection onto the measurement constraint.  The projected point
    ``x_k`` is feasible at every step but its l1 norm is not monotone: the
    splitting can pass through the minimizer and come back.  The solver
    therefore keeps an incumbent, the feasible ``x_k`` of smallest l1 norm
    seen so far, in the manner of monotone FISTA.  The incumbent is what
    gets returned, and every ``window`` iterations
    ``(iteration, ||x_best||_1, ||A x_best - y||, sign pattern of x_best,
    ||x_k||_1)`` is appended to ``objective_trace``.  Burn-in ends at the
    last change of the recorded sign pattern (entries above
    ``1e-6 max|x|``); see :func:`bp_burn_in`.

    The run is converged when the raw objective ``||x_k||_1`` changes by
    less than ``tol`` (relative) across one window and the fixed-point gap
    between the prox and projection points is below :data:`BP_GAP_TOL`;
    the objective test alone can be fooled by plateaus.  The result is then
    debiased by least squares on its numerically nonzero support.  Passing
    ``x0`` stores ``sigma_s(x0)_1 / sqrt(s)`` in the report for stability
    bookkeeping.
    """
    A, y, tau = problem.operator, problem.y, float(problem.tau)
    n = problem.n
    dtype = _dtype(problem)
    project = _MeasurementProjector(A, y, tau)
    if gamma is None:
        gamma = BP_GAMMA_FRACTION * float(np.max(np.abs(A.adjoint(y)), initial=0.0))
    z = np.zeros(n, dtype=dtype)
    x = project(z)
    best, best_obj = x, float(np.sum(np.abs(x)))
    trace = []
    prev_obj = None
    converged = False
    it = 0
    if gamma > 0:
        for it in range(1, max_iters + 1):
            u = _soft(2 * x - z, gamma)
            gap = float(np.linalg.norm(u - x))
            z = z + u - x
            x = project(z)
            obj = float(np.sum(np.abs(x)))
            if not np.isfinite(obj):
                break
            if obj < best_obj:
                best, best_obj = x, obj
            if it % window == 0:
                res = float(np.linalg.norm(A.apply(best) - y))
                big = np.abs(best) > 1e-6 * np.max(np.abs(best), initial=0.0)
                pattern = tuple(int(i) * int(np.sign(np.real(best[i]))) for i in np.flatnonzero(big))
                trace.append((it, best_obj, res, pattern, obj))
                settled = gap <= BP_GAP_TOL * max(1.0, float(np.linalg.norm(x)))
                if settled and prev_obj is not None and abs(obj - prev_obj) < tol * max(1.0, prev_obj):
                    converged = True
                    break
                prev_obj = obj
    else:
        converged = True
    if np.all(np.isfinite(best)):
        x = best

    regularized = False
    if np.all(np.isfinite(x)) and np.any(x != 0):
        keep = np.flatnonzero(np.abs(x) > 1e-6 * np.max(np.abs(x)))
        if keep.size <= A.shape[0]:
            zs, regularized = least_squares(A, y, keep)
            debiased = np.zeros(n, dtype=np.result_type(dtype, zs.dtype))
            debiased[keep] = zs
            debiased[np.abs(debiased) <= 1e-6 * np.max(np.abs(debiased), initial=0.0)] = 0
            # keep the debiased point only if it still meets the constraint
            limit = max(tau, tol * max(1.0, np.linalg.norm(y)))
            if np.linalg.norm(A.apply(debiased) - y) <= limit * (1 + 1e-9) or tau == 0:
                x = debiased
    report = _finish(problem, x, it, converged, "l1", objective_trace=trace,
                     ls_regularized=regularized)
    feas = max(tau, 1e-6 * max(1.0, np.linalg.norm(y)))
    if not report.residual <= feas * (1 + 1e-9):
        report.converged = False
    if x0 is not None:
        report.sigma_s_term = sigma_s(x0, problem.s) / math.sqrt(problem.s)
    return report


def bp_burn_in(trace):
    """Index of the first trace entry after the last sign-pattern change.

    The l1 values recorded from this entry on are non-increasing.
    """
    patterns = [entry[3] for entry in trace]
    return max((i for i in range(1, len(patterns)) if patterns[i] != patterns[i - 1]), default=0)


SOLVERS = {"l1": basis_pursuit, "cosamp": cosamp, "iht": iht, "htp": htp}


def recover(algorithm, problem, **kwargs):
    try:
        solver = SOLVERS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}") from None
    return solver(problem, **kwargs)


def sigma_s(x, s):
    """l1 error of the best ``s``-term approximation of ``x``."""
    mags = np.sort(np.abs(np.asarray(x)))[::-1]
    return float(np.sum(mags[s:]))


def stability_ratio(x0, xhat, s, tau):
    """``||x0 - xhat|| / (sigma_s(x0)_1 / sqrt(s) + tau)``.

    A zero denominator gives 0 when the error is at most 1e-10 and
    ``inf`` otherwise.
    """
    x0, xhat = np.asarray(x0), np.asarray(xhat)
    if x0.shape != xhat.shape:
        raise ValueError(f"length mismatch: {x0.shape} vs {xhat.shape}")
    err = float(np.linalg.norm(x0 - xhat))
    denom = sigma_s(x0, s) / math.sqrt(s) + tau
    if denom == 0:
        return 0.0 if err <= 1e-10 else float("inf")
    return err / denom


def l0_oracle(op, y, s):
    """Exhaustive search over every size-``s`` support, least squares on each.

    Returns ``(support, coefficients, residual, runner_up_residual)`` for
    the best support; a runner-up residual well above zero certifies that a
    zero-residual best support is the unique ``s``-sparse solution.
    """
    A = op.materialize() if hasattr(op, "materialize") else np.asarray(op.matrix)
    n = A.shape[1]
    best = (None, None, np.inf)
    runner_up = np.inf
    y = np.asarray(y)
    for block in rip.support_chunks(n, s, chunk=5000):
        sub = A[:, block].transpose(1, 0, 2)  # (B, m, s)
        q, r = np.linalg.qr(sub)
        proj = np.einsum("bmi,m->bi", q.conj(), y)
        res = np.sqrt(np.maximum(np.linalg.norm(y) ** 2 - np.sum(np.abs(proj) ** 2, axis=1), 0.0))
        order = np.argsort(res, kind="stable")
        for k in order[:2]:
            if res[k] < best[2]:
                runner_up = min(runner_up, best[2])
                z = np.linalg.solve(r[k], proj[k])
                best = (tuple(int(i) for i in block[k]), z, float(res[k]))
            else:
                runner_up = min(runner_up, float(res[k]))
    support, z, res = best
    full_res = float(np.linalg.norm(y - A[:, list(support)] @ z))
    return support, z, full_res, float(runner_up)


@dataclass
class Certificate:
    algorithm: str
    delta_measured: float
    kappa: int
    delta_star: float
    certified: object  # True, False, or None when the check could not run


def rip_certificate_check(op, algorithm, s, budget=rip.ENUMERATION_BUDGET):
    """Compare the exact ``delta_{kappa s}`` with the algorithm's threshold.

    ``certified`` is None (unknown) when ``kappa * s`` exceeds ``n`` or
    the enumeration does not fit in ``budget``.
    """
    kappa, delta_star = ALGORITHM_CONSTANTS[algorithm]
    order = kappa * int(s)
    n = op.shape[1]
    if order > n or math.comb(n, order) > budget:
        return Certificate(algorithm, float("nan"), kappa, delta_star, None)
    est = rip.exact_rip(op, order, budget)
    return Certificate(algorithm, est.delta, kappa, delta_star, bool(est.delta < delta_star))
