import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circsense import rip
from circsense.circulant import PartialCirculantOperator, make_generator, materialize, sample_set
from circsense.rng import child_seed, stream
from circsense.recovery import DenseOperator

# Monte Carlo and enumeration agree only up to eigenvalue rounding
SLACK = 1e-12


def brute_force_delta(A, s):
    """Loop over supports with numpy.linalg.svd, independent of the batched code."""
    best = 0.0
    for S in __import__("itertools").combinations(range(A.shape[1]), s):
        sv = np.linalg.svd(A[:, S], compute_uv=False)
        best = max(best, abs(sv[0] ** 2 - 1), abs(sv[-1] ** 2 - 1) if len(sv) == s else 1.0)
    return best


def small_op(seed, model="rademacher", n_range=(4, 14)):
    g = np.random.default_rng(seed)
    n = int(g.integers(*n_range))
    m = int(g.integers(1, n + 1))
    return PartialCirculantOperator(make_generator(model, n, seed), sample_set(n, m, "uniform", g))


class TestRng:
    def test_streams_are_keyed(self):
        a = stream(1, "x", 0).standard_normal(4)
        assert np.array_equal(a, stream(1, "x", 0).standard_normal(4))
        assert not np.array_equal(a, stream(1, "x", 1).standard_normal(4))
        assert not np.array_equal(a, stream(1, "y", 0).standard_normal(4))
        assert not np.array_equal(a, stream(2, "x", 0).standard_normal(4))

    def test_child_seed_range(self):
        assert 0 <= child_seed(5, "t", 3) < 2**63
        assert child_seed(5, "t", 3) == child_seed(5, "t", 3)


class TestExact:
    def test_worked_example(self, worked_op):
        est = rip.exact_rip(worked_op, 2)
        assert est.delta == pytest.approx(1.0, abs=1e-12)
        assert est.witness_support == (0, 2)
        assert est.method == "exact"

    def test_order_one_is_zero_for_rademacher(self):
        for seed in range(30):
            assert rip.exact_rip(small_op(seed), 1).delta == 0.0

    def test_matches_brute_force(self):
        for seed in range(25):
            op = small_op(seed, ["rademacher", "gaussian", "fourier-bernoulli"][seed % 3], (3, 9))
            A = materialize(op)
            for s in range(1, min(op.n, 3) + 1):
                assert rip.exact_rip(op, s).delta == pytest.approx(brute_force_delta(A, s), abs=1e-10)

    def test_dense_operator_input(self, worked_op):
        dense = DenseOperator(materialize(worked_op))
        assert rip.exact_rip(dense, 2).delta == pytest.approx(1.0, abs=1e-12)

    def test_budget(self):
        op = small_op(0, n_range=(12, 13))
        with pytest.raises(rip.BudgetExceeded):
            rip.exact_rip(op, 3, budget=10)

    def test_bad_order(self, worked_op):
        with pytest.raises(ValueError):
            rip.exact_rip(worked_op, 0)
        with pytest.raises(ValueError):
            rip.exact_rip(worked_op, 5)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31))
    def test_monotone_in_s(self, seed):
        op = small_op(seed, n_range=(4, 11))
        deltas = [rip.exact_rip(op, s).delta for s in range(1, min(op.n, 4) + 1)]
        assert all(b >= a - SLACK for a, b in zip(deltas, deltas[1:]))

    def test_support_chunks_cover_all(self):
        chunks = list(rip.support_chunks(7, 3, chunk=4))
        allsup = np.concatenate(chunks)
        assert allsup.shape == (math.comb(7, 3), 3)
        assert len({tuple(r) for r in allsup}) == math.comb(7, 3)


class TestMonteCarlo:
    def test_lower_bound_on_exact(self):
        for seed in range(20):
            op = small_op(seed, ["rademacher", "gaussian", "fourier-bernoulli"][seed % 3])
            s = min(op.n, 3)
            assert rip.monte_carlo_rip(op, s, trials=200, seed=seed).delta <= rip.exact_rip(op, s).delta + SLACK

    def test_all_supports_reaches_exact(self):
        for seed in range(20):
            op = small_op(seed, ["rademacher", "gaussian", "fourier-bernoulli"][seed % 3])
            s = min(op.n, 2 + seed % 2)
            mc = rip.monte_carlo_rip(op, s, supports="all").delta
            assert mc == pytest.approx(rip.exact_rip(op, s).delta, abs=1e-9)

    def test_more_trials_never_lower(self):
        op = small_op(3, n_range=(20, 21))
        vals = [rip.monte_carlo_rip(op, 3, trials=t, seed=9).delta for t in (1, 10, 100, 400)]
        assert vals == sorted(vals)

    def test_witness_vector(self):
        op = small_op(5, n_range=(10, 11))
        est = rip.monte_carlo_rip(op, 2, trials=50, seed=1)
        x = est.witness_vector
        assert np.count_nonzero(x) <= 2 and np.linalg.norm(x) == pytest.approx(1.0)
        assert abs(np.linalg.norm(op.apply(x)) ** 2 - 1) == pytest.approx(est.delta, abs=1e-8)

    def test_deterministic(self):
        op = small_op(5, n_range=(16, 17))
        a = rip.monte_carlo_rip(op, 3, trials=100, seed=4)
        b = rip.monte_carlo_rip(op, 3, trials=100, seed=4)
        assert a.delta == b.delta and a.witness_support == b.witness_support

    def test_estimate_dispatch(self):
        op = small_op(2, n_range=(30, 31))
        assert rip.estimate_rip(op, 2).method == "exact"
        assert rip.estimate_rip(op, 3, budget=100, trials=20).method == "monte-carlo"
        with pytest.raises(ValueError):
            rip.estimate_rip(op, 2, method="annealing")


class TestStatistics:
    def test_mean_delta_shape_and_determinism(self):
        rows = rip.mean_delta("rademacher", 16, [4, 8, 16], 2, draws=10, seed=1)
        again = rip.mean_delta("rademacher", 16, [4, 8, 16], 2, draws=10, seed=1, workers=3)
        assert [r.mean for r in rows] == [r.mean for r in again]
        assert [r.m for r in rows] == [4, 8, 16]
        assert all(r.stderr >= 0 and r.draws == 10 and r.method == "exact" for r in rows)
        assert rows[0].mean > rows[-1].mean

    def test_mean_delta_needs_two_draws(self):
        with pytest.raises(ValueError):
            rip.mean_delta("rademacher", 8, [4], 2, draws=1, seed=0)

    def test_tail_profile(self):
        prof = rip.tail_profile("rademacher", 16, 8, 2, draws=60, lambda_grid=[-1, 0, 0.1, 0.5, 2], seed=3)
        np.testing.assert_array_equal(prof.lambdas, [0, 0.1, 0.5, 1.0])
        assert np.all(np.diff(prof.exceed_prob) <= 0)
        np.testing.assert_array_equal(prof.exceed_count, [np.count_nonzero(prof.deltas >= prof.empirical_mean + l)
                                                          for l in prof.lambdas])
        assert prof.empirical_mean == pytest.approx(prof.deltas.mean())

    def test_tail_grid_validation(self):
        with pytest.raises(ValueError):
            rip.tail_profile("rademacher", 8, 4, 2, draws=4, lambda_grid=[])

    def test_fit_tail_slope(self):
        lam = np.linspace(0, 0.5, 6)
        probs = np.exp(-3.0 * lam**2)
        assert rip.fit_tail_slope(lam, probs, np.full(6, 100)) == pytest.approx(-3.0)
        assert math.isnan(rip.fit_tail_slope(lam, probs, [100, 1, 1, 1, 1, 1]))

    def test_run_ordered(self):
        assert rip.run_ordered(lambda i: i * i, range(10), workers=4) == [i * i for i in range(10)]


class TestBounds:
    def test_mean_bound_example(self):
        p = rip.BoundParams(c1=1.0)
        value = rip.theoretical_mean_bound(p, 256, 64, 4)
        # second branch wins: sqrt(4/64) * ln 4 * ln 256
        assert value == pytest.approx(0.25 * math.log(4) * math.log(256), rel=1e-12)
        assert value == pytest.approx(1.9218, abs=1e-4)

    def test_mean_bound_first_branch(self):
        value = rip.theoretical_mean_bound(rip.BoundParams(), 10**6, 100, 50)
        assert value == pytest.approx(50**1.5 / 100 * math.log(10**6) ** 1.5)

    def test_sample_bound_example(self):
        value = rip.theoretical_sample_bound(rip.BoundParams(c2=1.0), 0.5, 256, 4)
        assert value == pytest.approx(4 * math.log(256) ** 2 * math.log(4) ** 2 / 0.25, rel=1e-12)
        assert value == pytest.approx(945.5, abs=0.5)

    def test_tail_variance_example(self):
        value = rip.theoretical_tail_variance(rip.BoundParams(c3=1.0), 256, 64, 4)
        assert value == pytest.approx(3.6934, abs=1e-3)
        assert rip.theoretical_tail_variance(rip.BoundParams(c3=0.0), 256, 64, 4) == 0.0

    def test_mean_bound_halves_when_m_doubles(self):
        p = rip.BoundParams()
        a, b = rip.theoretical_mean_bound(p, 10**6, 100, 50), rip.theoretical_mean_bound(p, 10**6, 200, 50)
        assert b == pytest.approx(a / 2, rel=1e-12)

    def test_sample_bound_quadruples_when_delta_halves(self):
        p = rip.BoundParams()
        a, b = rip.theoretical_sample_bound(p, 0.4, 256, 4), rip.theoretical_sample_bound(p, 0.2, 256, 4)
        assert b == pytest.approx(4 * a, rel=1e-12)

    def test_constants_scale_linearly(self):
        a = rip.theoretical_mean_bound(rip.BoundParams(c1=2.5), 100, 20, 3)
        b = rip.theoretical_mean_bound(rip.BoundParams(c1=1.0), 100, 20, 3)
        assert a == pytest.approx(2.5 * b)

    def test_domain_errors(self):
        p = rip.BoundParams()
        with pytest.raises(ValueError):
            rip.theoretical_mean_bound(p, 256, 64, 1)
        with pytest.raises(ValueError):
            rip.theoretical_sample_bound(p, 1.0, 256, 4)
        with pytest.raises(ValueError):
            rip.BoundParams(c1=-1)
        with pytest.raises(ValueError):
            rip.BoundParams(c2=float("nan"))
