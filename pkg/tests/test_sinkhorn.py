"""Threshold block solves and the alternating Sinkhorn-type loop."""

import numpy as np
import pytest

from eurot.core import (
    CostMatrix,
    DualPoint,
    Measure,
    Problem,
    dual_gradient,
    dual_objective,
    lemma1_radius,
    recover_plan,
)
from eurot.oracles import bisection_threshold, dual_ascent_reference, oracle_dual_value
from eurot.sinkhorn import (
    run_euclidean_sinkhorn,
    threshold_rows,
    threshold_solve,
    update_lambda,
    update_mu,
)

from conftest import random_problem


class TestThresholdSolve:
    def test_symmetric_pair(self):
        res = threshold_solve(np.array([0.0, 0.0]), 1.0)
        assert res.value == pytest.approx(-0.5, abs=1e-15)
        assert res.active_count == 2

    def test_large_gap_excludes_far_entry(self):
        res = threshold_solve(np.array([0.0, 10.0]), 1.0)
        assert res.value == pytest.approx(-1.0, abs=1e-15)
        assert res.active_count == 1

    def test_big_target_activates_everything(self):
        res = threshold_solve(np.array([0.0, 1.0]), 4.0)
        assert res.value == pytest.approx(-2.5, abs=1e-15)
        assert res.active_count == 2

    def test_zero_target_convention(self):
        res = threshold_solve(np.array([3.0, -1.0, 2.0]), 0.0)
        assert res.value == pytest.approx(1.0, abs=1e-15)
        assert res.active_count == 0

    def test_empty_vector_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            threshold_solve(np.array([]), 1.0)

    def test_root_property(self, rng):
        # the returned multiplier really solves sum [-v - lam]_+ = target
        for _ in range(200):
            size = int(rng.integers(1, 30))
            v = rng.normal(size=size) * rng.exponential()
            target = rng.exponential()
            res = threshold_solve(v, target)
            total = np.maximum(-v - res.value, 0.0).sum()
            assert total == pytest.approx(target, rel=1e-12, abs=1e-12)

    def test_matches_bisection_with_ties(self, rng):
        for _ in range(300):
            size = int(rng.integers(1, 20))
            v = np.round(rng.normal(size=size), 1)  # rounding forces ties
            target = float(rng.choice([0.0, rng.exponential()]))
            got = threshold_solve(v, target).value
            want = bisection_threshold(v, target)
            assert got == pytest.approx(want, abs=1e-10)

    def test_vectorised_rows_agree_with_scalar(self, rng):
        rows = rng.normal(size=(40, 7))
        targets = rng.exponential(size=40)
        targets[::5] = 0.0
        lams = threshold_rows(rows, targets)
        for i in range(40):
            assert lams[i] == pytest.approx(
                threshold_solve(rows[i], targets[i]).value, abs=1e-13
            )


class TestBlockUpdates:
    def test_constant_rows(self):
        n, m, gamma = 3, 4, 0.9
        p = Problem(
            Measure(np.full(n, 1 / n)),
            Measure(np.full(m, 1 / m)),
            CostMatrix(np.zeros((n, m))),
            gamma,
        )
        d = update_lambda(p, DualPoint.zeros(n, m))
        np.testing.assert_allclose(d.lam, -gamma / (n * m), atol=1e-15)
        x = recover_plan(p, d)
        np.testing.assert_allclose(x.row_marginal(), 1 / n, atol=1e-15)

    def test_row_marginals_exact_after_lambda_update(self):
        for seed in range(5):
            p = random_problem(seed, n=6, m=4, gamma=0.2)
            r = np.random.default_rng(seed)
            d = DualPoint(r.normal(size=6), r.normal(size=4))
            d2 = update_lambda(p, d)
            assert np.array_equal(d2.mu, d.mu)
            x = recover_plan(p, d2)
            np.testing.assert_allclose(x.row_marginal(), p.a.weights, atol=1e-10)

    def test_col_marginals_exact_after_mu_update(self):
        for seed in range(5):
            p = random_problem(seed, n=4, m=6, gamma=0.2)
            r = np.random.default_rng(seed)
            d = DualPoint(r.normal(size=4), r.normal(size=6))
            d2 = update_mu(p, d)
            assert np.array_equal(d2.lam, d.lam)
            x = recover_plan(p, d2)
            np.testing.assert_allclose(x.col_marginal(), p.b.weights, atol=1e-10)

    def test_updates_never_decrease_dual(self):
        for seed in range(5):
            p = random_problem(seed, n=5, m=5, gamma=0.4)
            r = np.random.default_rng(seed + 50)
            d = DualPoint(r.normal(size=5), r.normal(size=5))
            before = dual_objective(p, d)
            for updated in (update_lambda(p, d), update_mu(p, d)):
                assert dual_objective(p, updated) >= before - 1e-12

    def test_block_gradient_vanishes_after_update(self):
        p = random_problem(17, n=5, m=7, gamma=0.3)
        r = np.random.default_rng(17)
        d = DualPoint(r.normal(size=5), r.normal(size=7))
        gl, _ = dual_gradient(p, update_lambda(p, d))
        assert np.abs(gl).max() < 1e-10
        _, gm = dual_gradient(p, update_mu(p, d))
        assert np.abs(gm).max() < 1e-10

    def test_zero_mass_row_gets_zero_plan_row(self):
        a = Measure(np.array([0.0, 0.6, 0.4]))
        b = Measure(np.array([0.5, 0.5]))
        p = Problem(a, b, CostMatrix(np.random.default_rng(0).random((3, 2))), 0.5)
        d = update_lambda(p, DualPoint.zeros(3, 2))
        x = recover_plan(p, d)
        np.testing.assert_allclose(x.entries[0], 0.0, atol=1e-15)


class TestEuclideanSinkhorn:
    def test_uniform_zero_cost_converges_immediately(self):
        n = m = 4
        p = Problem(
            Measure(np.full(n, 1 / n)),
            Measure(np.full(m, 1 / m)),
            CostMatrix(np.zeros((n, m))),
            0.5,
        )
        res = run_euclidean_sinkhorn(p, 1e-12, trace=False)
        assert res.converged
        assert res.iterations <= 2
        np.testing.assert_allclose(res.plan.entries, 1 / (n * m), atol=1e-12)

    def test_final_dual_matches_ascent_oracle(self):
        p = random_problem(23, n=5, m=5, gamma=0.01)
        res = run_euclidean_sinkhorn(p, 1e-6, trace=False)
        assert res.converged
        dstar = dual_ascent_reference(p, tol=1e-9)
        assert dual_objective(p, res.dual) == pytest.approx(
            oracle_dual_value(p, dstar), abs=1e-6
        )

    def test_monotone_ascent_every_half_iteration(self):
        p = random_problem(31, n=6, m=5, gamma=0.05)
        res = run_euclidean_sinkhorn(p, 1e-8, trace=True)
        phis = [rec.dual_phi for rec in res.trace]
        assert all(b >= a - 1e-12 for a, b in zip(phis, phis[1:]))

    def test_multiplier_ranges_stay_within_radius(self):
        for seed in (3, 4):
            p = random_problem(seed, n=5, m=6, gamma=0.1)
            res = run_euclidean_sinkhorn(p, 1e-8, trace=False, record_iterates=True)
            R = lemma1_radius(p)
            for lam, mu in res.dual_iterates:
                assert lam.max() - lam.min() <= R + 1e-12
                assert mu.max() - mu.min() <= R + 1e-12

    @pytest.mark.xfail(
        strict=True,
        reason="threshold updates do not keep multipliers non-positive: with "
        "C=[[0,1]], a=(1), b=(.5,.5), gamma=.1 the exact block solves give "
        "mu_1=+0.05 after one sweep (hand check below), so the claimed sign "
        "property fails for these updates",
    )
    def test_multipliers_stay_nonpositive(self):
        p = Problem(
            Measure(np.array([1.0])),
            Measure(np.array([0.5, 0.5])),
            CostMatrix(np.array([[0.0, 1.0]])),
            0.1,
        )
        res = run_euclidean_sinkhorn(p, 1e-10, trace=False, record_iterates=True)
        for lam, mu in res.dual_iterates:
            assert lam.max() <= 1e-12
            assert mu.max() <= 1e-12

    def test_lemma2_distance_bound_along_run(self):
        p = random_problem(41, n=5, m=5, gamma=0.05)
        res = run_euclidean_sinkhorn(p, 1e-7, trace=True)
        phistar = oracle_dual_value(p, dual_ascent_reference(p, tol=1e-10))
        R = lemma1_radius(p)
        root = np.sqrt(p.shape[0] + p.shape[1])
        for rec in res.trace:
            rhs = 4 * R * root * (rec.residuals.row_l2 + rec.residuals.col_l2)
            assert phistar - rec.dual_phi <= rhs + 1e-8

    def test_theorem1_iteration_bound(self):
        eps = 0.1
        for seed in range(5):
            p = random_problem(seed, n=6, m=6, gamma=eps / 2)
            inner = eps / (4 * p.cost.max_abs)
            res = run_euclidean_sinkhorn(p, inner, trace=False)
            assert res.converged
            bound = 2 + 8 * max(p.shape) ** 1.5 * lemma1_radius(p) / (p.gamma * inner)
            assert res.iterations <= bound

    def test_max_iter_flags_not_converged(self):
        p = random_problem(2, n=5, m=5, gamma=0.01)
        res = run_euclidean_sinkhorn(p, 1e-9, max_iter=3, trace=True)
        assert not res.converged
        assert res.iterations == 3
        assert len(res.trace) == 3

    def test_zero_marginal_entries_supported(self):
        # a mu half-step can leak mass back into zero rows, but never more
        # than the marginal stopping tolerance
        tol = 1e-9
        p = random_problem(6, n=6, m=6, gamma=0.1, zeros=(2, 1))
        res = run_euclidean_sinkhorn(p, tol, trace=False)
        assert res.converged
        zero_rows = p.a.weights == 0
        assert res.plan.entries[zero_rows].sum() <= tol

    def test_eps_must_be_positive(self):
        p = random_problem(1)
        with pytest.raises(ValueError, match="positive"):
            run_euclidean_sinkhorn(p, 0.0)
