import math

import numpy as np
import pytest

from reic import nn, rehead
from conftest import assert_grads_close


def naive_threshold_loss(y, omega, theta):
    outside = sum(math.exp(v) for r, v in enumerate(y) if r not in omega)
    inside = sum(math.exp(-v) for r, v in enumerate(y) if r in omega)
    return math.log(math.exp(theta) + outside) + math.log(math.exp(-theta) + inside)


class TestPathRepresentation:
    def test_single_rows_concat(self):
        h = np.array([[1.0, 2.0]])
        t = np.array([[3.0, 4.0]])
        assert np.allclose(rehead.path_representation(h, t), [1, 2, 3, 4])

    def test_opposite_rows_cancel(self, rng):
        x = rng.normal(size=3)
        rep = rehead.path_representation(np.stack([x, -x]), np.ones((1, 3)))
        assert np.allclose(rep[:3], 0.0)
        assert np.allclose(rep[3:], 1.0)

    def test_matches_independent_means(self, rng):
        h = rng.normal(size=(4, 5))
        t = rng.normal(size=(3, 5))
        rep = rehead.path_representation(h, t)
        expected = np.concatenate([sum(h) / 4, sum(t) / 3])
        assert np.allclose(rep, expected, atol=1e-12)

    def test_empty_selection_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            rehead.path_representation(np.zeros((0, 3)), np.ones((1, 3)))


class TestScoreRelations:
    def test_zero_scorer_all_zero(self):
        head = rehead.REHead("threshold", 6, 4, 3)
        assert np.allclose(rehead.score_relations(head, np.ones(6)), 0.0)

    def test_end2end_appends_na_logit(self, rng):
        head = rehead.REHead("end2end", 6, 4, 3, rng=rng)
        assert rehead.score_relations(head, np.ones(6)).shape == (4,)

    def test_deterministic(self, rng):
        head = rehead.REHead("threshold", 6, 4, 3, rng=rng)
        rep = rng.normal(size=6)
        a = rehead.score_relations(head, rep)
        b = rehead.score_relations(head, rep)
        assert np.array_equal(a, b)

    def test_gradient_matches_finite_differences(self, rng):
        for _ in range(5):
            head = rehead.REHead("threshold", 5, 4, 3, rng=rng)
            rep = rng.normal(size=5)
            dy = rng.normal(size=3)

            def f():
                return float(dy @ rehead.score_relations(head, rep))

            cache = {}
            rehead.score_relations(head, rep, cache)
            rehead.score_backward(head, cache, dy)
            analytic = [g.copy() for _, _, g in head.parameters()]
            for _, _, g in head.parameters():
                g[...] = 0.0
            numeric = nn.finite_diff_grad(f, [p for _, p, _ in head.parameters()])
            assert_grads_close(analytic, numeric)


class TestAggregateBag:
    def test_single_path_identity(self):
        y = np.array([0.5, -1.0])
        assert np.array_equal(rehead.aggregate_bag([y]), y)

    def test_elementwise_max(self):
        out = rehead.aggregate_bag([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        assert np.array_equal(out, [1.0, 1.0])

    def test_permutation_invariant(self, rng):
        ys = [rng.normal(size=4) for _ in range(5)]
        a = rehead.aggregate_bag(ys)
        order = rng.permutation(5)
        b = rehead.aggregate_bag([ys[i] for i in order])
        assert np.array_equal(a, b)

    def test_idempotent_under_duplication(self, rng):
        ys = [rng.normal(size=4) for _ in range(3)]
        assert np.array_equal(rehead.aggregate_bag(ys), rehead.aggregate_bag(ys + ys))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            rehead.aggregate_bag([])


class TestLossThreshold:
    def test_hand_value_single_gold(self):
        # gold score 1 at threshold 0: log(1) + log(1 + e^-1)
        assert rehead.loss_threshold(np.array([1.0]), {0}, 0.0) == pytest.approx(0.31326, abs=1e-5)

    def test_hand_value_empty_omega(self):
        assert rehead.loss_threshold(np.array([-2.0]), set(), 0.0) == pytest.approx(0.12693, abs=1e-5)

    def test_perfect_separation_limit(self):
        y = np.array([40.0, -40.0, -40.0])
        assert rehead.loss_threshold(y, {0}, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_stabilized_matches_naive_1000(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 8))
            y = rng.normal(0, 3, n)
            omega = {int(r) for r in rng.choice(n, size=rng.integers(0, n + 1), replace=False)}
            theta = float(rng.normal(0, 2))
            assert abs(rehead.loss_threshold(y, omega, theta)
                       - naive_threshold_loss(y, omega, theta)) < 1e-9

    def test_no_overflow_on_extreme_scores(self):
        y = np.array([800.0, -800.0])
        loss = rehead.loss_threshold(y, {1}, 0.0)
        assert np.isfinite(loss) and loss > 1500

    def test_monotone_in_scores(self, rng):
        for _ in range(20):
            y = rng.normal(size=5)
            omega = {0, 3}
            base = rehead.loss_threshold(y, omega, 0.1)
            for r in range(5):
                bumped = y.copy()
                bumped[r] += 0.25
                moved = rehead.loss_threshold(bumped, omega, 0.1)
                if r in omega:
                    assert moved < base
                else:
                    assert moved > base

    def test_grad_matches_finite_differences(self, rng):
        for _ in range(10):
            y = rng.normal(size=4)
            omega = {1, 2}
            theta = 0.3
            _, dy, dtheta = rehead.loss_threshold_grad(y, omega, theta)

            def fy():
                return rehead.loss_threshold(y, omega, theta)

            (num_dy,) = nn.finite_diff_grad(fy, [y])
            assert_grads_close([dy], [num_dy])
            th = np.array([theta])

            def ft():
                return rehead.loss_threshold(y, omega, float(th[0]))

            (num_dt,) = nn.finite_diff_grad(ft, [th])
            assert abs(dtheta - num_dt[0]) < 1e-6

    def test_bad_relation_id(self):
        with pytest.raises(ValueError):
            rehead.loss_threshold(np.zeros(2), {5}, 0.0)


class TestLossEnd2End:
    def test_uniform_scores(self):
        assert rehead.loss_end2end(np.zeros(5), 2) == pytest.approx(np.log(5))

    def test_confident_correct(self):
        scores = np.array([30.0, 0.0, 0.0])
        assert rehead.loss_end2end(scores, 0) == pytest.approx(0.0, abs=1e-12)

    def test_matches_independent_cross_entropy(self, rng):
        for _ in range(20):
            scores = rng.normal(0, 3, 6)
            label = int(rng.integers(0, 6))
            p = np.exp(scores - scores.max())
            p /= p.sum()
            assert rehead.loss_end2end(scores, label) == pytest.approx(-np.log(p[label]), abs=1e-9)

    def test_grad_is_softmax_minus_onehot(self, rng):
        scores = rng.normal(size=4)
        _, dy = rehead.loss_end2end_grad(scores, 1)
        p = np.exp(scores - scores.max())
        p /= p.sum()
        expected = p.copy()
        expected[1] -= 1
        assert np.allclose(dy, expected, atol=1e-12)

    def test_bad_label(self):
        with pytest.raises(ValueError):
            rehead.loss_end2end(np.zeros(3), 3)


class TestLineSearchDecrease:
    @pytest.mark.parametrize("variant", ["threshold", "end2end"])
    def test_one_small_step_decreases_loss(self, variant, rng):
        head = rehead.REHead(variant, 6, 5, 3, rng=rng)
        reps = [rng.normal(size=6) for _ in range(4)]
        labels = [0, 2, None, 1]

        def batch_loss(accumulate):
            total = 0.0
            for rep, label in zip(reps, labels):
                cache = {}
                y = rehead.score_relations(head, rep, cache)
                if variant == "threshold":
                    omega = set() if label is None else {label}
                    loss, dy, _ = rehead.loss_threshold_grad(y, omega, head.theta)
                else:
                    lab = head.n_relations if label is None else label
                    loss, dy = rehead.loss_end2end_grad(y, lab)
                total += loss
                if accumulate:
                    rehead.score_backward(head, cache, dy)
            return total

        before = batch_loss(accumulate=True)
        params = [p for _, p, _ in head.parameters()]
        grads = [g for _, _, g in head.parameters()]
        nn.sgd_step(params, grads, lr=1e-4)
        after = batch_loss(accumulate=False)
        assert after < before
