import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expressivity.probes import (
    LinearWeights,
    evaluate,
    fit_linear_regression,
    fit_logistic_regression,
    rank_correlation,
    run_probe,
    split,
)


class TestSplit:
    def test_default_sizes(self):
        F = np.arange(5000.0)[:, None]
        (Ftr, Atr), (Fte, Ate) = split(F, np.arange(5000.0), seed=1)
        assert len(Ftr) == 3000 and len(Fte) == 2000
        assert not set(Ftr[:, 0]) & set(Fte[:, 0])

    def test_partition(self):
        F = np.arange(10.0)[:, None]
        (Ftr, _), (Fte, _) = split(F, np.zeros(10), 6, 4, seed=0)
        assert sorted(np.concatenate([Ftr[:, 0], Fte[:, 0]])) == list(range(10))

    def test_pairs_stay_aligned(self):
        F = np.arange(20.0)[:, None]
        (Ftr, Atr), _ = split(F, np.arange(20.0) * 2, 10, 5, seed=3)
        np.testing.assert_array_equal(Atr, Ftr[:, 0] * 2)

    def test_deterministic(self):
        F = np.arange(30.0)[:, None]
        a, b = split(F, np.zeros(30), 10, 10, seed=5), split(F, np.zeros(30), 10, 10, seed=5)
        np.testing.assert_array_equal(a[0][0], b[0][0])

    def test_insufficient(self):
        with pytest.raises(ValueError, match="insufficient samples"):
            split(np.zeros((4999, 1)), np.zeros(4999))


class TestLinearRegression:
    def test_exact_fit(self):
        rng = np.random.default_rng(0)
        F = rng.normal(size=(50, 3))
        w = np.array([1.5, -2.0, 0.25])
        fit = fit_linear_regression(F, F @ w + 0.7, ridge=0.0)
        np.testing.assert_allclose(fit.coef, w, atol=1e-6)
        assert fit.intercept == pytest.approx(0.7, abs=1e-6)

    def test_constant_column(self):
        y = np.array([1.0, 2.0, 6.0])
        fit = fit_linear_regression(np.full((3, 1), 4.0), y)
        assert fit.intercept == pytest.approx(3.0, abs=1e-12)
        assert fit.coef[0] == 0.0

    def test_matches_svd_least_squares(self):
        rng = np.random.default_rng(1)
        F = rng.normal(size=(20, 3))
        y = rng.normal(size=20)
        fit = fit_linear_regression(F, y, ridge=0.0)
        design = np.column_stack([F, np.ones(20)])
        ref, *_ = np.linalg.lstsq(design, y, rcond=None)
        np.testing.assert_allclose(fit.coef, ref[:3], atol=1e-8)
        assert fit.intercept == pytest.approx(ref[3], abs=1e-8)

    def test_residuals_orthogonal(self):
        rng = np.random.default_rng(2)
        F = rng.normal(size=(100, 4))
        y = rng.normal(size=100)
        fit = fit_linear_regression(F, y, ridge=0.0)
        r = y - fit.predict(F)
        np.testing.assert_allclose(F.T @ r, 0.0, atol=1e-8)
        assert abs(r.sum()) < 1e-8


class TestLogistic:
    def test_separable(self):
        rng = np.random.default_rng(3)
        y = rng.integers(0, 2, 5000).astype(float)
        F = rng.normal(size=(5000, 2)) * 0.5 + np.where(y[:, None] == 1, 3.0, -3.0)
        rep = run_probe(F, y, "classify", seed=0)
        assert rep.metric_name == "accuracy" and rep.metric_value >= 0.99

    def test_independent_labels_near_chance(self):
        rng = np.random.default_rng(4)
        F = rng.normal(size=(5000, 5))
        y = rng.integers(0, 2, 5000).astype(float)
        rep = run_probe(F, y, "classify", seed=1)
        assert rep.test_size == 2000
        assert 0.45 <= rep.metric_value <= 0.55

    def test_no_signal_gives_half(self):
        F = np.ones((40, 3))
        y = np.tile([0.0, 1.0], 20)
        fit = fit_logistic_regression(F, y)
        np.testing.assert_allclose(fit.predict(F), 0.5, atol=1e-3)

    def test_degenerate_labels(self):
        with pytest.raises(ValueError, match="degenerate labels"):
            fit_logistic_regression(np.zeros((5, 1)), np.ones(5))

    def test_non_binary(self):
        with pytest.raises(ValueError):
            fit_logistic_regression(np.zeros((3, 1)), [0, 1, 2])


class TestEvaluate:
    def test_perfect_regression(self):
        F = np.arange(5.0)[:, None]
        rep = evaluate(LinearWeights(np.array([2.0]), 1.0, "regression"), F, 2 * F[:, 0] + 1, "regress")
        assert rep.metric_value == 0.0 and rep.metric_name == "mean-absolute-error"

    def test_perfect_and_antiperfect_classification(self):
        F = np.array([[-1.0], [1.0], [-2.0], [3.0]])
        y = np.array([0.0, 1.0, 0.0, 1.0])
        good = LinearWeights(np.array([5.0]), 0.0, "classification")
        bad = LinearWeights(np.array([-5.0]), 0.0, "classification")
        assert evaluate(good, F, y, "classify").metric_value == 1.0
        assert evaluate(bad, F, y, "classify").metric_value == 0.0

    def test_mean_predictor_mae(self):
        # Monte Carlo oracle for E|Y - EY| with Y ~ N(0, 1).
        y = np.random.default_rng(5).normal(size=400_000)
        mc = np.mean(np.abs(y - y.mean()))
        assert mc == pytest.approx(math.sqrt(2 / math.pi), abs=0.005)
        rep = evaluate(LinearWeights(np.zeros(1), float(y.mean()), "regression"),
                       np.zeros((len(y), 1)), y, "regress")
        assert rep.metric_value == pytest.approx(mc, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            evaluate(LinearWeights(np.zeros(2), 0.0, "regression"), np.zeros((3, 2)), np.zeros(4), "regress")

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_metric_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        F = rng.normal(size=(30, 2))
        y = F @ [1.0, -1.0] + rng.normal(size=30)
        w = LinearWeights(np.array([0.8, -0.9]), 0.1, "regression")
        perm = rng.permutation(30)
        a = evaluate(w, F, y, "regression").metric_value
        b = evaluate(w, F[perm], y[perm], "regression").metric_value
        assert a == pytest.approx(b, abs=1e-12)
        labels = (y > 0).astype(float)
        wc = LinearWeights(np.array([0.8, -0.9]), 0.1, "classification")
        assert evaluate(wc, F, labels, "classify").metric_value == evaluate(
            wc, F[perm], labels[perm], "classify").metric_value


class TestRankCorrelation:
    def test_identity_and_reversal(self):
        xs = [0.3, 1.2, -4.0, 8.0]
        assert rank_correlation(xs, xs) == 1.0
        assert rank_correlation(xs, [-x for x in xs]) == -1.0

    def test_hand_computed(self):
        # ranks (1,2,3) vs (3,1,2): d = (-2, 1, 1), rho = 1 - 6*6/(3*8)
        assert rank_correlation([1, 2, 3], [3, 1, 2]) == pytest.approx(-0.5, abs=1e-15)

    def test_ties_use_midranks(self):
        from scipy.stats import spearmanr
        xs, ys = [1, 2, 2, 3, 5], [2, 1, 4, 4, 9]
        assert rank_correlation(xs, ys) == pytest.approx(spearmanr(xs, ys).statistic, abs=1e-12)

    def test_too_short(self):
        with pytest.raises(ValueError):
            rank_correlation([1, 2], [2, 1])
