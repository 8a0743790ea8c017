import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bauc.bayes import ClassMoments, LinearModel, sample_moments
from bauc.classifiers import (
    ConvergenceError,
    LogRegConfig,
    SingularSystemError,
    _signed_labels,
    lda_direction,
    logreg_gradient,
    logreg_objective,
    predict_scores,
    train_logreg_l2,
)
from bauc.data import Dataset, MissingClassError
from bauc.numerics import ShapeError


def gaussian_dataset(seed, p=3, n1=20, n2=25, shift=1.0):
    rng = np.random.default_rng(seed)
    return Dataset.from_classes(rng.normal(size=(n1, p)), rng.normal(size=(n2, p)) + shift)


def numeric_gradient(theta, x, y, lam, h=1e-6):
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (logreg_objective(theta + e, x, y, lam) - logreg_objective(theta - e, x, y, lam)) / (2 * h)
    return g


class TestLogReg:
    def test_symmetric_data(self):
        v = np.array([1.0, 2.0])
        ds = Dataset.from_classes([-v, -2 * v], [v, 2 * v])
        model = train_logreg_l2(ds, LogRegConfig(lam=1.0))
        assert abs(model.b) <= 1e-8
        cos = model.w @ v / (np.linalg.norm(model.w) * np.linalg.norm(v))
        assert cos == pytest.approx(1.0, abs=1e-10)

    def test_label_flip_negates(self):
        ds = gaussian_dataset(0)
        flipped = Dataset(ds.features, 3 - ds.labels)
        a, b = train_logreg_l2(ds), train_logreg_l2(flipped)
        assert np.allclose(a.w, -b.w, atol=1e-7) and a.b == pytest.approx(-b.b, abs=1e-7)

    def test_stationary_point(self):
        ds = gaussian_dataset(1)
        cfg = LogRegConfig(lam=0.5)
        model = train_logreg_l2(ds, cfg)
        theta = np.append(model.w, model.b)
        g = logreg_gradient(theta, ds.features, _signed_labels(ds.labels), cfg.lam)
        f = logreg_objective(theta, ds.features, _signed_labels(ds.labels), cfg.lam)
        assert np.linalg.norm(g) <= cfg.tol * max(1.0, abs(f))

    def test_objective_decreases(self):
        trace = []
        train_logreg_l2(gaussian_dataset(2, p=6), LogRegConfig(lam=0.1), trace=trace)
        assert len(trace) >= 2
        assert all(b <= a for a, b in zip(trace, trace[1:]))

    def test_norm_shrinks_with_lambda(self):
        ds = gaussian_dataset(3)
        norms = [np.linalg.norm(train_logreg_l2(ds, LogRegConfig(lam=lam)).w) for lam in (0.01, 0.1, 1.0, 10.0, 100.0)]
        assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))

    def test_deterministic(self):
        ds = gaussian_dataset(4)
        a, b = train_logreg_l2(ds), train_logreg_l2(ds)
        assert np.array_equal(a.w, b.w) and a.b == b.b

    def test_separable_without_penalty_fails(self):
        ds = Dataset.from_classes([[-1.0], [-2.0]], [[1.0], [2.0]])
        with pytest.raises(ConvergenceError):
            train_logreg_l2(ds, LogRegConfig(lam=0.0, max_iters=30))
        train_logreg_l2(ds, LogRegConfig(lam=1.0))

    def test_single_class(self):
        with pytest.raises(MissingClassError):
            train_logreg_l2(Dataset(np.zeros((3, 2)), np.full(3, 2)))

    def test_more_features_than_samples(self):
        model = train_logreg_l2(gaussian_dataset(5, p=50, n1=5, n2=5))
        assert np.all(np.isfinite(model.w))

    @pytest.mark.parametrize("kwargs", [{"lam": -1.0}, {"tol": 0.0}, {"max_iters": 0}])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            LogRegConfig(**kwargs)


class TestGradient:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 6), st.floats(0.0, 5.0))
    def test_matches_finite_differences(self, seed, p, lam):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(15, p))
        y = np.where(rng.random(15) < 0.5, -1.0, 1.0)
        theta = rng.normal(size=p + 1)
        num = numeric_gradient(theta, x, y, lam)
        assert np.max(np.abs(logreg_gradient(theta, x, y, lam) - num)) <= 1e-5 * max(1.0, np.max(np.abs(num)))

    def test_toy_optimum(self):
        ds = Dataset.from_classes([[0.0, 1.0], [1.0, -0.5]], [[1.5, 0.5], [0.2, 2.0]])
        model = train_logreg_l2(ds, LogRegConfig(lam=1.0))
        theta = np.append(model.w, model.b)
        x, y = ds.features, _signed_labels(ds.labels)
        ana = logreg_gradient(theta, x, y, 1.0)
        num = numeric_gradient(theta, x, y, 1.0, h=1e-5)
        assert np.linalg.norm(ana - num) <= 1e-5 * max(np.linalg.norm(num), 1e-3)

    def test_objective_at_zero(self):
        x = np.ones((4, 2))
        y = np.array([1.0, -1.0, 1.0, -1.0])
        assert logreg_objective(np.zeros(3), x, y, 3.0) == pytest.approx(4 * np.log(2.0), abs=1e-14)


class TestLda:
    def test_hand_example(self):
        m = ClassMoments(5, 5, np.zeros(2), np.array([2.0, 0.0]), np.diag([4.0, 1.0]), np.diag([4.0, 1.0]))
        model = lda_direction(m)
        assert np.allclose(model.w, [0.5, 0.0]) and model.b == pytest.approx(-0.5)

    def test_identity_pooled(self):
        m = ClassMoments(3, 4, np.array([1.0, 0.0]), np.array([0.0, 2.0]), np.eye(2), np.eye(2))
        assert np.allclose(lda_direction(m).w, [-1.0, 2.0])

    def test_ridge_path(self):
        m = sample_moments(Dataset.from_classes([[0, 0], [0, 2]], [[2, 0], [2, 2]]))
        model = lda_direction(m, ridge=2.0)
        assert np.allclose(model.w, [1.0, 0.0]) and model.b == pytest.approx(-1.0)

    def test_singular_without_ridge(self):
        m = sample_moments(Dataset.from_classes([[0, 0], [0, 2]], [[2, 0], [2, 2]]))
        with pytest.raises(SingularSystemError):
            lda_direction(m)

    def test_negative_ridge(self):
        m = sample_moments(gaussian_dataset(6))
        with pytest.raises(ValueError):
            lda_direction(m, ridge=-1.0)

    def test_full_rank_solution(self):
        m = sample_moments(gaussian_dataset(7))
        model = lda_direction(m)
        assert np.allclose(m.pooled_covariance() @ model.w, m.mu_hat2 - m.mu_hat1)


class TestPredict:
    def test_value(self):
        ds = Dataset.from_classes([[1.0, 2.0]], [[0.0, 0.0]])
        scores = predict_scores(LinearModel([0.5, 0.25], 0.5), ds)
        assert scores[0] == 1.5 and scores[1] == 0.5

    def test_mismatch(self):
        with pytest.raises(ShapeError):
            predict_scores(LinearModel([1.0]), gaussian_dataset(0))
