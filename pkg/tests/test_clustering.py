import numpy as np
import pytest

from dase.clustering import cluster, gmm, kmeans, mse_criterion
from dase.metrics import misclustering, nmi
from oracles import best_two_partition


def two_clouds(rng, n=50, gap=100.0, radius=0.1):
    a = rng.normal(0, radius, (n, 2))
    b = rng.normal(0, radius, (n, 2)) + [gap, 0]
    return np.vstack([a, b]), np.repeat([0, 1], n)


class TestKMeans:
    def test_separated_clouds(self):
        X, truth = two_clouds(np.random.default_rng(0))
        res = kmeans(X, 2, seed=1)
        assert nmi(truth, res.labels) == 1.0

    def test_identical_points(self):
        res = kmeans(np.ones((10, 2)), 2, seed=0)
        assert res.objective == 0.0
        assert set(res.labels.tolist()) <= {0, 1}

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_exhaustive_partition(self, seed):
        X = np.random.default_rng(seed).standard_normal((12, 2))
        res = kmeans(X, 2, restarts=10, seed=seed)
        assert res.objective <= best_two_partition(X) + 1e-9

    def test_objective_equals_criterion(self):
        X = np.random.default_rng(3).standard_normal((200, 3))
        res = kmeans(X, 4, seed=2)
        assert res.objective == pytest.approx(mse_criterion(X, res.labels, res.centroids), rel=1e-9)
        assert np.all(np.diff(res.history) <= 1e-12 * res.history[0])
        assert res.restarts_used == 10

    def test_no_empty_cluster(self):
        X = np.vstack([np.zeros((20, 2)), np.ones((1, 2))])
        res = kmeans(X, 3, seed=0)
        assert np.bincount(res.labels, minlength=3).min() > 0

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((1, 2)), 2)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            kmeans(np.array([[0.0], [np.inf]]), 1)

    def test_deterministic(self):
        X = np.random.default_rng(5).standard_normal((100, 2))
        a = kmeans(X, 3, seed=7)
        b = kmeans(X, 3, seed=7)
        assert np.array_equal(a.labels, b.labels) and a.objective == b.objective

    def test_row_permutation(self):
        rng = np.random.default_rng(6)
        X, _ = two_clouds(rng, gap=5, radius=1)
        perm = rng.permutation(X.shape[0])
        a = kmeans(X, 2, seed=0).labels
        b = kmeans(X[perm], 2, seed=0).labels
        assert misclustering(a[perm], b).count == 0


class TestGMM:
    def test_separated_gaussians(self):
        X, truth = two_clouds(np.random.default_rng(1), gap=20, radius=1)
        res = gmm(X, 2, seed=0)
        assert nmi(truth, res.labels) == 1.0
        assert res.weights.sum() == pytest.approx(1.0)

    def test_single_component_mle(self):
        X = np.random.default_rng(2).multivariate_normal([1, -1], [[2, 0.5], [0.5, 1]], 500)
        res = gmm(X, 1, seed=0, reg=0.0)
        assert np.allclose(res.means[0], X.mean(0), atol=1e-6)
        assert np.allclose(res.covariances[0], np.cov(X.T, bias=True), atol=1e-6)

    def test_recovers_known_means(self):
        rng = np.random.default_rng(3)
        N = 5000
        mu = np.array([[0.0, 0.0], [4.0, 1.0]])
        z = rng.random(N) < 0.3
        X = np.where(z[:, None], rng.normal(mu[0], 1.0, (N, 2)), rng.normal(mu[1], 1.0, (N, 2)))
        res = gmm(X, 2, seed=0)
        order = np.argsort(res.means[:, 0])
        se = np.array([1 / np.sqrt(0.3 * N), 1 / np.sqrt(0.7 * N)])
        assert np.all(np.abs(res.means[order] - mu) <= 3 * se[:, None])

    def test_monotone_and_regularised(self):
        X = np.random.default_rng(4).standard_normal((300, 2))
        res = gmm(X, 3, seed=1, reg=1e-3)
        h = np.array(res.history)
        assert np.all(np.diff(h) >= -1e-8 * np.abs(h[:-1]))
        for cov in res.covariances:
            assert np.allclose(cov, cov.T)
            assert np.linalg.eigvalsh(cov).min() >= 1e-3 - 1e-12

    def test_collapse_survives(self):
        X = np.vstack([np.zeros((10, 2)), np.ones((10, 2))])
        res = gmm(X, 2, seed=0)
        assert np.all(np.isfinite(res.means))

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            gmm(np.zeros((1, 2)), 2)


class TestCriterion:
    def test_centroids_at_points(self):
        X = np.random.default_rng(0).standard_normal((5, 2))
        assert mse_criterion(X, np.arange(5), X) == 0.0

    def test_single_term(self):
        assert mse_criterion([[2.0, 0.0]], [0], [[0.0, 0.0]]) == 4.0

    def test_direct_sum(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((40, 3))
        labels = rng.integers(0, 4, 40)
        C = rng.standard_normal((4, 3))
        total = 0.0
        for i in range(40):
            for j in range(3):
                total += (X[i, j] - C[labels[i], j]) ** 2
        assert mse_criterion(X, labels, C) == pytest.approx(total, rel=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            mse_criterion([[0.0]], [2], [[0.0]])

    def test_cluster_dispatch(self):
        X, _ = two_clouds(np.random.default_rng(0))
        assert cluster(X, 2, "kmeans").shape == (100,)
        assert cluster(X, 2, "gmm").shape == (100,)
        with pytest.raises(ValueError):
            cluster(X, 2, "dbscan")
