import numpy as np
import pytest

from conftest import random_pattern
from ppclass.classify import BayesClassifier
from ppclass.core import LabeledPattern, PointPattern, Window
from ppclass.crossval import (
    BayesCvCache,
    CvConfig,
    bayes_cv_terms,
    default_sigma_grid,
    select_k,
    select_sigma,
    stratified_folds,
)
from ppclass.experiments import ExperimentSpec, make_scenario, sample_replicate
from ppclass.intensity import KernelSpec
from ppclass.metrics import PatternMetric


def smooth_training(rep, c1=500, d1=20, c2=700, per_class=50):
    spec = ExperimentSpec("smooth", {"c1": c1, "d1": d1, "c2": c2}, train_per_class=per_class,
                          test_per_class=1, replications=1, seed=rep)
    return sample_replicate(spec, make_scenario("smooth", spec.params), 0)[0]


def cluster_training(rng, unit, n_small=20, n_large=20):
    # class 0 patterns hold 5 points, class 1 patterns hold 50
    out = [LabeledPattern(PointPattern(rng.random((5, 2)), unit), 0) for _ in range(n_small)]
    out += [LabeledPattern(PointPattern(rng.random((50, 2)), unit), 1) for _ in range(n_large)]
    return out


class TestConfig:
    def test_defaults(self, unit):
        cfg = CvConfig()
        assert cfg.folds == 5 and cfg.share_sigma
        assert cfg.k_grid == (1, 3, 5, 7, 9, 11, 15, 21, 25)
        grid = default_sigma_grid(unit)
        assert len(grid) == 8
        assert grid[0] == pytest.approx(unit.diameter() / 50)
        assert grid[-1] == pytest.approx(unit.diameter() / 2)

    @pytest.mark.parametrize("kwargs", [dict(folds=1), dict(k_grid=()), dict(k_grid=(0, 3)),
                                        dict(sigma_grid=()), dict(sigma_grid=(0.1, -1.0))])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            CvConfig(**kwargs)


class TestFolds:
    def test_partition_and_balance(self, rng):
        labels = np.repeat([0, 1, 2], [23, 17, 10])
        folds = stratified_folds(labels, 5, seed=3)
        assert set(folds) == set(range(5))
        sizes = np.bincount(folds)
        assert sizes.sum() == labels.size and sizes.max() - sizes.min() <= 1
        for c in range(3):
            per = np.bincount(folds[labels == c], minlength=5)
            assert per.max() - per.min() <= 1

    def test_deterministic(self):
        labels = np.repeat([0, 1], 30)
        np.testing.assert_array_equal(stratified_folds(labels, 5, 9), stratified_folds(labels, 5, 9))
        assert not np.array_equal(stratified_folds(labels, 5, 9), stratified_folds(labels, 5, 10))

    def test_loo(self):
        np.testing.assert_array_equal(stratified_folds([0, 1, 1], "loo", 0), [0, 1, 2])

    def test_too_many_folds(self):
        with pytest.raises(ValueError):
            stratified_folds([0, 1, 0], 4, 0)


class TestSelectK:
    def test_separable_clusters(self, unit, rng):
        train = cluster_training(rng, unit)
        for d0 in ("cardinality", "hellinger"):
            k, err = select_k(train, PatternMetric(unit, d0), CvConfig(k_grid=(3, 1, 5, 9)))
            assert (k, err) == (1, 0.0)

    def test_singleton_grid(self, unit, rng):
        train = [LabeledPattern(random_pattern(rng, unit), i % 2) for i in range(20)]
        assert select_k(train, PatternMetric(unit), CvConfig(k_grid=(1,)))[0] == 1

    def test_noise_labels(self, unit, rng):
        train = [LabeledPattern(random_pattern(rng, unit, 10), int(rng.integers(2))) for _ in range(100)]
        _, err = select_k(train, PatternMetric(unit, "cardinality"), CvConfig(k_grid=(1, 5, 11)))
        assert abs(err - 0.5) <= 0.15

    def test_k_exceeding_fold_size(self, unit, rng):
        train = [LabeledPattern(random_pattern(rng, unit), i % 2) for i in range(10)]
        with pytest.raises(ValueError, match="exceeds"):
            select_k(train, PatternMetric(unit), CvConfig(k_grid=(1, 9)))

    def test_loo_error_in_unit_interval(self, unit, rng):
        train = [LabeledPattern(random_pattern(rng, unit, 10), i % 2) for i in range(30)]
        k, err = select_k(train, PatternMetric(unit, "kl"), CvConfig(folds="loo", k_grid=(1, 3, 5)))
        assert k in (1, 3, 5) and 0.0 <= err <= 1.0

    def test_smooth_scenario_prefers_larger_k(self):
        metric = PatternMetric(Window.unit(2), "cardinality")
        picks = [select_k(smooth_training(rep), metric, CvConfig(seed=rep))[0] for rep in range(20)]
        assert sum(k >= 5 for k in picks) > 10


class TestBayesCache:
    def test_class_terms_match_direct_fit(self, unit, rng):
        train = cluster_training(rng, unit, 6, 4)
        kernel = KernelSpec("gaussian", 0.15)
        cache = BayesCvCache([lp.pattern for lp in train], kernel)
        members0, members1 = np.array([0, 2, 3, 5]), np.array([6, 8, 9])
        queries = np.array([1, 4, 7])
        fit = BayesClassifier.fit([train[i] for i in np.concatenate([members0, members1])], sigma=0.15)
        direct = fit.score_many([train[i].pattern for i in queries])
        np.testing.assert_allclose(cache.class_terms(members0, 4 / 7, queries), direct[:, 0], rtol=1e-4)
        np.testing.assert_allclose(cache.class_terms(members1, 3 / 7, queries), direct[:, 1], rtol=1e-4)

    def test_terms_shape(self, unit, rng):
        train = cluster_training(rng, unit, 5, 5)
        terms = bayes_cv_terms(train, (0.1, 0.2), CvConfig())
        assert terms.shape == (2, 10, 2)


class TestSelectSigma:
    def test_singleton_grid(self, unit, rng):
        train = cluster_training(rng, unit, 10, 10)
        sig, err = select_sigma(train, CvConfig(sigma_grid=(0.07,)))
        assert sig == (0.07, 0.07) and err == 0.0

    def test_argmin_over_shared_grid(self):
        train = smooth_training(0)
        grid = (0.05, 0.1, 0.2)
        sig, err = select_sigma(train, CvConfig(sigma_grid=grid))
        singles = [select_sigma(train, CvConfig(sigma_grid=(s,)))[1] for s in grid]
        assert err == min(singles)
        assert sig[0] == grid[singles.index(err)]

    def test_full_grid_not_worse_than_diagonal(self):
        train = smooth_training(1)
        grid = (0.05, 0.1, 0.2)
        _, diag = select_sigma(train, CvConfig(sigma_grid=grid))
        sig, full = select_sigma(train, CvConfig(sigma_grid=grid, share_sigma=False))
        assert full <= diag and len(sig) == 2

    def test_diagonal_beats_off_diagonal(self):
        grid = (0.05, 0.1, 0.2)
        wins = 0
        for rep in range(20):
            terms = bayes_cv_terms(smooth_training(rep), grid, CvConfig(seed=rep))
            labels = np.repeat([0, 1], 50)
            err = np.empty((3, 3))
            for a in range(3):
                for b in range(3):
                    pred = (terms[b, :, 1] > terms[a, :, 0]).astype(int)
                    err[a, b] = np.mean(pred != labels)
            wins += np.mean(np.diag(err)) <= np.mean(err[~np.eye(3, dtype=bool)])
        assert wins > 10

    def test_deterministic(self):
        train = smooth_training(2)
        cfg = CvConfig(sigma_grid=(0.05, 0.1, 0.2), seed=4)
        assert select_sigma(train, cfg) == select_sigma(train, cfg)
