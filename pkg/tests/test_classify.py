import math

import numpy as np
import pytest

from conftest import pattern, random_pattern
from ppclass.core import LabeledPattern, PointPattern, Window
from ppclass.classify import (
    BayesClassifier,
    KnnClassifier,
    argmax_first,
    bayes_classify,
    bayes_score,
    intensity_floor,
    knn_classify,
    knn_predict,
    knn_vote,
)
from ppclass.metrics import PatternMetric
from ppclass.simulate import IntensitySpec, sample_poisson

METRICS = [None, "cardinality", "hellinger", "kl"]


def constant(c):
    return lambda pts: np.full(len(pts), float(c))


def two_vs_one(unit):
    # class 0 has intensity 2, class 1 has intensity 1
    return BayesClassifier([constant(2), constant(1)], [2.0, 1.0], [0.5, 0.5], unit)


class TestBayesScores:
    def test_empty_pattern_scores(self, unit):
        c = BayesClassifier([constant(5), constant(3)], [5.0, 3.0], [1, 1], unit)
        np.testing.assert_allclose(c.scores(pattern([], unit)), math.log(0.5) - np.array([5.0, 3.0]))
        assert bayes_classify(c, pattern([], unit)) == 1

    def test_closed_form_difference(self, unit, rng):
        c = two_vs_one(unit)
        for n in range(6):
            x = PointPattern(rng.random((n, 2)), unit)
            diff = bayes_score(c, x, 0) - bayes_score(c, x, 1)
            assert diff == pytest.approx(-1 + n * math.log(2), abs=1e-12)

    def test_threshold_decisions(self, unit):
        c = two_vs_one(unit)
        assert bayes_classify(c, pattern([[0.3, 0.3]], unit)) == 1
        assert bayes_classify(c, pattern([[0.3, 0.3], [0.6, 0.1]], unit)) == 0

    def test_oracle_equivalence(self, unit):
        c = two_vs_one(unit)
        spec = IntensitySpec.constant(1.5, unit)
        xs = [sample_poisson(spec, s) for s in range(1000)]
        expected = np.array([0 if x.count >= 2 else 1 for x in xs])
        np.testing.assert_array_equal(c.classify_many(xs), expected)
        assert all(bayes_classify(c, x) == e for x, e in zip(xs[:100], expected))

    def test_identical_classes_tie_to_zero(self, unit, rng):
        c = BayesClassifier([constant(4)] * 3, [4.0] * 3, [1, 1, 1], unit)
        for _ in range(20):
            x = random_pattern(rng, unit)
            s = c.scores(x)
            assert s[0] == s[1] == s[2]
            assert bayes_classify(c, x) == 0

    def test_argmax_invariance(self, unit, rng):
        lam = [lambda p: 50 * np.exp(-5 * p[:, 0]), lambda p: 20 + 10 * p[:, 1]]
        base = BayesClassifier(lam, [9.93, 25.0], [0.3, 0.7], unit)
        scaled = BayesClassifier(lam, [9.93, 25.0], [3.0, 7.0], unit)
        for _ in range(50):
            x = random_pattern(rng, unit, 30)
            s = base.scores(x)
            np.testing.assert_allclose(scaled.scores(x), s)
            assert argmax_first(s + 123.4) == base.classify(x) == scaled.classify(x)

    def test_log_domain_matches_literal_ratio(self, unit, rng):
        lam_a = lambda p: 10 ** (3 * np.sin(7 * p[:, 0] + 3 * p[:, 1]))
        lam_b = lambda p: 10 ** (3 * np.cos(5 * p[:, 0] * p[:, 1] + 1))
        c = BayesClassifier([lam_a, lam_b], [40.0, 55.0], [0.4, 0.6], unit)
        for _ in range(200):
            x = random_pattern(rng, unit, 50)
            ratio = (0.6 / 0.4) * math.exp(40.0 - 55.0)
            for a, b in zip(lam_a(x.points), lam_b(x.points)):
                ratio *= b / a
            s = c.scores(x)
            assert s[1] - s[0] == pytest.approx(math.log(ratio), abs=1e-9)

    def test_floor_applied(self, unit):
        c = BayesClassifier([constant(0), constant(1)], [1.0, 1.0], [1, 1], unit)
        floor = intensity_floor(1.0, unit)
        assert floor == pytest.approx(1e-8)
        assert c.scores(pattern([[0.5, 0.5]], unit))[0] == pytest.approx(math.log(0.5) - 1 + math.log(floor))

    def test_batch_matches_single(self, unit, rng):
        lam = [lambda p: 50 * np.exp(-5 * p[:, 0]), constant(12)]
        c = BayesClassifier(lam, [9.93, 12.0], [1, 1], unit)
        xs = [random_pattern(rng, unit, 10) for _ in range(30)] + [pattern([], unit)]
        np.testing.assert_allclose(c.score_many(xs), np.array([c.scores(x) for x in xs]), rtol=1e-12)

    def test_window_mismatch(self, unit):
        c = two_vs_one(unit)
        with pytest.raises(ValueError):
            c.scores(pattern([[0.5, 0.5]], Window.square(0, 2)))

    def test_invalid_priors(self, unit):
        with pytest.raises(ValueError):
            BayesClassifier([constant(1)] * 2, [1.0, 1.0], [1.0, 0.0], unit)


class TestBayesFit:
    def test_fit_priors_and_masses(self, unit):
        lo, hi = IntensitySpec.constant(20.0, unit), IntensitySpec.constant(80.0, unit)
        train = [LabeledPattern(sample_poisson(lo, s), 0) for s in range(30)]
        train += [LabeledPattern(sample_poisson(hi, 100 + s), 1) for s in range(10)]
        c = BayesClassifier.fit(train, sigma=0.2)
        np.testing.assert_allclose(c.priors, [0.75, 0.25])
        np.testing.assert_allclose(c.masses, [20.0, 80.0], rtol=0.1)
        test = [sample_poisson(lo, 900), sample_poisson(hi, 901)]
        assert list(c.classify_many(test)) == [0, 1]

    def test_missing_class(self, unit):
        train = [LabeledPattern(pattern([[0.5, 0.5]], unit), 0), LabeledPattern(pattern([], unit), 2)]
        with pytest.raises(ValueError, match="class 1"):
            BayesClassifier.fit(train)


def _training(rng, unit, n=20):
    return [LabeledPattern(random_pattern(rng, unit, 8, 1), int(i % 2)) for i in range(n)]


class TestKnn:
    def test_vote_example(self):
        assert knn_vote([0.1, 0.2, 0.9], [0, 0, 1], 3, 2) == 0

    def test_vote_ties(self):
        assert knn_vote([0.5, 0.5], [1, 0], 1, 2) == 1
        assert knn_vote([0.1, 0.2], [1, 0], 2, 2) == 0

    def test_predict_matches_vote(self, rng):
        d = rng.random((40, 15)).round(1)
        labels = rng.integers(0, 3, 15)
        for k in (1, 4, 15):
            expected = [knn_vote(row, labels, k, 3) for row in d]
            np.testing.assert_array_equal(knn_predict(d, labels, k, 3), expected)

    def test_k_larger_than_training(self, unit, rng):
        with pytest.raises(ValueError):
            KnnClassifier(_training(rng, unit, 4), 5, PatternMetric(unit))
        with pytest.raises(ValueError):
            KnnClassifier(_training(rng, unit, 4), 0, PatternMetric(unit))

    @pytest.mark.parametrize("d0", METRICS)
    def test_duplicate_query_k1(self, unit, rng, d0):
        train = _training(rng, unit)
        c = KnnClassifier(train, 1, PatternMetric(unit, d0))
        for lp in train:
            assert knn_classify(c, lp.pattern) == lp.label

    def test_degenerate_k_majority(self, unit, rng):
        train = [LabeledPattern(random_pattern(rng, unit), int(i >= 30)) for i in range(50)]
        c = KnnClassifier(train, 50, PatternMetric(unit, "cardinality"))
        queries = [random_pattern(rng, unit, 20) for _ in range(20)]
        assert set(c.classify_many(queries)) == {0}

    @pytest.mark.parametrize("d0", METRICS)
    def test_permutation_invariance(self, unit, rng, d0):
        train = _training(rng, unit)
        metric = PatternMetric(unit, d0)
        queries = [random_pattern(rng, unit, 8, 1) for _ in range(20)]
        perm = rng.permutation(len(train))
        a = KnnClassifier(train, 5, metric).classify_many(queries)
        b = KnnClassifier([train[i] for i in perm], 5, metric).classify_many(queries)
        d = KnnClassifier(train, 5, metric).distances(queries)
        assert all(len(np.unique(row)) == len(row) for row in d)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("d0", ["cardinality", "hellinger", "kl"])
    def test_scale_invariance(self, unit, rng, d0):
        train = _training(rng, unit, 30)
        queries = [random_pattern(rng, unit, 8) for _ in range(30)]
        big = unit.scaled(3.7)
        train_big = [LabeledPattern(lp.pattern.scaled(3.7), lp.label) for lp in train]
        queries_big = [q.scaled(3.7) for q in queries]
        for k in (1, 3, 7):
            a = KnnClassifier(train, k, PatternMetric(unit, d0)).classify_many(queries)
            b = KnnClassifier(train_big, k, PatternMetric(big, d0)).classify_many(queries_big)
            np.testing.assert_array_equal(a, b)
