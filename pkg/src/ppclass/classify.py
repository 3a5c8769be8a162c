"""Plug-in Bayes and k-nearest-neighbour rules for point patterns."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import LabeledPattern, PointPattern, Window, check_same_window, labels_of
from .intensity import IntensityEstimate, KernelSpec
from .metrics import PatternMetric

FLOOR_FRACTION = 1e-8


def intensity_floor(mass: float, window: Window) -> float:
    """Lower clamp applied to intensities before taking logs."""
    return max(FLOOR_FRACTION * mass / window.measure(), np.finfo(float).tiny)


def argmax_first(scores) -> int:
    """Index of the largest score; ties go to the smallest index."""
    scores = np.asarray(scores, dtype=float)
    return int(np.flatnonzero(scores == scores.max())[0])


class BayesClassifier:
    """Bayes rule for Poisson classes with plug-in intensities.

    The score of class ``j`` for a pattern ``x`` is

        log p_j - mu_j(S) + sum over points of log lambda_j(point)

    and the class with the highest score wins.  ``intensities[j]`` is any
    callable mapping an ``(n, d)`` array to ``n`` intensity values.
    """

    def __init__(self, intensities, masses, priors, window: Window):
        self.intensities = list(intensities)
        self.masses = np.asarray(masses, dtype=float)
        priors = np.asarray(priors, dtype=float)
        if not (len(self.intensities) == len(self.masses) == len(priors)):
            raise ValueError("intensities, masses and priors must have one entry per class")
        if np.any(priors <= 0):
            raise ValueError("priors must be positive")
        self.priors = priors / priors.sum()
        self.window = window
        self.floors = np.array([intensity_floor(mu, window) for mu in self.masses])

    @classmethod
    def fit(
        cls,
        training: Sequence[LabeledPattern],
        sigma=0.1,
        kernel: str = "gaussian",
        grid: int = 64,
        n_classes: Optional[int] = None,
    ) -> "BayesClassifier":
        """Estimate one intensity per class; ``sigma`` is a scalar or one value per class."""
        labels = labels_of(training, n_classes)
        n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
        sigmas = np.broadcast_to(np.asarray(sigma, dtype=float), (n_classes,))
        window = check_same_window(*(lp.pattern for lp in training))
        estimates, masses, priors = [], [], []
        for j in range(n_classes):
            members = [lp.pattern for lp in training if lp.label == j]
            if not members:
                raise ValueError(f"class {j} has no training patterns")
            est = IntensityEstimate(members, KernelSpec(kernel, float(sigmas[j]), window.dim), grid)
            estimates.append(est)
            masses.append(est.integrated())
            priors.append(len(members) / len(training))
        return cls(estimates, masses, priors, window)

    @property
    def n_classes(self) -> int:
        return len(self.intensities)

    def log_intensity(self, j: int, points) -> np.ndarray:
        lam = np.asarray(self.intensities[j](points), dtype=float)
        return np.log(np.maximum(lam, self.floors[j]))

    def scores(self, x: PointPattern) -> np.ndarray:
        if x.window != self.window:
            raise ValueError(f"pattern window {x.window} differs from classifier window {self.window}")
        out = np.log(self.priors) - self.masses
        if x.count:
            for j in range(self.n_classes):
                out[j] += self.log_intensity(j, x.points).sum()
        return out

    def score_many(self, xs: Sequence[PointPattern]) -> np.ndarray:
        """Scores for a batch, evaluating each class intensity once on all points."""
        xs = list(xs)
        out = np.tile(np.log(self.priors) - self.masses, (len(xs), 1))
        counts = np.array([x.count for x in xs])
        if counts.sum() == 0:
            return out
        for x in xs:
            if x.window != self.window:
                raise ValueError(f"pattern window {x.window} differs from classifier window {self.window}")
        pts = np.vstack([x.points for x in xs])
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        nz = np.flatnonzero(counts)
        for j in range(self.n_classes):
            out[nz, j] += np.add.reduceat(self.log_intensity(j, pts), starts[nz])
        return out

    def classify(self, x: PointPattern) -> int:
        return argmax_first(self.scores(x))

    def classify_many(self, xs: Sequence[PointPattern]) -> np.ndarray:
        return np.array([argmax_first(row) for row in self.score_many(xs)], dtype=int)


def bayes_score(c: BayesClassifier, x: PointPattern, j: int) -> float:
    return float(c.scores(x)[j])


def bayes_classify(c: BayesClassifier, x: PointPattern) -> int:
    return c.classify(x)


def knn_vote(distances, labels, k: int, n_classes: int) -> int:
    """Majority label among the ``k`` nearest; distance ties by index, vote ties by label."""
    order = np.argsort(np.asarray(distances), kind="stable")[:k]
    votes = np.bincount(np.asarray(labels)[order], minlength=n_classes)
    return argmax_first(votes)


def knn_predict(dmat, labels, k: int, n_classes: int) -> np.ndarray:
    """Row-wise :func:`knn_vote` over a query-by-training distance matrix."""
    dmat = np.asarray(dmat)
    if k > dmat.shape[1]:
        raise ValueError(f"k={k} exceeds training size {dmat.shape[1]}")
    order = np.argsort(dmat, axis=1, kind="stable")[:, :k]
    near = np.asarray(labels)[order]
    votes = np.stack([(near == c).sum(axis=1) for c in range(n_classes)], axis=1)
    return votes.argmax(axis=1)


class KnnClassifier:
    """Uniform-vote k-NN rule over a :class:`PatternMetric`."""

    def __init__(self, training: Sequence[LabeledPattern], k: int, metric: PatternMetric,
                 n_classes: Optional[int] = None):
        self.training = list(training)
        if not 1 <= k <= len(self.training):
            raise ValueError(f"k must lie in [1, {len(self.training)}], got {k}")
        self.labels = labels_of(self.training, n_classes)
        self.n_classes = int(self.labels.max()) + 1 if n_classes is None else n_classes
        self.k = int(k)
        self.metric = metric

    def distances(self, xs: Sequence[PointPattern]) -> np.ndarray:
        return self.metric.pairwise(list(xs), [lp.pattern for lp in self.training])

    def classify(self, x: PointPattern) -> int:
        return int(self.classify_many([x])[0])

    def classify_many(self, xs: Sequence[PointPattern]) -> np.ndarray:
        return knn_predict(self.distances(xs), self.labels, self.k, self.n_classes)


def knn_classify(c: KnnClassifier, x: PointPattern) -> int:
    return c.classify(x)
