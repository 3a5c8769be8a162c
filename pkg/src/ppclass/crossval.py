"""Cross-validated choice of k (k-NN) and sigma (Bayes)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .classify import argmax_first, intensity_floor, knn_predict
from .core import LabeledPattern, Window, check_same_window, labels_of
from .intensity import KernelSpec, self_kernel_sums, source_masses, window_normalizer
from .metrics import PatternMetric

DEFAULT_K_GRID = (1, 3, 5, 7, 9, 11, 15, 21, 25)


def default_sigma_grid(window: Window, n: int = 8) -> tuple:
    d = window.diameter()
    return tuple(float(v) for v in np.geomspace(d / 50, d / 2, n))


@dataclass(frozen=True)
class CvConfig:
    """Cross-validation settings; ``folds="loo"`` means leave-one-out."""

    folds: Union[int, str] = 5
    k_grid: tuple = DEFAULT_K_GRID
    sigma_grid: Optional[tuple] = None
    share_sigma: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.folds != "loo" and (isinstance(self.folds, bool) or int(self.folds) < 2):
            raise ValueError(f"folds must be an integer >= 2 or 'loo', got {self.folds!r}")
        if not self.k_grid or any(int(k) < 1 for k in self.k_grid):
            raise ValueError("k_grid must be a nonempty list of positive integers")
        if self.sigma_grid is not None and (not self.sigma_grid or any(s <= 0 for s in self.sigma_grid)):
            raise ValueError("sigma_grid must be a nonempty list of positive reals")
        object.__setattr__(self, "k_grid", tuple(sorted(int(k) for k in self.k_grid)))
        if self.sigma_grid is not None:
            object.__setattr__(self, "sigma_grid", tuple(sorted(float(s) for s in self.sigma_grid)))

    def sigmas(self, window: Window) -> tuple:
        return self.sigma_grid if self.sigma_grid is not None else default_sigma_grid(window)


def stratified_folds(labels, folds: Union[int, str], seed: int) -> np.ndarray:
    """Fold index per sample, balancing classes across folds."""
    labels = np.asarray(labels)
    n = labels.size
    if folds == "loo":
        return np.arange(n)
    folds = int(folds)
    if folds > n:
        raise ValueError(f"{folds} folds requested for {n} training patterns")
    rng = np.random.default_rng(seed)
    out = np.empty(n, dtype=int)
    offset = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        out[idx] = (offset + np.arange(idx.size)) % folds
        offset += idx.size
    return out


def _fold_ids(assign: np.ndarray) -> list:
    return [np.flatnonzero(assign == f) for f in np.unique(assign)]


def select_k_from_distances(dmat, labels, cfg: CvConfig, n_classes: Optional[int] = None) -> tuple:
    """``(k, cv_error)`` from a precomputed training distance matrix."""
    labels = np.asarray(labels)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    assign = stratified_folds(labels, cfg.folds, cfg.seed)
    folds = _fold_ids(assign)
    smallest_train = labels.size - max(f.size for f in folds)
    if cfg.k_grid[-1] > smallest_train:
        raise ValueError(f"k={cfg.k_grid[-1]} exceeds the fold training size {smallest_train}")
    wrong = np.zeros(len(cfg.k_grid), dtype=int)
    for val in folds:
        train = np.setdiff1d(np.arange(labels.size), val)
        sub = dmat[np.ix_(val, train)]
        for i, k in enumerate(cfg.k_grid):
            wrong[i] += int(np.sum(knn_predict(sub, labels[train], k, n_classes) != labels[val]))
    best = int(np.argmin(wrong))  # first minimum: smallest k
    return cfg.k_grid[best], wrong[best] / labels.size


def select_k(training: Sequence[LabeledPattern], metric: PatternMetric, cfg: CvConfig) -> tuple:
    """Grid search for the k-NN neighbour count; ties go to the smaller k."""
    labels = labels_of(training)
    dmat = metric.pairwise([lp.pattern for lp in training])
    return select_k_from_distances(dmat, labels, cfg)


class BayesCvCache:
    """Per-pattern kernel sums that let the Bayes rule be refit on any subset.

    For each point ``q`` of every training pattern and each training pattern
    ``i``, ``sums[q, i]`` is the unnormalized kernel sum of pattern ``i`` at
    ``q``.  A class estimate on a subset ``I`` is then ``sums[:, I].mean(1) / K``.
    """

    def __init__(self, patterns, kernel: KernelSpec, grid: int = 64):
        self.window = check_same_window(*patterns)
        self.counts = np.array([p.count for p in patterns])
        self.offsets = np.concatenate([[0], np.cumsum(self.counts)])
        pts = np.vstack([p.points for p in patterns]) if self.counts.sum() else np.empty((0, self.window.dim))
        self.sums = self_kernel_sums(kernel, pts, self.offsets)
        self.norm = window_normalizer(self.window, kernel, pts, grid)
        per_source = source_masses(self.window, kernel, pts, grid)
        self.masses = np.zeros(len(patterns))
        nz = np.flatnonzero(self.counts)
        if nz.size:
            self.masses[nz] = np.add.reduceat(per_source, self.offsets[:-1][nz])

    def class_terms(self, members: np.ndarray, prior: float, queries: np.ndarray) -> np.ndarray:
        """``log p - mu + sum log lambda`` of one class for each query pattern."""
        mu = float(self.masses[members].mean())
        floor = intensity_floor(mu, self.window)
        out = np.full(queries.size, np.log(prior) - mu)
        rows = [np.arange(self.offsets[q], self.offsets[q + 1]) for q in queries]
        lens = np.array([r.size for r in rows])
        if lens.sum() == 0:
            return out
        rows = np.concatenate(rows)
        lam = self.sums[np.ix_(rows, members)].mean(axis=1) / self.norm[rows]
        logs = np.log(np.maximum(lam, floor))
        nz = np.flatnonzero(lens)
        starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
        out[nz] += np.add.reduceat(logs, starts[nz])
        return out


def bayes_cv_terms(training: Sequence[LabeledPattern], sigmas, cfg: CvConfig,
                   kernel: str = "gaussian", grid: int = 64) -> np.ndarray:
    """Array ``terms[s, i, j]``: class-``j`` score of pattern ``i`` when left out, at ``sigmas[s]``."""
    labels = labels_of(training)
    n_classes = int(labels.max()) + 1
    patterns = [lp.pattern for lp in training]
    window = check_same_window(*patterns)
    folds = _fold_ids(stratified_folds(labels, cfg.folds, cfg.seed))
    terms = np.zeros((len(sigmas), labels.size, n_classes))
    for s, sigma in enumerate(sigmas):
        cache = BayesCvCache(patterns, KernelSpec(kernel, float(sigma), window.dim), grid)
        for val in folds:
            train = np.setdiff1d(np.arange(labels.size), val)
            for j in range(n_classes):
                members = train[labels[train] == j]
                if members.size == 0:
                    raise ValueError(f"class {j} is missing from a training fold")
                terms[s, val, j] = cache.class_terms(members, members.size / train.size, val)
    return terms


def select_sigma(training: Sequence[LabeledPattern], cfg: CvConfig,
                 kernel: str = "gaussian", grid: int = 64) -> tuple:
    """``(sigma per class, cv_error)``; the diagonal grid when ``share_sigma``.

    Ties go to the lexicographically smallest bandwidth tuple.
    """
    labels = labels_of(training)
    n_classes = int(labels.max()) + 1
    window = check_same_window(*(lp.pattern for lp in training))
    sigmas = cfg.sigmas(window)
    terms = bayes_cv_terms(training, sigmas, cfg, kernel, grid)
    if cfg.share_sigma:
        combos = [(s,) * n_classes for s in range(len(sigmas))]
    else:
        combos = list(itertools.product(range(len(sigmas)), repeat=n_classes))
    best, best_wrong = None, None
    cls = np.arange(n_classes)
    for combo in combos:
        scores = terms[list(combo), :, cls].T
        pred = np.array([argmax_first(row) for row in scores])
        wrong = int(np.sum(pred != labels))
        if best_wrong is None or wrong < best_wrong:
            best, best_wrong = combo, wrong
    return tuple(sigmas[s] for s in best), best_wrong / labels.size
