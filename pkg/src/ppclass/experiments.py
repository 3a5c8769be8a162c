"""Monte Carlo benchmark harness for the point-pattern classifiers.

Every replication draws fresh balanced training and test samples from a
two-class scenario, fits the requested classifiers and records the test
misclassification rate.  Seeds are derived from the master seed and the
replication index only, so adding replications never changes earlier ones.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .classify import BayesClassifier, argmax_first, knn_predict
from .core import InvariantError, LabeledPattern, PointPattern, Window, labels_of
from .crossval import CvConfig, select_k_from_distances, select_sigma
from .metrics import PatternMetric, hausdorff_matrix
from .simulate import StraussSpec, sample_poisson, sample_strauss, scenario_intensity
from .simulate import IntensitySpec

logger = logging.getLogger(__name__)

BAYES = "Bayes"
KNN_METRICS = {
    "KNN_Hausdorff": None,
    "KNN_Hausdorff_d1": "cardinality",
    "KNN_Hausdorff_Hellinger": "hellinger",
    "KNN_Hausdorff_KL": "kl",
}
CLASSIFIERS = (BAYES,) + tuple(KNN_METRICS)


class ExperimentError(RuntimeError):
    pass


# Scenarios -----------------------------------------------------------------

class Scenario:
    """Two-class generator: ``sample(label, seed)`` returns one pattern."""

    fixed_sigma: Optional[float] = None

    def __init__(self, params: dict):
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ValueError(f"unknown parameters for scenario {self.name!r}: {sorted(unknown)}")
        self.params = {**self.defaults, **{k: float(v) for k, v in params.items()}}

    def sample(self, label: int, seed) -> PointPattern:
        raise NotImplementedError


class _PoissonScenario(Scenario):
    def __init__(self, params: dict):
        super().__init__(params)
        self.intensities = self._build()
        self.window = self.intensities[0].window

    def sample(self, label: int, seed) -> PointPattern:
        return sample_poisson(self.intensities[label], seed)


class SmoothScenario(_PoissonScenario):
    """Class 0: ``c2 exp(-20 r^2)``; class 1: ``c1 exp(-d1 r^2)`` around the centre of the unit square."""

    name = "smooth"
    defaults = {"c1": 500.0, "d1": 20.0, "c2": 500.0}

    def _build(self):
        p = self.params
        return [scenario_intensity("smooth0", [p["c2"]]), scenario_intensity("smooth1", [p["c1"], p["d1"]])]


class WigglyScenario(_PoissonScenario):
    name = "wiggly"
    defaults = {"c2": 100.0}

    def _build(self):
        return [scenario_intensity("wiggly0"), scenario_intensity("wiggly1", [self.params["c2"]])]


class ShiftedScenario(_PoissonScenario):
    """Equal-height bumps centred at (-1/4, 0) and (0, 1/4) on [-1, 1]^2."""

    name = "shifted"
    defaults = {"height": 300.0, "spread": 8.0}
    fixed_sigma = 0.1

    def _build(self):
        hs = [self.params["height"], self.params["spread"]]
        return [scenario_intensity("shifted0", hs), scenario_intensity("shifted1", hs)]


class HomogeneousScenario(_PoissonScenario):
    """Constant intensities ``rate0`` and ``rate1`` on ``[0, side]^2``."""

    name = "homogeneous"
    defaults = {"rate0": 50.0, "rate1": 50.0, "side": 1.0}

    def _build(self):
        w = Window.square(0.0, self.params["side"])
        return [IntensitySpec.constant(self.params["rate0"], w), IntensitySpec.constant(self.params["rate1"], w)]


class StraussScenario(Scenario):
    name = "strauss"
    defaults = {
        "beta1": 0.5, "gamma1": 1.0, "r1": 0.3,
        "beta2": 1.5, "gamma2": 0.5, "r2": 0.6,
        "side": 10.0, "mcmc_steps": 20000.0,
    }
    fixed_sigma = 0.1

    def __init__(self, params: dict):
        super().__init__(params)
        p = self.params
        self.window = Window.square(0.0, p["side"])
        steps = int(p["mcmc_steps"])
        self.specs = [
            StraussSpec(p["beta1"], p["gamma1"], p["r1"], self.window, steps),
            StraussSpec(p["beta2"], p["gamma2"], p["r2"], self.window, steps),
        ]

    def sample(self, label: int, seed) -> PointPattern:
        return sample_strauss(self.specs[label], seed)


SCENARIOS = {cls.name: cls for cls in (SmoothScenario, WigglyScenario, ShiftedScenario,
                                      HomogeneousScenario, StraussScenario)}


def make_scenario(name: str, params: Optional[dict] = None) -> Scenario:
    try:
        cls = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIOS)}") from None
    return cls(dict(params or {}))


# Specs and results ---------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark configuration.

    ``k`` is ``"cv"`` or a fixed neighbour count.  ``sigma`` is ``"cv"``, a
    fixed bandwidth, one bandwidth per class, or ``None`` for the scenario
    default (fixed 0.1 for ``shifted`` and ``strauss``, CV otherwise).
    """

    scenario: str
    params: dict = field(default_factory=dict)
    train_per_class: int = 50
    test_per_class: int = 50
    replications: int = 100
    classifiers: tuple = CLASSIFIERS
    k: Union[str, int] = "cv"
    sigma: Union[None, str, float, tuple] = None
    cv: CvConfig = field(default_factory=CvConfig)
    kernel: str = "gaussian"
    grid: int = 64
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.train_per_class < 1 or self.test_per_class < 1 or self.replications < 1:
            raise ValueError("sample sizes and replications must be positive")
        bad = [c for c in self.classifiers if c not in CLASSIFIERS]
        if bad:
            raise ValueError(f"unknown classifiers {bad}; expected a subset of {CLASSIFIERS}")
        if self.k != "cv" and (isinstance(self.k, bool) or int(self.k) < 1):
            raise ValueError(f"k must be 'cv' or a positive integer, got {self.k!r}")
        object.__setattr__(self, "classifiers", tuple(self.classifiers))
        if isinstance(self.sigma, list):
            object.__setattr__(self, "sigma", tuple(self.sigma))
        make_scenario(self.scenario, self.params)

    def sigma_policy(self):
        if self.sigma is None:
            fixed = SCENARIOS[self.scenario].fixed_sigma
            return "cv" if fixed is None else fixed
        return self.sigma

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classifiers"] = list(self.classifiers)
        d["cv"] = {**asdict(self.cv), "k_grid": list(self.cv.k_grid),
                   "sigma_grid": None if self.cv.sigma_grid is None else list(self.cv.sigma_grid)}
        if isinstance(self.sigma, tuple):
            d["sigma"] = list(self.sigma)
        return d


@dataclass
class ExperimentResult:
    """Misclassification rates per classifier label, one per replication."""

    spec: dict
    replications: int
    rates: dict = field(default_factory=dict)
    hyperparameters: dict = field(default_factory=dict)
    kind: str = "experiment"

    def mean(self, name: str) -> float:
        return float(np.mean(self.rates[name]))

    @property
    def means(self) -> dict:
        return {name: self.mean(name) for name in self.rates}

    def validate(self) -> None:
        for name, values in self.rates.items():
            if len(values) != self.replications:
                raise InvariantError(
                    f"{name}: {len(values)} rates recorded for {self.replications} replications"
                )
            if any(not 0.0 <= v <= 1.0 for v in values):
                raise InvariantError(f"{name}: rate outside [0, 1]")

    def to_dict(self) -> dict:
        self.validate()
        return {
            "kind": self.kind,
            "spec": self.spec,
            "replications": self.replications,
            "results": {
                name: {
                    "rates": list(self.rates[name]),
                    "mean": self.mean(name),
                    "hyperparameters": list(self.hyperparameters.get(name, [])),
                }
                for name in self.rates
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentResult":
        res = d["results"]
        return cls(
            spec=d["spec"],
            replications=d["replications"],
            rates={k: list(v["rates"]) for k, v in res.items()},
            hyperparameters={k: list(v["hyperparameters"]) for k, v in res.items()},
            kind=d.get("kind", "experiment"),
        )

    def long_rows(self):
        for name, values in self.rates.items():
            for rep, v in enumerate(values):
                yield name, rep, v


# Replications --------------------------------------------------------------

def pattern_seed(master: int, rep: int, role: int, label: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=(rep, role, label, index))


def sample_replicate(spec: ExperimentSpec, scenario: Scenario, rep: int) -> tuple:
    """Balanced ``(train, test)`` lists of labeled patterns for replication ``rep``."""
    out = []
    for role, size in enumerate((spec.train_per_class, spec.test_per_class)):
        out.append([
            LabeledPattern(scenario.sample(label, pattern_seed(spec.seed, rep, role, label, i)), label)
            for label in (0, 1)
            for i in range(size)
        ])
    return tuple(out)


def _error(pred, truth) -> float:
    return int(np.sum(np.asarray(pred) != np.asarray(truth))) / len(truth)


def _counts(patterns) -> np.ndarray:
    return np.array([lp.pattern.count for lp in patterns])


def _one_replication(spec: ExperimentSpec, rep: int) -> dict:
    scenario = make_scenario(spec.scenario, spec.params)
    train, test = sample_replicate(spec, scenario, rep)
    y_train, y_test = labels_of(train), labels_of(test)
    out = {}
    if BAYES in spec.classifiers:
        sigma = spec.sigma_policy()
        if sigma == "cv":
            sigma, _ = select_sigma(train, spec.cv, spec.kernel, spec.grid)
        sigma = tuple(np.broadcast_to(np.asarray(sigma, dtype=float), (2,)).tolist())
        clf = BayesClassifier.fit(train, sigma, spec.kernel, spec.grid, n_classes=2)
        pred = clf.classify_many([lp.pattern for lp in test])
        out[BAYES] = (_error(pred, y_test), {"sigma": list(sigma)})
    knn = [c for c in spec.classifiers if c in KNN_METRICS]
    if knn:
        h_train = hausdorff_matrix([lp.pattern for lp in train])
        h_test = hausdorff_matrix([lp.pattern for lp in test], [lp.pattern for lp in train])
        n_train, n_test = _counts(train), _counts(test)
        for name in knn:
            metric = PatternMetric(scenario.window, KNN_METRICS[name])
            d_test = metric.from_hausdorff(h_test, n_test, n_train)
            if spec.k == "cv":
                k, _ = select_k_from_distances(metric.from_hausdorff(h_train, n_train, n_train), y_train, spec.cv, 2)
            else:
                k = int(spec.k)
            pred = knn_predict(d_test, y_train, k, 2)
            out[name] = (_error(pred, y_test), {"k": int(k)})
    return out


def _guarded(fn, spec, rep, *args):
    try:
        return rep, fn(spec, rep, *args)
    except Exception as exc:
        raise ExperimentError(f"replication {rep}: {exc}") from exc


def _map_replications(spec: ExperimentSpec, fn, *args) -> list:
    reps = range(spec.replications)
    if spec.n_jobs == 1:
        results = [_guarded(fn, spec, rep, *args) for rep in reps]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=spec.n_jobs)(delayed(_guarded)(fn, spec, rep, *args) for rep in reps)
    return [r for _, r in sorted(results, key=lambda t: t[0])]


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Misclassification rates of every requested classifier over all replications."""
    outputs = _map_replications(spec, _one_replication)
    result = ExperimentResult(spec.to_dict(), spec.replications)
    for name in spec.classifiers:
        result.rates[name] = [o[name][0] for o in outputs]
        result.hyperparameters[name] = [o[name][1] for o in outputs]
    result.validate()
    return result


def _k_sweep_replication(spec: ExperimentSpec, rep: int, k_list) -> dict:
    scenario = make_scenario(spec.scenario, spec.params)
    train, test = sample_replicate(spec, scenario, rep)
    y_train, y_test = labels_of(train), labels_of(test)
    h_test = hausdorff_matrix([lp.pattern for lp in test], [lp.pattern for lp in train])
    n_train, n_test = _counts(train), _counts(test)
    out = {}
    for name in spec.classifiers:
        if name not in KNN_METRICS:
            continue
        d_test = PatternMetric(scenario.window, KNN_METRICS[name]).from_hausdorff(h_test, n_test, n_train)
        for k in k_list:
            out[(name, k)] = _error(knn_predict(d_test, y_train, k, 2), y_test)
    return out


def sweep_k(spec: ExperimentSpec, k_list: Sequence[int]) -> ExperimentResult:
    """k-NN error at each fixed ``k``; rate labels are ``"<classifier>@k=<k>"``."""
    k_list = [int(k) for k in k_list]
    if not k_list or min(k_list) < 1 or max(k_list) > 2 * spec.train_per_class:
        raise ValueError(f"k values must lie in [1, {2 * spec.train_per_class}]")
    outputs = _map_replications(spec, _k_sweep_replication, k_list)
    result = ExperimentResult({**spec.to_dict(), "k_list": k_list}, spec.replications, kind="sweep_k")
    for key in outputs[0]:
        label = f"{key[0]}@k={key[1]}"
        result.rates[label] = [o[key] for o in outputs]
        result.hyperparameters[label] = [{"k": key[1]}] * spec.replications
    result.validate()
    return result


def _sigma_sweep_replication(spec: ExperimentSpec, rep: int, pairs) -> dict:
    scenario = make_scenario(spec.scenario, spec.params)
    train, test = sample_replicate(spec, scenario, rep)
    y_test = labels_of(test)
    test_patterns = [lp.pattern for lp in test]
    terms = {}
    for s in sorted({s for pair in pairs for s in pair}):
        clf = BayesClassifier.fit(train, s, spec.kernel, spec.grid, n_classes=2)
        terms[s] = clf.score_many(test_patterns)
    out = {}
    for s0, s1 in pairs:
        scores = np.stack([terms[s0][:, 0], terms[s1][:, 1]], axis=1)
        pred = [argmax_first(row) for row in scores]
        out[(s0, s1)] = _error(pred, y_test)
    return out


def sweep_sigma(spec: ExperimentSpec, sigma_pairs) -> ExperimentResult:
    """Bayes error at each ``(sigma0, sigma1)``; labels are ``"Bayes@sigma=(s0,s1)"``."""
    pairs = [(float(a), float(b)) for a, b in sigma_pairs]
    if not pairs or min(min(p) for p in pairs) <= 0:
        raise ValueError("sigma_pairs must be a nonempty list of positive pairs")
    outputs = _map_replications(spec, _sigma_sweep_replication, pairs)
    result = ExperimentResult({**spec.to_dict(), "sigma_pairs": [list(p) for p in pairs]},
                              spec.replications, kind="sweep_sigma")
    for pair in dict.fromkeys(pairs):
        label = f"{BAYES}@sigma=({pair[0]!r},{pair[1]!r})"
        result.rates[label] = [o[pair] for o in outputs]
        result.hyperparameters[label] = [{"sigma": list(pair)}] * spec.replications
    result.validate()
    return result


def sweep_table(result: ExperimentResult) -> dict:
    """``{(classifier, param): mean}`` from a sweep result."""
    table = {}
    for label, values in result.rates.items():
        name, _, param = label.partition("@")
        key, _, value = param.partition("=")
        parsed = int(value) if key == "k" else tuple(float(v) for v in value.strip("()").split(","))
        table[(name, parsed)] = float(np.mean(values))
    return table


# Dataset pipeline ----------------------------------------------------------

@dataclass
class DatasetReport:
    classes: list
    confusion: dict
    errors: dict
    hyperparameters: dict

    def to_dict(self) -> dict:
        return {
            "classes": self.classes,
            "results": {
                name: {
                    "confusion": self.confusion[name],
                    "error": self.errors[name],
                    "hyperparameters": self.hyperparameters[name],
                }
                for name in self.confusion
            },
        }


def classify_dataset(train: Sequence[LabeledPattern], test: Sequence[LabeledPattern], config: dict) -> DatasetReport:
    """Fit on ``train``, evaluate on ``test``; confusion rows are true classes.

    ``config`` keys: ``classifiers``, ``k`` (``"cv"`` or int), ``sigma``
    (``"cv"``, a float or one per class), ``cv`` (:class:`CvConfig` kwargs),
    ``kernel`` and ``grid``.
    """
    train, test = list(train), list(test)
    if not train:
        raise ValueError("training set is empty")
    if not test:
        raise ValueError("test set is empty")
    y_train, y_test = labels_of(train), labels_of(test)
    missing = sorted(set(y_test.tolist()) - set(y_train.tolist()))
    if missing:
        raise ValueError(f"classes {missing} appear in the test set but not in training")
    n_classes = int(max(y_train.max(), y_test.max())) + 1
    absent = sorted(set(range(n_classes)) - set(y_train.tolist()))
    if absent:
        raise ValueError(f"classes {absent} have no training patterns")
    classifiers = tuple(config.get("classifiers", CLASSIFIERS))
    cv = config.get("cv", CvConfig())
    if isinstance(cv, dict):
        cv = CvConfig(**cv)
    kernel, grid = config.get("kernel", "gaussian"), int(config.get("grid", 64))
    window = train[0].pattern.window
    train_p, test_p = [lp.pattern for lp in train], [lp.pattern for lp in test]
    preds, hyper = {}, {}
    for name in classifiers:
        if name == BAYES:
            sigma = config.get("sigma", "cv")
            if sigma == "cv":
                sigma, _ = select_sigma(train, cv, kernel, grid)
            sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n_classes,)).tolist()
            clf = BayesClassifier.fit(train, sigma, kernel, grid, n_classes)
            preds[name], hyper[name] = clf.classify_many(test_p), {"sigma": sigma}
        elif name in KNN_METRICS:
            metric = PatternMetric(window, KNN_METRICS[name])
            k = config.get("k", "cv")
            if k == "cv":
                k, _ = select_k_from_distances(metric.pairwise(train_p), y_train, cv, n_classes)
            preds[name] = knn_predict(metric.pairwise(test_p, train_p), y_train, int(k), n_classes)
            hyper[name] = {"k": int(k)}
        else:
            raise ValueError(f"unknown classifier {name!r}")
    confusion, errors = {}, {}
    for name, pred in preds.items():
        mat = np.zeros((n_classes, n_classes), dtype=int)
        np.add.at(mat, (y_test, np.asarray(pred)), 1)
        confusion[name] = mat.tolist()
        errors[name] = _error(pred, y_test)
    return DatasetReport(list(range(n_classes)), confusion, errors, hyper)
