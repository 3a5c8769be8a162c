"""Supervised classification of spatial point patterns.

Plug-in Bayes rule with edge-corrected kernel intensity estimates, k-NN over
Hausdorff-based pattern distances, Poisson and Strauss samplers, and a Monte
Carlo benchmark harness.
"""

from .core import InvariantError, LabeledPattern, PointPattern, Window, euclidean, window_contains
from .metrics import PatternMetric, combined_distance, d0_cardinality, d0_hellinger, d0_kl, hausdorff
from .simulate import IntensitySpec, StraussSpec, sample_poisson, sample_strauss, scenario_intensity
from .intensity import IntensityEstimate, KernelSpec, estimate_replicates, estimate_single, integrated_intensity
from .classify import BayesClassifier, KnnClassifier, bayes_classify, bayes_score, knn_classify
from .crossval import CvConfig, select_k, select_sigma
from .experiments import ExperimentSpec, ExperimentResult, run_experiment, sweep_k, sweep_sigma, classify_dataset

__version__ = "0.1.0"
