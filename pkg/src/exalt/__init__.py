"""Explainable clustering toolkit.

Clusters a dataset (k-means, DBSCAN, diagonal GMM), scores the result,
probes its stability, proposes alternatives, and explains it with a shallow
surrogate tree, SHAP attributions and a 2-D embedding.
"""
from ._version import __version__
from .clustering import AlgorithmConfig, cluster, dbscan_fit, gmm_fit, kmeans_fit
from .dataset import Dataset, gen_blobs, gen_event_sequences, gen_multistage, load_csv, standardize
from .errors import ConfigError, DataError, ExaltError, StageError
from .validation import ValidationScores, validate

__all__ = [
    "__version__", "AlgorithmConfig", "cluster", "dbscan_fit", "gmm_fit", "kmeans_fit",
    "Dataset", "gen_blobs", "gen_event_sequences", "gen_multistage", "load_csv", "standardize",
    "ConfigError", "DataError", "ExaltError", "StageError", "ValidationScores", "validate",
]
