"""Deep clustering toolkit for tabular data.

An autoencoder learns a low-dimensional embedding jointly with a Gaussian
cluster head (trainable means and diagonal covariances, closed-form cluster
weights) whose posterior supervises a softmax projection head. Ships with
K-means and GMM baselines in input and embedding space, a t-distribution
fine-tuning mode, clustering metrics, and a benchmark CLI.
"""

from .baselines import GmmResult, KMeansResult, gmm_fit, kmeans
from .benchmark import BenchmarkTask, run_benchmark, run_single
from .dataset import (
    Dataset,
    DatasetStats,
    IngestionError,
    dataset_stats,
    load_csv,
    preprocess,
)
from .linalg import Rng
from .metrics import (
    LabelPair,
    adjusted_rand_index,
    clustering_accuracy,
    normalized_mutual_information,
)
from .neuralnet import DivergenceError, Network, pretrain_autoencoder
from .training import (
    ClusterHead,
    GcealsConfig,
    GcealsRun,
    TrainReport,
    train_dec_variant,
    train_gceals,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkTask",
    "ClusterHead",
    "Dataset",
    "DatasetStats",
    "DivergenceError",
    "GcealsConfig",
    "GcealsRun",
    "GmmResult",
    "IngestionError",
    "KMeansResult",
    "LabelPair",
    "Network",
    "Rng",
    "TrainReport",
    "adjusted_rand_index",
    "clustering_accuracy",
    "dataset_stats",
    "gmm_fit",
    "kmeans",
    "load_csv",
    "normalized_mutual_information",
    "preprocess",
    "pretrain_autoencoder",
    "run_benchmark",
    "run_single",
    "train_dec_variant",
    "train_gceals",
]
