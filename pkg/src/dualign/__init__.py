"""Dual-level alignment objective engine for multimodal sentence
representation training: contrastive and distillation losses with
analytic gradients, teacher target construction, synthetic data,
a small trainer, and evaluation metrics."""

from .errors import ConfigError, DualignError, FormatError, NumericsError, ShapeError
from .losses import Hyperparams, LossResult
from .tensor import (
    EmbeddingBatch,
    RowDistribution,
    SimilarityMatrix,
    cosine_sim_matrix,
    kl_rows,
    softmax_rows,
)

__all__ = [
    "ConfigError", "DualignError", "FormatError", "NumericsError", "ShapeError",
    "Hyperparams", "LossResult",
    "EmbeddingBatch", "RowDistribution", "SimilarityMatrix",
    "cosine_sim_matrix", "kl_rows", "softmax_rows",
]

__version__ = "0.1.0"
