"""Batch sentiment scoring for canonical chat corpora."""

from .scoring import (
    AdapterConfig,
    ModelUnavailable,
    RowCountMismatch,
    ScoreSummary,
    TransformersClassifier,
    score_corpus,
)

__version__ = "0.1.0"
