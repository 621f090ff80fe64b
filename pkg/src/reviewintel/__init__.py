"""Unsupervised aspect-based opinion mining for customer review corpora.

Sentences are assigned an aspect by an ensemble of three topic models
(pLSA via EM, LDA via variational inference, LDA via collapsed Gibbs
sampling) and a sentiment by an ensemble of three lexicon analyzers. The
labels are rolled up into per-entity opinion summaries, competitor
matrices and bigram root-cause reports.
"""

from reviewintel.errors import (
    EmptyCorpusError,
    ReviewIntelError,
    StageDependencyError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "EmptyCorpusError",
    "ReviewIntelError",
    "StageDependencyError",
    "ValidationError",
    "__version__",
]
