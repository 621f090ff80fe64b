"""Topic models: pLSA (EM), LDA (variational inference), LDA (collapsed Gibbs)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from reviewintel.corpus import CorpusMatrix, ReviewSentence
from reviewintel.errors import ValidationError
from reviewintel.topic_models.base import (
    ALGORITHMS,
    FittedTopicModel,
    InferredTheta,
    ModelConfig,
)
from reviewintel.topic_models.coherence import (
    CoherenceReport,
    KSelectionResult,
    coherence,
    perplexity,
    select_k,
)
from reviewintel.topic_models.lda_gibbs import fit_lda_gibbs, infer_gibbs
from reviewintel.topic_models.lda_vi import fit_lda_vi, infer_vi
from reviewintel.topic_models.plsa import fit_plsa, fold_in

_FITTERS = {"plsa_em": fit_plsa, "lda_vi": fit_lda_vi, "lda_gs": fit_lda_gibbs}


def fit(matrix: CorpusMatrix, config: ModelConfig) -> FittedTopicModel:
    """Fit the algorithm named by ``config.algorithm``."""
    try:
        fitter = _FITTERS[config.algorithm]
    except KeyError:
        raise ValidationError(f"unknown algorithm {config.algorithm!r}; choose from {ALGORITHMS}") from None
    return fitter(matrix, config)


def infer_theta(model: FittedTopicModel,
                sentence: ReviewSentence | Sequence[str]) -> InferredTheta:
    """``P(a|r)`` for a sentence that may be outside the training set.

    Out-of-vocabulary tokens are dropped; a sentence with none left gets a
    uniform vector and ``oov=True``.
    """
    tokens = sentence.tokens if isinstance(sentence, ReviewSentence) else sentence
    ids = model.encode(tokens)
    if not ids:
        return InferredTheta(np.full(model.k, 1.0 / model.k), True)
    if model.k == 1:
        return InferredTheta(np.ones(1), False)
    if model.algorithm == "plsa_em":
        theta = fold_in(model.phi, ids)
    elif model.algorithm == "lda_vi":
        theta = infer_vi(model, ids)
    else:
        theta = infer_gibbs(model, ids)
    return InferredTheta(theta, False)


__all__ = [
    "ALGORITHMS",
    "CoherenceReport",
    "FittedTopicModel",
    "InferredTheta",
    "KSelectionResult",
    "ModelConfig",
    "coherence",
    "fit",
    "fit_lda_gibbs",
    "fit_lda_vi",
    "fit_plsa",
    "infer_theta",
    "perplexity",
    "select_k",
]
