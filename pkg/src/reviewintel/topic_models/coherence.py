"""Topic coherence and the number-of-topics sweep."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from reviewintel.corpus import CorpusMatrix
from reviewintel.errors import ValidationError
from reviewintel.topic_models.base import FittedTopicModel, ModelConfig

logger = logging.getLogger(__name__)

DEFAULT_N_TOP = 10
DEFAULT_EPSILON = 1.0


@dataclass
class CoherenceReport:
    per_topic: list[float]
    n_top: int
    epsilon: float
    top_words: list[list[str]] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_topic))


def coherence(model: FittedTopicModel, matrix: CorpusMatrix, n_top: int = DEFAULT_N_TOP,
              epsilon: float = DEFAULT_EPSILON) -> CoherenceReport:
    """Mean pairwise log-lift of each topic's ``n_top`` most probable words.

    Probabilities are estimated from sentence-level co-occurrence with
    additive smoothing: ``P(w) = (D(w) + eps) / (R + eps)`` and
    ``P(wi, wj) = (D(wi, wj) + eps) / (R + eps)`` where ``D`` counts
    sentences.
    """
    if n_top < 2:
        raise ValidationError("n_top must be >= 2")
    if n_top > matrix.n_terms:
        raise ValidationError(f"n_top={n_top} exceeds vocabulary size {matrix.n_terms}")
    if model.phi.shape[1] != matrix.n_terms:
        raise ValidationError("model and matrix vocabularies differ in size")

    present = (matrix.counts > 0).astype(np.float64).tocsc()
    n_docs = matrix.n_sentences
    log_norm = math.log(n_docs + epsilon)
    iu = np.triu_indices(n_top, k=1)

    scores, words = [], []
    for k in range(model.k):
        top = np.argsort(-model.phi[k], kind="stable")[:n_top]
        sub = present[:, top]
        co = (sub.T @ sub).toarray()
        log_p = np.log(np.diag(co) + epsilon) - log_norm
        log_pair = np.log(co[iu] + epsilon) - log_norm
        lift = log_pair - log_p[iu[0]] - log_p[iu[1]]
        scores.append(float(lift.mean()))
        words.append([matrix.terms[i] for i in top])
    return CoherenceReport(scores, n_top, epsilon, words)


@dataclass
class KSelectionResult:
    k_min: int
    k_max: int
    step: int
    mean_coherence: dict[int, float]
    chosen_k: int

    def to_dict(self) -> dict:
        return {
            "k_min": self.k_min,
            "k_max": self.k_max,
            "step": self.step,
            "mean_coherence": {str(k): v for k, v in self.mean_coherence.items()},
            "chosen_k": self.chosen_k,
        }


def smallest_best_k(mean_coherence: dict[int, float]) -> int:
    """Smallest K attaining the maximal coherence."""
    best = max(mean_coherence.values())
    return min(k for k, v in mean_coherence.items() if v == best)


def select_k(matrix: CorpusMatrix, template: ModelConfig, k_min: int = 5, k_max: int = 50,
             step: int = 1, n_top: int = DEFAULT_N_TOP, epsilon: float = DEFAULT_EPSILON,
             seeds: Sequence[int] | None = None) -> KSelectionResult:
    """Fit one model per K and keep the smallest K with the best mean coherence.

    With several ``seeds`` the coherence at each K is averaged over fits.
    """
    from reviewintel.topic_models import fit

    if not 2 <= k_min <= k_max:
        raise ValidationError(f"need 2 <= k_min <= k_max, got k_min={k_min}, k_max={k_max}")
    if step < 1:
        raise ValidationError("step must be >= 1")
    seeds = list(seeds) if seeds else [template.seed]

    table: dict[int, float] = {}
    for k in range(k_min, k_max + 1, step):
        values = []
        for seed in seeds:
            try:
                model = fit(matrix, replace(template, k=k, seed=seed))
                values.append(coherence(model, matrix, n_top, epsilon).mean)
            except ValidationError as exc:
                raise ValidationError(f"K={k}: {exc}") from exc
        table[k] = float(np.mean(values))
        logger.info("%s K=%d mean coherence %.4f", template.algorithm, k, table[k])
    return KSelectionResult(k_min, k_max, step, table, smallest_best_k(table))


def perplexity(model: FittedTopicModel, sentences: Sequence[Sequence[str]]) -> float:
    """Held-out perplexity; a diagnostic only, K is chosen by coherence."""
    from reviewintel.topic_models import infer_theta

    log_lik, n_tokens = 0.0, 0
    for tokens in sentences:
        ids = model.encode(tokens)
        if not ids:
            continue
        theta = infer_theta(model, tokens).theta
        log_lik += float(np.log(theta @ model.phi[:, ids]).sum())
        n_tokens += len(ids)
    if n_tokens == 0:
        raise ValidationError("no in-vocabulary tokens to score")
    return math.exp(-log_lik / n_tokens)
