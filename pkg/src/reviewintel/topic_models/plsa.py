"""pLSA fitted by expectation-maximization.

Each sentence is a mixture ``P(w|r) = sum_a P(w|a) P(a|r)``. The E-step
computes the posterior over aspects for every observed (sentence, term)
pair; the M-step re-estimates both distributions from the count-weighted
posteriors. Only stored (nonzero) entries of the count matrix are touched.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp

from reviewintel.corpus import CorpusMatrix
from reviewintel.topic_models.base import (
    FittedTopicModel,
    ModelConfig,
    check_fit_inputs,
    normalize_rows,
)

logger = logging.getLogger(__name__)

_TINY = 1e-300


def plsa_log_likelihood(phi: np.ndarray, theta: np.ndarray, matrix: CorpusMatrix) -> float:
    """``sum_r sum_w c(w,r) log sum_a P(w|a) P(a|r)``."""
    rows, cols, counts = matrix.nonzeros()
    mix = np.einsum("ik,ki->i", theta[rows], phi[:, cols])
    return float(counts @ np.log(np.maximum(mix, _TINY)))


def responsibilities(phi: np.ndarray, theta: np.ndarray, rows: np.ndarray,
                     cols: np.ndarray) -> np.ndarray:
    """``P(t_{r,w} = a)`` for each stored (r, w) pair, shape ``(nnz, K)``."""
    joint = theta[rows] * phi[:, cols].T
    return joint / np.maximum(joint.sum(axis=1, keepdims=True), _TINY)


def _scatter(index: np.ndarray, size: int) -> sp.csr_matrix:
    n = index.shape[0]
    return sp.csr_matrix((np.ones(n), (index, np.arange(n))), shape=(size, n))


def fit_plsa(matrix: CorpusMatrix, config: ModelConfig) -> FittedTopicModel:
    cfg = check_fit_inputs(matrix, config, "plsa_em")
    n_docs, n_terms, k = matrix.n_sentences, matrix.n_terms, cfg.k
    rows, cols, counts = matrix.nonzeros()
    by_doc = _scatter(rows, n_docs)
    by_term = _scatter(cols, n_terms)

    rng = np.random.default_rng(cfg.seed)
    theta = normalize_rows(rng.random((n_docs, k)) + 0.01)
    phi = normalize_rows(rng.random((k, n_terms)) + 0.01)

    trace: list[float] = []
    converged = False
    for it in range(cfg.max_iterations):
        joint = theta[rows] * phi[:, cols].T
        mix = np.maximum(joint.sum(axis=1), _TINY)
        trace.append(float(counts @ np.log(mix)))
        if it > 0 and abs(trace[-1] - trace[-2]) < cfg.tolerance * abs(trace[-2]):
            converged = True
            break
        if it == cfg.max_iterations - 1:
            break
        weighted = joint * (counts / mix)[:, None]
        theta = normalize_rows(by_doc @ weighted)
        phi = normalize_rows((by_term @ weighted).T)

    logger.debug("pLSA K=%d stopped after %d iterations (converged=%s)", k, len(trace), converged)
    return FittedTopicModel(
        algorithm="plsa_em",
        phi=phi,
        theta=theta,
        objective_trace=trace,
        config=cfg,
        terms=list(matrix.terms),
        sentence_ids=list(matrix.sentence_ids),
        converged=converged,
    )


def fold_in(phi: np.ndarray, term_ids: list[int], max_iterations: int = 1000,
            tolerance: float = 1e-10) -> np.ndarray:
    """EM over the mixing weights of one new sentence with ``phi`` frozen."""
    k = phi.shape[0]
    ids, counts = np.unique(np.asarray(term_ids, dtype=np.int64), return_counts=True)
    local = phi[:, ids]
    theta = np.full(k, 1.0 / k)
    for _ in range(max_iterations):
        joint = local * theta[:, None]
        resp = joint / np.maximum(joint.sum(axis=0, keepdims=True), _TINY)
        new = resp @ counts
        new /= new.sum()
        if np.abs(new - theta).max() < tolerance:
            theta = new
            break
        theta = new
    return theta
