"""LDA by mean-field variational EM.

The variational family factorizes into a Dirichlet over each sentence's
topic mixture (``gamma``), a categorical over each token's topic
(``resp``), and a Dirichlet over each topic's word distribution
(``lam``). Each update below is the exact maximizer of the evidence lower
bound for its block, so the bound never decreases between iterations.
Identical tokens within a sentence share one responsibility row, which is
what the sparse count representation gives us for free.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import digamma, gammaln, logsumexp

from reviewintel.corpus import CorpusMatrix
from reviewintel.topic_models.base import FittedTopicModel, ModelConfig, check_fit_inputs

E_STEP_MAX_ITERATIONS = 100
E_STEP_TOLERANCE = 1e-4
N_STARTS = 6
TRIAL_ITERATIONS = 5


def _dirichlet_expectation(params: np.ndarray) -> np.ndarray:
    """``E[log x]`` under ``Dir(params)``, row-wise."""
    return digamma(params) - digamma(params.sum(axis=1, keepdims=True))


def _scatter(index: np.ndarray, size: int) -> sp.csr_matrix:
    n = index.shape[0]
    return sp.csr_matrix((np.ones(n), (index, np.arange(n))), shape=(size, n))


def elbo(counts: np.ndarray, rows: np.ndarray, cols: np.ndarray, log_resp: np.ndarray,
         gamma: np.ndarray, lam: np.ndarray, alpha: float, beta: float) -> float:
    """Evidence lower bound on the corpus log marginal likelihood."""
    n_docs, k = gamma.shape
    n_terms = lam.shape[1]
    e_log_theta = _dirichlet_expectation(gamma)
    e_log_beta = _dirichlet_expectation(lam)
    resp = np.exp(log_resp)

    token_term = e_log_theta[rows] + e_log_beta[:, cols].T - log_resp
    bound = float(counts @ (resp * token_term).sum(axis=1))

    bound += n_docs * (gammaln(k * alpha) - k * gammaln(alpha))
    bound += float(((alpha - gamma) * e_log_theta).sum())
    bound += float(gammaln(gamma).sum() - gammaln(gamma.sum(axis=1)).sum())

    bound += k * (gammaln(n_terms * beta) - n_terms * gammaln(beta))
    bound += float(((beta - lam) * e_log_beta).sum())
    bound += float(gammaln(lam).sum() - gammaln(lam.sum(axis=1)).sum())
    return bound


def _initial_topics(start: int, rng: np.random.Generator, k: int, beta: float,
                    matrix: CorpusMatrix) -> np.ndarray:
    """Starting ``lam`` for one restart.

    Even starts draw random pseudo-counts on the scale of the data; odd
    starts seed each topic with the counts of a few random sentences,
    which suits corpora of short sentences better. Both shapes compete on
    the bound.
    """
    n_docs, n_terms = matrix.n_sentences, matrix.n_terms
    scale = matrix.counts.sum() / (k * n_terms)
    if start % 2 == 0:
        return beta + scale * rng.gamma(1.0, 1.0, size=(k, n_terms))
    counts = matrix.counts.tocsr()
    lam = np.full((k, n_terms), beta + 0.1 * scale)
    per_topic = max(1, n_docs // (10 * k))
    for topic in range(k):
        docs = rng.choice(n_docs, size=min(per_topic, n_docs), replace=False)
        lam[topic] += np.asarray(counts[docs].sum(axis=0)).ravel()
    return lam


class _State:
    """Variational parameters of one run plus the bound after each update."""

    def __init__(self, lam: np.ndarray, gamma: np.ndarray):
        self.lam = lam
        self.gamma = gamma
        self.trace: list[float] = []


def _iterate(state: _State, rows, cols, counts, by_doc, by_term, alpha: float, beta: float) -> None:
    e_log_beta_t = _dirichlet_expectation(state.lam)[:, cols].T
    gamma = state.gamma
    for _ in range(E_STEP_MAX_ITERATIONS):
        log_resp = _dirichlet_expectation(gamma)[rows] + e_log_beta_t
        log_resp -= logsumexp(log_resp, axis=1, keepdims=True)
        new_gamma = alpha + by_doc @ (counts[:, None] * np.exp(log_resp))
        shift = np.abs(new_gamma - gamma).mean()
        gamma = new_gamma
        if shift < E_STEP_TOLERANCE:
            break
    state.gamma = gamma
    state.lam = beta + (by_term @ (counts[:, None] * np.exp(log_resp))).T
    state.trace.append(elbo(counts, rows, cols, log_resp, gamma, state.lam, alpha, beta))


def fit_lda_vi(matrix: CorpusMatrix, config: ModelConfig) -> FittedTopicModel:
    cfg = check_fit_inputs(matrix, config, "lda_vi")
    n_docs, n_terms, k = matrix.n_sentences, matrix.n_terms, cfg.k
    alpha, beta = float(cfg.alpha), float(cfg.beta)
    rows, cols, counts = matrix.nonzeros()
    by_doc = _scatter(rows, n_docs)
    by_term = _scatter(cols, n_terms)
    step = (rows, cols, counts, by_doc, by_term, alpha, beta)

    rng = np.random.default_rng(cfg.seed)
    gamma0 = np.full((n_docs, k), alpha) + matrix.lengths[:, None] / k

    # the bound has many poor local optima, so several starts get a short
    # trial and only the best one is run to convergence
    trials = []
    for start in range(N_STARTS):
        state = _State(_initial_topics(start, rng, k, beta, matrix), gamma0.copy())
        for _ in range(min(TRIAL_ITERATIONS, cfg.max_iterations)):
            _iterate(state, *step)
        trials.append(state)
    state = max(trials, key=lambda s: s.trace[-1])

    def done() -> bool:
        t = state.trace
        return len(t) > 1 and abs(t[-1] - t[-2]) < cfg.tolerance * abs(t[-2])

    converged = done()
    while not converged and len(state.trace) < cfg.max_iterations:
        _iterate(state, *step)
        converged = done()

    lam, gamma = state.lam, state.gamma
    return FittedTopicModel(
        algorithm="lda_vi",
        phi=lam / lam.sum(axis=1, keepdims=True),
        theta=gamma / gamma.sum(axis=1, keepdims=True),
        objective_trace=state.trace,
        config=cfg,
        terms=list(matrix.terms),
        sentence_ids=list(matrix.sentence_ids),
        converged=converged,
        topic_word_params=lam,
    )


def infer_vi(model: FittedTopicModel, term_ids: list[int], max_iterations: int = 500,
             tolerance: float = 1e-10) -> np.ndarray:
    """Variational E-step for one new sentence, topics held fixed."""
    ids, counts = np.unique(np.asarray(term_ids, dtype=np.int64), return_counts=True)
    alpha = float(model.config.alpha)
    lam = model.topic_word_params
    if lam is None:
        with np.errstate(divide="ignore"):  # a zero weight just rules that topic out
            e_log_beta = np.log(model.phi[:, ids])
    else:
        e_log_beta = _dirichlet_expectation(lam)[:, ids]
    gamma = np.full(model.k, alpha + counts.sum() / model.k)
    for _ in range(max_iterations):
        e_log_theta = digamma(gamma) - digamma(gamma.sum())
        log_resp = e_log_theta[:, None] + e_log_beta
        log_resp -= logsumexp(log_resp, axis=0, keepdims=True)
        new_gamma = alpha + np.exp(log_resp) @ counts
        done = np.abs(new_gamma - gamma).max() < tolerance
        gamma = new_gamma
        if done:
            break
    return gamma / gamma.sum()
