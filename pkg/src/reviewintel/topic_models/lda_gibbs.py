"""LDA by collapsed Gibbs sampling.

Every token carries a topic assignment. A sweep resamples each assignment
from its full conditional given all others,

    P(z_i = k | rest) ~ (N_{r,k} + alpha) (N_{k,w} + beta) / (N_k + U beta),

with the token's own assignment removed from the counts. After
``burn_in`` sweeps, every ``sample_lag``-th sweep contributes its counts
to a running average from which phi and theta are read off.

Uniform draws come from a seeded numpy ``Generator`` and are handed to
the compiled kernel, so results depend only on the seed.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from reviewintel.corpus import CorpusMatrix
from reviewintel.topic_models.base import (
    FittedTopicModel,
    ModelConfig,
    check_fit_inputs,
    sentence_rng,
)

INFER_SWEEPS = 100
INFER_BURN_IN = 20


@njit(cache=True)
def _sweep(words, docs, z, ndk, nkw, nk, alpha, beta, u_beta, draws):
    n_topics = nk.shape[0]
    cumulative = np.empty(n_topics)
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for t in range(n_topics):
            total += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + u_beta)
            cumulative[t] = total
        target = draws[i] * total
        k = 0
        while k < n_topics - 1 and cumulative[k] <= target:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


@njit(cache=True)
def _infer(words, phi, alpha, z, draws, n_sweeps, burn_in):
    n_topics = phi.shape[0]
    n = words.shape[0]
    counts = np.zeros(n_topics)
    for i in range(n):
        counts[z[i]] += 1
    acc = np.zeros(n_topics)
    n_samples = 0
    cumulative = np.empty(n_topics)
    pos = 0
    for sweep in range(n_sweeps):
        for i in range(n):
            w = words[i]
            counts[z[i]] -= 1
            total = 0.0
            for t in range(n_topics):
                total += (counts[t] + alpha) * phi[t, w]
                cumulative[t] = total
            target = draws[pos] * total
            pos += 1
            k = 0
            while k < n_topics - 1 and cumulative[k] <= target:
                k += 1
            z[i] = k
            counts[k] += 1
        if sweep >= burn_in:
            for t in range(n_topics):
                acc[t] += counts[t]
            n_samples += 1
    return acc / n_samples


class GibbsSampler:
    """Mutable sampler state for one corpus: assignments plus the three count tables."""

    def __init__(self, matrix: CorpusMatrix, config: ModelConfig):
        self.config = config
        rows, cols, counts = matrix.nonzeros()
        reps = counts.astype(np.int64)
        self.words = np.repeat(cols, reps)
        self.docs = np.repeat(rows, reps)
        self.n_docs, self.n_terms, self.k = matrix.n_sentences, matrix.n_terms, config.k
        self.lengths = matrix.lengths.astype(np.int64)
        self.rng = np.random.default_rng(config.seed)

        self.z = self.rng.integers(0, self.k, size=self.words.shape[0]).astype(np.int64)
        self.ndk = np.zeros((self.n_docs, self.k), dtype=np.int64)
        self.nkw = np.zeros((self.k, self.n_terms), dtype=np.int64)
        np.add.at(self.ndk, (self.docs, self.z), 1)
        np.add.at(self.nkw, (self.z, self.words), 1)
        self.nk = self.nkw.sum(axis=1)

    @property
    def n_tokens(self) -> int:
        return self.words.shape[0]

    def sweep(self) -> None:
        draws = self.rng.random(self.n_tokens)
        _sweep(self.words, self.docs, self.z, self.ndk, self.nkw, self.nk,
               float(self.config.alpha), float(self.config.beta),
               float(self.n_terms * self.config.beta), draws)

    def estimates(self, ndk: np.ndarray | None = None, nkw: np.ndarray | None = None):
        """Point estimates of (phi, theta) from the given (or current) counts."""
        ndk = self.ndk if ndk is None else ndk
        nkw = self.nkw if nkw is None else nkw
        a, b = self.config.alpha, self.config.beta
        phi = (nkw + b) / (nkw.sum(axis=1, keepdims=True) + self.n_terms * b)
        theta = (ndk + a) / (self.lengths[:, None] + self.k * a)
        return phi, theta

    def log_likelihood(self, matrix: CorpusMatrix) -> float:
        """Corpus log-likelihood under the current count-based estimates."""
        phi, theta = self.estimates()
        rows, cols, counts = matrix.nonzeros()
        mix = np.einsum("ik,ki->i", theta[rows], phi[:, cols])
        return float(counts @ np.log(mix))


def fit_lda_gibbs(matrix: CorpusMatrix, config: ModelConfig) -> FittedTopicModel:
    cfg = check_fit_inputs(matrix, config, "lda_gs")
    sampler = GibbsSampler(matrix, cfg)
    acc_dk = np.zeros(sampler.ndk.shape, dtype=np.float64)
    acc_kw = np.zeros(sampler.nkw.shape, dtype=np.float64)
    n_samples = 0
    trace: list[float] = []
    for sweep in range(1, cfg.max_iterations + 1):
        sampler.sweep()
        trace.append(sampler.log_likelihood(matrix))
        if sweep > cfg.burn_in and (sweep - cfg.burn_in - 1) % cfg.sample_lag == 0:
            acc_dk += sampler.ndk
            acc_kw += sampler.nkw
            n_samples += 1
    phi, theta = sampler.estimates(acc_dk / n_samples, acc_kw / n_samples)
    return FittedTopicModel(
        algorithm="lda_gs",
        phi=phi,
        theta=theta,
        objective_trace=trace,
        config=cfg,
        terms=list(matrix.terms),
        sentence_ids=list(matrix.sentence_ids),
        converged=True,
    )


def infer_gibbs(model: FittedTopicModel, term_ids: list[int]) -> np.ndarray:
    """Sample assignments for a new sentence with the topic-word table frozen."""
    words = np.asarray(term_ids, dtype=np.int64)
    rng = sentence_rng(model.config.seed, term_ids)
    z = rng.integers(0, model.k, size=words.shape[0]).astype(np.int64)
    draws = rng.random(INFER_SWEEPS * words.shape[0])
    mean_counts = _infer(words, np.ascontiguousarray(model.phi), float(model.config.alpha),
                         z, draws, INFER_SWEEPS, INFER_BURN_IN)
    theta = (mean_counts + model.config.alpha) / (words.shape[0] + model.k * model.config.alpha)
    return theta / theta.sum()
