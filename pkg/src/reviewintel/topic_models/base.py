"""Configuration, fitted-model container and serialization shared by all topic models."""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from reviewintel.corpus import CorpusMatrix, ReviewSentence, vocabulary_fingerprint
from reviewintel.errors import EmptyCorpusError, ValidationError

ALGORITHMS = ("plsa_em", "lda_vi", "lda_gs")
MODEL_FORMAT_VERSION = 1

DEFAULT_ALPHA = 0.1
DEFAULT_BETA = 0.01
DEFAULT_TOLERANCE = 1e-5
DEFAULT_MAX_ITERATIONS = {"plsa_em": 500, "lda_vi": 500, "lda_gs": 1000}
DEFAULT_BURN_IN = 500
DEFAULT_SAMPLE_LAG = 10


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters for one fit.

    ``None`` fields are filled in by :meth:`resolved` with per-algorithm
    defaults, so a config can be written once and reused across algorithms.
    """

    algorithm: str = "lda_gs"
    k: int = 10
    alpha: float | None = None
    beta: float = DEFAULT_BETA
    max_iterations: int | None = None
    tolerance: float = DEFAULT_TOLERANCE
    burn_in: int | None = None
    sample_lag: int = DEFAULT_SAMPLE_LAG
    seed: int = 0

    def resolved(self) -> "ModelConfig":
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        max_it = DEFAULT_MAX_ITERATIONS[self.algorithm] if self.max_iterations is None else self.max_iterations
        if max_it < 1:
            raise ValidationError("max_iterations must be >= 1")
        burn_in = self.burn_in
        if burn_in is None:
            burn_in = min(DEFAULT_BURN_IN, max_it // 2) if self.algorithm == "lda_gs" else 0
        cfg = replace(
            self,
            alpha=DEFAULT_ALPHA if self.alpha is None else self.alpha,
            max_iterations=max_it,
            burn_in=burn_in,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.alpha is not None and self.alpha <= 0:
            raise ValidationError("alpha must be > 0")
        if self.beta <= 0:
            raise ValidationError("beta must be > 0")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be > 0")
        if self.sample_lag < 1:
            raise ValidationError("sample_lag must be >= 1")
        if self.algorithm == "lda_gs" and self.burn_in is not None and self.max_iterations is not None:
            if self.burn_in >= self.max_iterations:
                raise ValidationError(
                    f"burn_in ({self.burn_in}) must be smaller than max_iterations ({self.max_iterations})"
                )


def check_fit_inputs(matrix: CorpusMatrix, config: ModelConfig, algorithm: str) -> ModelConfig:
    cfg = config.resolved()
    if cfg.algorithm != algorithm:
        raise ValidationError(f"config.algorithm is {cfg.algorithm!r}, expected {algorithm!r}")
    if matrix.n_sentences == 0 or matrix.counts.nnz == 0:
        raise EmptyCorpusError("cannot fit a topic model on an empty corpus")
    if cfg.k > matrix.n_terms:
        raise ValidationError(f"k={cfg.k} exceeds vocabulary size {matrix.n_terms}")
    return cfg


class InferredTheta(NamedTuple):
    """Aspect distribution for one sentence; ``oov`` marks an all-unknown sentence."""

    theta: np.ndarray
    oov: bool


def sentence_rng(seed: int, term_ids: Sequence[int]) -> np.random.Generator:
    """Generator keyed on the model seed and the sentence content.

    Keeps held-out inference pure: the same sentence always gets the same
    draws, whatever order sentences are processed in.
    """
    key = zlib.crc32(np.asarray(term_ids, dtype=np.int64).tobytes())
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, key])


@dataclass
class FittedTopicModel:
    """Result of a fit. Treated as immutable once returned."""

    algorithm: str
    phi: np.ndarray
    theta: np.ndarray
    objective_trace: list[float]
    config: ModelConfig
    terms: list[str]
    sentence_ids: list[str] = field(default_factory=list)
    converged: bool = False
    topic_word_params: np.ndarray | None = None

    def __post_init__(self):
        self._index = {t: i for i, t in enumerate(self.terms)}

    @property
    def k(self) -> int:
        return self.phi.shape[0]

    @property
    def vocabulary_fingerprint(self) -> str:
        return vocabulary_fingerprint(self.terms)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self._index[t] for t in tokens if t in self._index]

    def top_words(self, topic: int, n: int = 10) -> list[str]:
        order = np.argsort(-self.phi[topic], kind="stable")[:n]
        return [self.terms[i] for i in order]

    def prevalence(self) -> np.ndarray:
        """Corpus-level mean of ``P(a|r)`` over training sentences."""
        return self.theta.mean(axis=0)

    def infer_theta(self, sentence: ReviewSentence | Sequence[str]) -> InferredTheta:
        from reviewintel.topic_models import infer_theta

        return infer_theta(self, sentence)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "algorithm": self.algorithm,
            "config": asdict(self.config),
            "vocabulary_fingerprint": self.vocabulary_fingerprint,
            "terms": self.terms,
            "converged": bool(self.converged),
            "objective_trace": [float(x) for x in self.objective_trace],
            "phi": self.phi.tolist(),
            "theta": {"sentence_ids": self.sentence_ids, "values": self.theta.tolist()},
            "topic_word_params": None if self.topic_word_params is None
            else self.topic_word_params.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FittedTopicModel":
        if data.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValidationError(f"unsupported model format_version {data.get('format_version')!r}")
        terms = list(data["terms"])
        if vocabulary_fingerprint(terms) != data["vocabulary_fingerprint"]:
            raise ValidationError("model vocabulary does not match its fingerprint")
        twp = data.get("topic_word_params")
        k = len(data["phi"])
        theta = np.asarray(data["theta"]["values"], dtype=np.float64).reshape(-1, k)
        return cls(
            algorithm=data["algorithm"],
            phi=np.asarray(data["phi"], dtype=np.float64),
            theta=theta,
            objective_trace=list(data["objective_trace"]),
            config=ModelConfig(**data["config"]),
            terms=terms,
            sentence_ids=list(data["theta"]["sentence_ids"]),
            converged=bool(data["converged"]),
            topic_word_params=None if twp is None else np.asarray(twp, dtype=np.float64),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FittedTopicModel":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


def normalize_rows(a: np.ndarray) -> np.ndarray:
    sums = a.sum(axis=1, keepdims=True)
    out = np.divide(a, sums, out=np.zeros_like(a), where=sums > 0)
    empty = (sums <= 0).ravel()
    if empty.any():
        out[empty] = 1.0 / a.shape[1]
    return out
