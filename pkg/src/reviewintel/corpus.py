"""Review ingestion and sentence-level preprocessing.

Reviews are split into sentences, normalized, tokenized and stemmed, then
turned into a sentence-by-term count matrix that every topic model
consumes. Everything here is deterministic: the same input files and seed
always produce the same serialized corpus.
"""

from __future__ import annotations

import csv
import datetime as dt
import functools
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from reviewintel.errors import EmptyCorpusError, ValidationError

logger = logging.getLogger(__name__)

CORPUS_FORMAT_VERSION = 1
REQUIRED_FIELDS = ("review_id", "entity_id", "text")
MIN_TOKEN_LENGTH = 2
STEMMERS = ("snowball", "porter", "none")


def _read_resource_lines(name: str) -> list[str]:
    text = resources.files("reviewintel.data").joinpath(name).read_text("utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def read_word_list(path: str | Path) -> frozenset[str]:
    """Read a one-entry-per-line file, skipping blanks and ``#`` comments."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(
            line.strip().lower()
            for line in fh
            if line.strip() and not line.lstrip().startswith("#")
        )


DEFAULT_STOPWORDS = frozenset(_read_resource_lines("stopwords.txt"))
DEFAULT_ABBREVIATIONS = frozenset(_read_resource_lines("abbreviations.txt"))


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Review:
    review_id: str
    entity_id: str
    text: str
    timestamp: dt.date | None = None
    rating: float | None = None


@dataclass(frozen=True)
class SkippedRow:
    line: int
    reason: str


@dataclass
class ReviewSet:
    reviews: list[Review]
    skipped: list[SkippedRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.reviews)

    def __iter__(self):
        return iter(self.reviews)


@dataclass(frozen=True)
class ReviewSentence:
    sentence_id: str
    review_id: str
    entity_id: str
    position: int
    raw_text: str
    tokens: tuple[str, ...]

    @property
    def normalized_key(self) -> str:
        return " ".join(self.tokens)


@dataclass
class Vocabulary:
    """Bijection between terms and dense column indices."""

    terms: list[str]
    sentence_frequency: np.ndarray

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise ValidationError("vocabulary terms must be unique")

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to indices, silently dropping out-of-vocabulary ones."""
        return [self.index[t] for t in tokens if t in self.index]

    def fingerprint(self) -> str:
        return vocabulary_fingerprint(self.terms)


def vocabulary_fingerprint(terms: Sequence[str]) -> str:
    digest = hashlib.sha256("\n".join(terms).encode("utf-8")).hexdigest()
    return digest[:16]


@dataclass
class CorpusMatrix:
    """Sparse sentence-by-term counts ``c(w, r)``.

    Stored row-major as a CSR matrix of shape ``(R, U)``; row ``r`` belongs
    to ``sentence_ids[r]``.
    """

    counts: sp.csr_matrix
    sentence_ids: list[str]
    terms: list[str] | None = None

    def __post_init__(self):
        self.counts = sp.csr_matrix(self.counts, dtype=np.int64)
        self.counts.sum_duplicates()
        self.counts.eliminate_zeros()
        self.counts.sort_indices()
        if self.counts.shape[0] != len(self.sentence_ids):
            raise ValidationError("one sentence id per matrix row required")
        if self.counts.nnz and self.counts.data.min() < 1:
            raise ValidationError("stored counts must be positive")
        if self.terms is None:
            self.terms = [f"w{i}" for i in range(self.counts.shape[1])]
        elif len(self.terms) != self.counts.shape[1]:
            raise ValidationError("one term per matrix column required")

    @property
    def n_sentences(self) -> int:
        return self.counts.shape[0]

    @property
    def n_terms(self) -> int:
        return self.counts.shape[1]

    @property
    def lengths(self) -> np.ndarray:
        """Token count ``B_r`` of every sentence."""
        return np.asarray(self.counts.sum(axis=1)).ravel()

    def get(self, term: int, sentence: int) -> int:
        return int(self.counts[sentence, term])

    def triplets(self) -> list[tuple[int, int, int]]:
        """``(term, sentence, count)`` for every stored entry, sentence-major."""
        coo = self.counts.tocoo()
        return [(int(w), int(r), int(c)) for r, w, c in zip(coo.row, coo.col, coo.data)]

    def nonzeros(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row indices, column indices and counts of the stored entries."""
        coo = self.counts.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.astype(np.float64)

    def document_frequency(self) -> np.ndarray:
        return np.diff(self.counts.tocsc().indptr)


@dataclass(frozen=True)
class SplitSpec:
    holdout_count: int
    seed: int = 0


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def _parse_date(value: str | None) -> dt.date | None:
    if not value:
        return None
    try:
        return dt.date.fromisoformat(value.strip()[:10])
    except ValueError:
        return None


def _parse_rating(value) -> float | None:
    if value is None or value == "":
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def _row_to_review(row: dict) -> Review | str:
    for name in REQUIRED_FIELDS:
        value = row.get(name)
        if value is None or not str(value).strip():
            return f"missing {name}"
    return Review(
        review_id=str(row["review_id"]).strip(),
        entity_id=str(row["entity_id"]).strip(),
        text=str(row["text"]),
        timestamp=_parse_date(row.get("date") or row.get("timestamp")),
        rating=_parse_rating(row.get("rating")),
    )


def ingest_reviews(path: str | Path, format: str | None = None) -> ReviewSet:
    """Load reviews from a CSV or JSONL file.

    Rows lacking ``review_id``, ``entity_id`` or non-blank ``text`` are
    skipped and recorded with their line number. A duplicated
    ``review_id`` is fatal.
    """
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv"
    if format not in ("csv", "jsonl"):
        raise ValidationError(f"unsupported review format: {format!r}")

    reviews: list[Review] = []
    skipped: list[SkippedRow] = []
    with open(path, encoding="utf-8", newline="") as fh:
        if format == "csv":
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ValidationError(f"{path}: empty CSV file")
            missing = [f for f in REQUIRED_FIELDS if f not in reader.fieldnames]
            if missing:
                raise ValidationError(f"{path}: missing columns {missing}")
            rows = ((reader.line_num, row) for row in reader)
        else:
            rows = _jsonl_rows(fh, path)
        for line, row in rows:
            result = _row_to_review(row)
            if isinstance(result, str):
                skipped.append(SkippedRow(line, result))
            else:
                reviews.append(result)

    seen: set[str] = set()
    for review in reviews:
        if review.review_id in seen:
            raise ValidationError(f"{path}: duplicate review_id {review.review_id!r}")
        seen.add(review.review_id)
    if skipped:
        logger.warning("%s: skipped %d rows (lines %s)", path, len(skipped),
                       ", ".join(str(s.line) for s in skipped[:20]))
    return ReviewSet(reviews, skipped)


def _jsonl_rows(fh, path):
    for line_no, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ValidationError(f"{path}:{line_no}: expected a JSON object")
        yield line_no, obj


# ---------------------------------------------------------------------------
# Sentence splitting and normalization
# ---------------------------------------------------------------------------

_TERMINATOR_RUN = re.compile(r"[.!?]+[\"'”’)\]]*")
_LEADING_JUNK = re.compile(r"^[\s.!?,;:…\"'“‘]+")
_HAS_WORD = re.compile(r"[^\W_]")


def split_sentences(text: str, abbreviations: frozenset[str] | None = None) -> list[str]:
    """Split review text at ``.``, ``!`` and ``?``.

    A terminator only ends a sentence when followed by whitespace or the
    end of the text, so decimals such as ``2.5`` survive. A lone period
    closing a listed abbreviation (``p.m.``) does not split.
    """
    if abbreviations is None:
        abbreviations = DEFAULT_ABBREVIATIONS
    pieces: list[str] = []
    start = 0
    for m in _TERMINATOR_RUN.finditer(text):
        end = m.end()
        if end < len(text) and not text[end].isspace():
            continue
        if m.group().rstrip("\"'”’)]") == ".":
            word_start = max(text.rfind(" ", 0, m.start()), text.rfind("\n", 0, m.start())) + 1
            word = text[word_start:m.start() + 1].lower().lstrip("(\"'“‘")
            if word in abbreviations:
                continue
        pieces.append(text[start:end])
        start = end
    pieces.append(text[start:])

    sentences = []
    for piece in pieces:
        piece = _LEADING_JUNK.sub("", piece).strip()
        if piece and _HAS_WORD.search(piece):
            sentences.append(piece)
    return sentences


_REPEATED_PUNCT = re.compile(r"([^\w\s])\1+")
_WHITESPACE = re.compile(r"\s+")


def _collapse(text: str) -> str:
    text = _REPEATED_PUNCT.sub(r"\1", text)
    return _WHITESPACE.sub(" ", text).strip()


class StandardizationMap:
    """Whole-word ``variant -> canonical`` substitutions.

    Used both for standardizing equivalent spellings (``wi-fi`` -> ``wifi``)
    and for explicit spelling corrections. Chains are resolved up front so
    that applying the map twice changes nothing.
    """

    def __init__(self, mapping: dict[str, str] | None = None):
        cleaned = {_collapse(k.lower()): _collapse(v.lower()) for k, v in (mapping or {}).items()}
        cleaned = {k: v for k, v in cleaned.items() if k and k != v}
        resolved = {}
        for variant in cleaned:
            target, seen = cleaned[variant], {variant}
            while target in cleaned:
                if target in seen:
                    raise ValidationError(f"standardization map has a cycle through {variant!r}")
                seen.add(target)
                target = cleaned[target]
            resolved[variant] = target
        self.mapping = resolved
        self._pattern = None
        if resolved:
            alternatives = "|".join(re.escape(k) for k in sorted(resolved, key=lambda s: (-len(s), s)))
            self._pattern = re.compile(rf"(?<![\w-])(?:{alternatives})(?![\w-])")

    @classmethod
    def from_tsv(cls, path: str | Path) -> "StandardizationMap":
        mapping = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2:
                    raise ValidationError(f"{path}:{line_no}: expected variant<TAB>canonical")
                mapping[parts[0]] = parts[1]
        return cls(mapping)

    def __bool__(self) -> bool:
        return bool(self.mapping)

    def apply(self, text: str) -> str:
        if self._pattern is None:
            return text
        return self._pattern.sub(lambda m: self.mapping[m.group()], text)


def normalize(sentence: str, standardization: StandardizationMap | dict | None = None) -> str:
    """Lowercase, collapse repeated punctuation and whitespace, standardize terms."""
    if isinstance(standardization, dict):
        standardization = StandardizationMap(standardization)
    text = _collapse(sentence.lower())
    if standardization:
        text = _collapse(standardization.apply(text))
    return text


# ---------------------------------------------------------------------------
# Tokenization and stemming
# ---------------------------------------------------------------------------

_WORD = re.compile(r"[^\W_]+(?:['’][^\W_]+)*")


@functools.lru_cache(maxsize=None)
def get_stemmer(name: str):
    """Return a cached ``str -> str`` stemming function."""
    if name not in STEMMERS:
        raise ValidationError(f"unknown stemmer {name!r}; choose from {STEMMERS}")
    if name == "none":
        return lambda word: word
    import snowballstemmer

    algorithm = "english" if name == "snowball" else "porter"
    stemmer = snowballstemmer.stemmer(algorithm)
    return functools.lru_cache(maxsize=200_000)(stemmer.stemWord)


def tokenize(sentence: str, stopwords: frozenset[str] | None = None,
             stemmer: str = "snowball") -> list[str]:
    """Split into word tokens, drop stopwords and short tokens, stem the rest.

    Duplicates are kept; their multiplicity becomes ``c(w, r)``.
    """
    if stopwords is None:
        stopwords = DEFAULT_STOPWORDS
    stem = get_stemmer(stemmer)
    terms = []
    for word in _WORD.findall(sentence.lower()):
        word = word.replace("’", "'")
        if len(word) < MIN_TOKEN_LENGTH or word in stopwords:
            continue
        term = stem(word).lower()
        if len(term) < MIN_TOKEN_LENGTH or term in stopwords:
            continue
        terms.append(term)
    return terms


@dataclass
class PreprocessOptions:
    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
    standardization: StandardizationMap | None = None
    stemmer: str = "snowball"
    dedupe: bool = True


@dataclass
class PreprocessResult:
    sentences: list[ReviewSentence]
    duplicates_removed: int = 0


def preprocess_reviews(reviews: Iterable[Review],
                       options: PreprocessOptions | None = None) -> PreprocessResult:
    """Turn reviews into token-bearing sentences.

    With ``dedupe`` on, a sentence whose normalized text already occurred
    for the same entity is dropped and counted.
    """
    options = options or PreprocessOptions()
    sentences: list[ReviewSentence] = []
    seen: set[tuple[str, str]] = set()
    duplicates = 0
    for review in reviews:
        for position, raw in enumerate(split_sentences(review.text, options.abbreviations)):
            norm = normalize(raw, options.standardization)
            if options.dedupe:
                key = (review.entity_id, norm)
                if key in seen:
                    duplicates += 1
                    continue
                seen.add(key)
            sentences.append(ReviewSentence(
                sentence_id=f"{review.review_id}:{position}",
                review_id=review.review_id,
                entity_id=review.entity_id,
                position=position,
                raw_text=raw,
                tokens=tuple(tokenize(norm, options.stopwords, options.stemmer)),
            ))
    return PreprocessResult(sentences, duplicates)


# ---------------------------------------------------------------------------
# Vocabulary, count matrix, split
# ---------------------------------------------------------------------------


def _tokens_of(sentence) -> Sequence[str]:
    return sentence.tokens if isinstance(sentence, ReviewSentence) else sentence


def _id_of(sentence, fallback: int) -> str:
    return sentence.sentence_id if isinstance(sentence, ReviewSentence) else str(fallback)


def build_vocabulary(sentences: Sequence[ReviewSentence | Sequence[str]],
                     min_sentence_frequency: int = 3) -> tuple[Vocabulary, CorpusMatrix]:
    """Build the term index and the count matrix over ``sentences``.

    Terms present in fewer than ``min_sentence_frequency`` sentences are
    dropped. Term order is first appearance in sentence order. Sentences
    left without any retained token get no matrix row.
    """
    if min_sentence_frequency < 1:
        raise ValidationError("min_sentence_frequency must be >= 1")

    order: dict[str, int] = {}
    freq: dict[str, int] = {}
    for sentence in sentences:
        for term in dict.fromkeys(_tokens_of(sentence)):
            if term not in order:
                order[term] = len(order)
            freq[term] = freq.get(term, 0) + 1
    terms = [t for t in order if freq[t] >= min_sentence_frequency]
    vocab = Vocabulary(terms, np.array([freq[t] for t in terms], dtype=np.int64))

    rows, cols, ids = [], [], []
    for i, sentence in enumerate(sentences):
        encoded = vocab.encode(_tokens_of(sentence))
        if not encoded:
            continue
        row = len(ids)
        ids.append(_id_of(sentence, i))
        rows.extend([row] * len(encoded))
        cols.extend(encoded)
    if not ids:
        raise EmptyCorpusError("empty corpus: no sentence retains any vocabulary term")
    counts = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(len(ids), len(terms))
    )
    return vocab, CorpusMatrix(counts, ids, list(terms))


def partition(sentences: Sequence, spec: SplitSpec) -> tuple[list, list]:
    """Seeded uniform split into (learning, holdout), both in input order."""
    n = len(sentences)
    if not 0 <= spec.holdout_count <= n:
        raise ValidationError(f"holdout_count {spec.holdout_count} outside [0, {n}]")
    rng = np.random.default_rng(spec.seed)
    chosen = np.zeros(n, dtype=bool)
    chosen[rng.choice(n, size=spec.holdout_count, replace=False)] = True
    learning = [s for s, c in zip(sentences, chosen) if not c]
    holdout = [s for s, c in zip(sentences, chosen) if c]
    return learning, holdout


def matrix_for(sentences: Sequence[ReviewSentence], vocab: Vocabulary) -> CorpusMatrix:
    """Count matrix of ``sentences`` over an existing vocabulary (OOV dropped)."""
    rows, cols, ids = [], [], []
    for sentence in sentences:
        encoded = vocab.encode(sentence.tokens)
        if not encoded:
            continue
        row = len(ids)
        ids.append(sentence.sentence_id)
        rows.extend([row] * len(encoded))
        cols.extend(encoded)
    counts = sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)),
                           shape=(len(ids), len(vocab)))
    return CorpusMatrix(counts, ids, list(vocab.terms))


# ---------------------------------------------------------------------------
# Serialized corpus
# ---------------------------------------------------------------------------


@dataclass
class Corpus:
    """Everything downstream stages need from preprocessing."""

    sentences: list[ReviewSentence]
    holdout_ids: list[str]
    vocabulary: Vocabulary
    matrix: CorpusMatrix
    skipped_rows: list[SkippedRow] = field(default_factory=list)
    duplicates_removed: int = 0

    @property
    def holdout(self) -> list[ReviewSentence]:
        ids = set(self.holdout_ids)
        return [s for s in self.sentences if s.sentence_id in ids]

    @property
    def learning(self) -> list[ReviewSentence]:
        ids = set(self.holdout_ids)
        return [s for s in self.sentences if s.sentence_id not in ids]

    def by_id(self) -> dict[str, ReviewSentence]:
        return {s.sentence_id: s for s in self.sentences}


def build_corpus(reviews: ReviewSet | Iterable[Review], *, holdout_count: int, seed: int,
                 min_sentence_frequency: int = 3,
                 options: PreprocessOptions | None = None) -> Corpus:
    """Preprocess, split, and index a review set; the vocabulary comes from the learning split."""
    pre = preprocess_reviews(reviews, options)
    learning, holdout = partition(pre.sentences, SplitSpec(holdout_count, seed))
    vocab, matrix = build_vocabulary(learning, min_sentence_frequency)
    return Corpus(
        sentences=pre.sentences,
        holdout_ids=[s.sentence_id for s in holdout],
        vocabulary=vocab,
        matrix=matrix,
        skipped_rows=list(getattr(reviews, "skipped", [])),
        duplicates_removed=pre.duplicates_removed,
    )


def corpus_to_dict(corpus: Corpus) -> dict:
    return {
        "format_version": CORPUS_FORMAT_VERSION,
        "vocabulary": corpus.vocabulary.terms,
        "sentence_frequency": corpus.vocabulary.sentence_frequency.tolist(),
        "sentences": [
            {
                "sentence_id": s.sentence_id,
                "review_id": s.review_id,
                "entity_id": s.entity_id,
                "position": s.position,
                "raw_text": s.raw_text,
                "tokens": list(s.tokens),
            }
            for s in corpus.sentences
        ],
        "holdout_ids": corpus.holdout_ids,
        "matrix": {
            "sentence_ids": corpus.matrix.sentence_ids,
            "shape": list(corpus.matrix.counts.shape),
            "triplets": [list(t) for t in corpus.matrix.triplets()],
        },
        "diagnostics": {
            "skipped_rows": [{"line": s.line, "reason": s.reason} for s in corpus.skipped_rows],
            "duplicates_removed": corpus.duplicates_removed,
        },
    }


def corpus_from_dict(data: dict) -> Corpus:
    version = data.get("format_version")
    if version != CORPUS_FORMAT_VERSION:
        raise ValidationError(f"unsupported corpus format_version {version!r}")
    vocab = Vocabulary(list(data["vocabulary"]), np.asarray(data["sentence_frequency"], dtype=np.int64))
    m = data["matrix"]
    trip = np.asarray(m["triplets"], dtype=np.int64).reshape(-1, 3)
    counts = sp.csr_matrix((trip[:, 2], (trip[:, 1], trip[:, 0])), shape=tuple(m["shape"]))
    sentences = [
        ReviewSentence(s["sentence_id"], s["review_id"], s["entity_id"], s["position"],
                       s["raw_text"], tuple(s["tokens"]))
        for s in data["sentences"]
    ]
    diag = data.get("diagnostics", {})
    return Corpus(
        sentences=sentences,
        holdout_ids=list(data["holdout_ids"]),
        vocabulary=vocab,
        matrix=CorpusMatrix(counts, list(m["sentence_ids"]), list(vocab.terms)),
        skipped_rows=[SkippedRow(d["line"], d["reason"]) for d in diag.get("skipped_rows", [])],
        duplicates_removed=diag.get("duplicates_removed", 0),
    )


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(json.dumps(corpus_to_dict(corpus), ensure_ascii=False) + "\n", "utf-8")


def load_corpus(path: str | Path) -> Corpus:
    return corpus_from_dict(json.loads(Path(path).read_text("utf-8")))
