"""Aspect catalog, custom word lists and sentence-to-aspect classification.

Raw topics from several fitted models are grouped under human-named
aspects through a merge map. A sentence is classified either by one model
(its most probable aspect, if confident enough) or by the ensemble, which
tries in turn: a plurality vote of the members, the single most confident
member, keyword matching against per-aspect word lists, and finally Null.

Aspect labels are ``int`` aspect ids, with ``None`` standing for Null. A
merge map may also label a raw topic ``Null`` (objective or off-topic
content); that topic's probability then counts as a vote for Null.
"""

from __future__ import annotations

import csv
import json
import logging
import zlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from reviewintel.corpus import ReviewSentence, get_stemmer
from reviewintel.errors import ValidationError
from reviewintel.topic_models import FittedTopicModel, infer_theta

logger = logging.getLogger(__name__)

NULL_LABEL = "Null"
DEFAULT_GAMMA = 0.7
DEFAULT_PREVALENCE_FLOOR = 0.0005
DEFAULT_N_KEYWORDS = 10
RELATION_TYPES = ("syn", "ant", "hypo", "hyper")
BRANCHES = ("mode", "threshold", "wordlist", "null")

AspectLabel = int | None


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CatalogAspect:
    aspect_id: int
    label: str
    keywords: dict[str, tuple[str, ...]]  # model id -> top words of its merged topics


@dataclass
class AspectCatalog:
    """Human-named aspects and the raw topics folded into each."""

    aspects: list[CatalogAspect]
    merge_map: dict[tuple[str, int], int]
    discarded: list[tuple[str, int]] = field(default_factory=list)
    null_topics: list[tuple[str, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.aspects)

    @property
    def labels(self) -> list[str]:
        return [a.label for a in self.aspects]

    def label_of(self, aspect: AspectLabel) -> str:
        return NULL_LABEL if aspect is None else self.aspects[aspect].label

    def id_of(self, label: str) -> AspectLabel:
        if label == NULL_LABEL:
            return None
        for a in self.aspects:
            if a.label == label:
                return a.aspect_id
        raise ValidationError(f"unknown aspect label {label!r}")

    def project(self, model_id: str, raw: np.ndarray) -> np.ndarray:
        """Sum raw-topic probabilities within each aspect; discarded topics drop out."""
        out = np.zeros(len(self.aspects))
        for topic, p in enumerate(raw):
            aspect = self.merge_map.get((model_id, topic))
            if aspect is not None:
                out[aspect] += p
        return out

    def null_mass(self, model_id: str, raw: np.ndarray) -> float:
        return float(sum(raw[t] for m, t in self.null_topics if m == model_id))

    def to_dict(self) -> dict:
        return {
            "aspects": [
                {"aspect_id": a.aspect_id, "label": a.label,
                 "keywords": {m: list(w) for m, w in sorted(a.keywords.items())}}
                for a in self.aspects
            ],
            "merge_map": [[m, t, a] for (m, t), a in sorted(self.merge_map.items())],
            "discarded": [[m, t] for m, t in sorted(self.discarded)],
            "null_topics": [[m, t] for m, t in sorted(self.null_topics)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AspectCatalog":
        aspects = [CatalogAspect(a["aspect_id"], a["label"],
                                 {m: tuple(w) for m, w in a["keywords"].items()})
                   for a in data["aspects"]]
        merge = {(m, int(t)): int(a) for m, t, a in data["merge_map"]}
        return cls(aspects, merge, [(m, int(t)) for m, t in data["discarded"]],
                   [(m, int(t)) for m, t in data.get("null_topics", [])])


def read_merge_map(path: str | Path) -> dict[tuple[str, int], str]:
    """Read ``model_id<TAB>raw_topic<TAB>aspect_label`` rows."""
    mapping: dict[tuple[str, int], str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 tab-separated fields")
            model_id, topic, label = (p.strip() for p in parts)
            try:
                key = (model_id, int(topic))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: raw topic must be an integer") from None
            if key in mapping:
                raise ValidationError(f"{path}:{lineno}: topic {key} mapped twice")
            if not label:
                raise ValidationError(f"{path}:{lineno}: invalid aspect label {label!r}")
            mapping[key] = label
    return mapping


def write_merge_map(mapping: Mapping[tuple[str, int], str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for (model_id, topic), label in sorted(mapping.items()):
            fh.write(f"{model_id}\t{topic}\t{label}\n")


def identity_merge_map(models: Mapping[str, FittedTopicModel]) -> dict[tuple[str, int], str]:
    """Raw topic ``i`` of every model becomes aspect ``topic_i``."""
    return {(m, t): f"topic_{t}" for m, model in models.items() for t in range(model.k)}


def draft_merge_map(models: Mapping[str, FittedTopicModel],
                    seed_keywords: Mapping[str, Sequence[str]],
                    stemmer: str = "snowball", null_floor: float = 0.05) -> dict[tuple[str, int], str]:
    """Propose labels by matching each raw topic to the seed keywords it weights most.

    A topic giving less than ``null_floor`` of its mass to every label's
    keywords is proposed as Null. A starting point for the human labeller,
    not a substitute.
    """
    stem = get_stemmer(stemmer)
    labels = list(seed_keywords)
    draft = {}
    for model_id, model in models.items():
        index = {t: i for i, t in enumerate(model.terms)}
        columns = [[index[s] for s in {stem(w.lower()) for w in seed_keywords[lab]} if s in index]
                   for lab in labels]
        for topic in range(model.k):
            mass = [float(model.phi[topic, cols].sum()) for cols in columns]
            best = int(np.argmax(mass))
            draft[(model_id, topic)] = labels[best] if mass[best] >= null_floor else NULL_LABEL
    return draft


def build_catalog(models: Mapping[str, FittedTopicModel],
                  merge_map: Mapping[tuple[str, int], str] | None = None,
                  prevalence_floor: float = DEFAULT_PREVALENCE_FLOOR,
                  n_keywords: int = DEFAULT_N_KEYWORDS) -> AspectCatalog:
    """Drop rare raw topics and group the rest under labelled aspects.

    Aspect ids follow the order in which labels first appear when walking
    models in the given order and their topics in index order.
    """
    if not models:
        raise ValidationError("at least one model is required")
    fingerprints = {m.vocabulary_fingerprint for m in models.values()}
    if len(fingerprints) > 1:
        raise ValidationError("models were fitted on different vocabularies")
    if merge_map is None:
        merge_map = identity_merge_map(models)

    for model_id, topic in merge_map:
        if model_id not in models or not 0 <= topic < models[model_id].k:
            raise ValidationError(f"merge map references unknown topic {topic} of model {model_id!r}")

    label_ids: dict[str, int] = {}
    merged: dict[tuple[str, int], int] = {}
    discarded: list[tuple[str, int]] = []
    null_topics: list[tuple[str, int]] = []
    members: dict[int, dict[str, list[int]]] = {}
    for model_id, model in models.items():
        prevalence = model.prevalence()
        for topic in range(model.k):
            if prevalence[topic] < prevalence_floor:
                discarded.append((model_id, topic))
                continue
            label = merge_map.get((model_id, topic))
            if label is None:
                raise ValidationError(f"topic {topic} of model {model_id!r} is retained but unmapped")
            if label == NULL_LABEL:
                null_topics.append((model_id, topic))
                continue
            aspect = label_ids.setdefault(label, len(label_ids))
            merged[(model_id, topic)] = aspect
            members.setdefault(aspect, {}).setdefault(model_id, []).append(topic)

    aspects = []
    for label, aspect in label_ids.items():
        keywords = {}
        for model_id, topics in members[aspect].items():
            model = models[model_id]
            weights = model.phi[topics].sum(axis=0)
            order = np.argsort(-weights, kind="stable")[:n_keywords]
            keywords[model_id] = tuple(model.terms[i] for i in order)
        aspects.append(CatalogAspect(aspect, label, keywords))
    if discarded:
        logger.info("discarded %d raw topics below prevalence %.4g", len(discarded), prevalence_floor)
    return AspectCatalog(aspects, merged, discarded, null_topics)


# ---------------------------------------------------------------------------
# Custom word lists
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CustomWordList:
    aspect_id: int
    words: frozenset[str]
    uncovered: tuple[str, ...] = ()  # keywords with no entry in the relations resource


def read_relations(path: str | Path) -> dict[str, set[str]]:
    """Read ``term<TAB>relation<TAB>related_term`` rows into term -> related terms."""
    relations: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = [p.strip().lower() for p in line.split("\t")]
            if len(parts) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 tab-separated fields")
            term, relation, related = parts
            if relation not in RELATION_TYPES:
                raise ValidationError(f"{path}:{lineno}: unknown relation {relation!r}")
            relations.setdefault(term, set()).add(related)
    return relations


def build_custom_wordlists(catalog: AspectCatalog, relations: Mapping[str, set[str]] | None = None,
                           n_keywords: int = DEFAULT_N_KEYWORDS,
                           stemmer: str = "snowball") -> list[CustomWordList]:
    """Expand each aspect's top keywords with related terms, all stemmed.

    Catalog keywords are already stems, so relation heads are stemmed
    before matching.
    """
    stem = get_stemmer(stemmer)

    def stem_phrase(text: str) -> list[str]:
        return [stem(w).lower() for w in text.lower().split()]

    expansions: dict[str, set[str]] = {}
    for head, related in (relations or {}).items():
        bucket = expansions.setdefault(" ".join(stem_phrase(head)), set())
        for term in related:
            bucket.update(stem_phrase(term))

    lists = []
    for aspect in catalog.aspects:
        keywords = []
        for model_id in sorted(aspect.keywords):
            keywords.extend(aspect.keywords[model_id][:n_keywords])
        words = set(keywords)
        uncovered = []
        for kw in dict.fromkeys(keywords):
            if kw in expansions:
                words |= expansions[kw]
            else:
                uncovered.append(kw)
        lists.append(CustomWordList(aspect.aspect_id, frozenset(words), tuple(uncovered)))
    return lists


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleTopicConfig:
    gamma: float = DEFAULT_GAMMA
    tie_seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValidationError(f"gamma must lie in (0, 1), got {self.gamma}")


@dataclass(frozen=True)
class Decision:
    aspect: AspectLabel
    branch: str


def top_aspect(probs: np.ndarray, null_mass: float = 0.0) -> AspectLabel:
    """Most probable aspect, or Null when Null-labelled topics outweigh it."""
    best = int(np.argmax(probs))
    return None if null_mass >= probs[best] and null_mass > 0 else best


def decide_single(probs: np.ndarray, gamma: float, oov: bool = False,
                  null_mass: float = 0.0) -> AspectLabel:
    """Most probable aspect if its probability strictly exceeds ``gamma``."""
    if oov or probs.size == 0:
        return None
    best = top_aspect(probs, null_mass)
    return best if best is not None and probs[best] > gamma else None


def unique_mode(votes: Sequence[AspectLabel]) -> tuple[bool, AspectLabel]:
    """``(True, winner)`` if one value has strictly more votes than any other."""
    if not votes:
        return False, None
    ranked = Counter(votes).most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return False, None
    return True, ranked[0][0]


def wordlist_scores(tokens: Sequence[str], wordlists: Sequence[CustomWordList]) -> np.ndarray:
    """Number of tokens (with repeats) found in each aspect's word list."""
    return np.array([sum(t in wl.words for t in tokens) for wl in wordlists], dtype=np.int64)


def tie_rng(tie_seed: int, key: str) -> np.random.Generator:
    return np.random.default_rng([tie_seed & 0xFFFFFFFF, zlib.crc32(key.encode("utf-8"))])


def decide_ensemble(member_probs: Sequence[np.ndarray], member_oov: Sequence[bool],
                    tokens: Sequence[str], wordlists: Sequence[CustomWordList],
                    gamma: float, rng: np.random.Generator | None = None,
                    null_masses: Sequence[float] | None = None) -> Decision:
    """The four-step ensemble rule on already-projected member probabilities.

    Members whose sentence had no in-vocabulary token take no part in the
    vote or the confidence step.
    """
    null_masses = null_masses or [0.0] * len(member_probs)
    live = [(p, nm) for p, oov, nm in zip(member_probs, member_oov, null_masses) if not oov and p.size]
    if live:
        found, winner = unique_mode([top_aspect(p, nm) for p, nm in live])
        if found:
            return Decision(winner, "mode")
        live = [p for p, _ in live]
        best_model = max(range(len(live)), key=lambda m: live[m].max())
        best = live[best_model]
        if best.max() > gamma:
            return Decision(int(np.argmax(best)), "threshold")
    if wordlists:
        scores = wordlist_scores(tokens, wordlists)
        top = scores.max()
        if top > 0:
            tied = np.flatnonzero(scores == top)
            if len(tied) > 1:
                rng = rng if rng is not None else np.random.default_rng(0)
                pick = int(tied[rng.integers(len(tied))])
            else:
                pick = int(tied[0])
            return Decision(wordlists[pick].aspect_id, "wordlist")
    return Decision(None, "null")


def _tokens(sentence: ReviewSentence | Sequence[str]) -> Sequence[str]:
    return sentence.tokens if isinstance(sentence, ReviewSentence) else sentence


def classify_single(model: FittedTopicModel, sentence: ReviewSentence | Sequence[str],
                    gamma: float = DEFAULT_GAMMA, catalog: AspectCatalog | None = None,
                    model_id: str | None = None) -> AspectLabel:
    """One model's verdict; without a catalog the raw topics are the aspects."""
    if not 0.0 < gamma < 1.0:
        raise ValidationError(f"gamma must lie in (0, 1), got {gamma}")
    theta, oov = infer_theta(model, _tokens(sentence))
    if catalog is None:
        return decide_single(theta, gamma, oov)
    model_id = model_id or model.algorithm
    return decide_single(catalog.project(model_id, theta), gamma, oov, catalog.null_mass(model_id, theta))


def classify_ensemble(models: Mapping[str, FittedTopicModel], sentence: ReviewSentence | Sequence[str],
                      wordlists: Sequence[CustomWordList], config: EnsembleTopicConfig,
                      catalog: AspectCatalog | None = None) -> Decision:
    if len(models) < 2:
        raise ValidationError("the ensemble needs at least two member models")
    config.validate()
    tokens = _tokens(sentence)
    probs, oovs, nulls = [], [], []
    for model_id, model in models.items():
        theta, oov = infer_theta(model, tokens)
        probs.append(catalog.project(model_id, theta) if catalog is not None else theta)
        nulls.append(catalog.null_mass(model_id, theta) if catalog is not None else 0.0)
        oovs.append(oov)
    key = sentence.sentence_id if isinstance(sentence, ReviewSentence) else " ".join(tokens)
    return decide_ensemble(probs, oovs, tokens, wordlists, config.gamma, tie_rng(config.tie_seed, key),
                           nulls)


@dataclass(frozen=True)
class LabeledSentence:
    sentence_id: str
    entity_id: str
    aspect: str
    method: str
    branch_taken: str

    def to_dict(self) -> dict:
        return {"sentence_id": self.sentence_id, "entity_id": self.entity_id,
                "aspect": self.aspect, "method": self.method, "branch_taken": self.branch_taken}


ENSEMBLE_METHOD = "ea_tm"


class AspectClassifier:
    """Classifies corpus sentences with each member model and with the ensemble.

    Sentences a model was trained on reuse that model's fitted topic
    mixture; anything else goes through held-out inference.
    """

    def __init__(self, models: Mapping[str, FittedTopicModel], catalog: AspectCatalog,
                 wordlists: Sequence[CustomWordList], config: EnsembleTopicConfig = EnsembleTopicConfig()):
        config.validate()
        self.models = dict(models)
        self.catalog = catalog
        self.wordlists = list(wordlists)
        self.config = config
        self._rows = {m: {sid: i for i, sid in enumerate(model.sentence_ids)}
                      for m, model in self.models.items()}

    @property
    def methods(self) -> list[str]:
        methods = list(self.models)
        if len(self.models) >= 2:
            methods.append(ENSEMBLE_METHOD)
        return methods

    def member_probabilities(self, sentence: ReviewSentence
                             ) -> tuple[list[np.ndarray], list[bool], list[float]]:
        probs, oovs, nulls = [], [], []
        for model_id, model in self.models.items():
            row = self._rows[model_id].get(sentence.sentence_id)
            if row is not None:
                theta, oov = model.theta[row], False
            else:
                theta, oov = infer_theta(model, sentence.tokens)
            probs.append(self.catalog.project(model_id, theta))
            nulls.append(self.catalog.null_mass(model_id, theta))
            oovs.append(oov)
        return probs, oovs, nulls

    def classify(self, sentence: ReviewSentence) -> dict[str, Decision]:
        """Decision of every member and of the ensemble for one sentence."""
        probs, oovs, nulls = self.member_probabilities(sentence)
        out = {}
        for model_id, p, oov, nm in zip(self.models, probs, oovs, nulls):
            aspect = decide_single(p, self.config.gamma, oov, nm)
            out[model_id] = Decision(aspect, "null" if aspect is None else "threshold")
        if len(self.models) >= 2:
            out[ENSEMBLE_METHOD] = decide_ensemble(
                probs, oovs, sentence.tokens, self.wordlists, self.config.gamma,
                tie_rng(self.config.tie_seed, sentence.sentence_id), nulls)
        return out

    def label_all(self, sentences: Sequence[ReviewSentence]) -> list[LabeledSentence]:
        rows = []
        for s in sentences:
            for method, d in self.classify(s).items():
                rows.append(LabeledSentence(s.sentence_id, s.entity_id,
                                            self.catalog.label_of(d.aspect), method, d.branch))
        return rows


def write_labels(rows: Sequence[LabeledSentence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_labels(path: str | Path) -> list[LabeledSentence]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                rows.append(LabeledSentence(d["sentence_id"], d["entity_id"], d["aspect"],
                                            d["method"], d["branch_taken"]))
    return rows


def write_wordlists(lists: Sequence[CustomWordList], catalog: AspectCatalog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["aspect", "words", "uncovered_keywords"])
        for wl in lists:
            writer.writerow([catalog.label_of(wl.aspect_id), " ".join(sorted(wl.words)),
                             " ".join(wl.uncovered)])
