"""Lexicon-based sentence sentiment and the three-analyzer ensemble.

Three analyzer styles share the same lexicon file format:

* ``sum``: the plain sum of word valences (integer lexicons, -5..+5).
* ``scaled``: strongest positive plus strongest negative valence, rescaled
  to [-1, 1], with a boost for emphatic punctuation.
* ``rule``: valences adjusted for negation, intensifiers, capitals and
  exclamation marks, then squashed into (-1, 1).

Scores become categories through per-analyzer thresholds. The ensemble
takes the plurality category and otherwise defers to the analyzer whose
calibrated score is furthest from zero.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from reviewintel.errors import ValidationError

logger = logging.getLogger(__name__)


class Sentiment(enum.IntEnum):
    NEGATIVE = -1
    NEUTRAL = 0
    POSITIVE = 1

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "Sentiment":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown sentiment {text!r}") from None


# ---------------------------------------------------------------------------
# Resources
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SentimentLexicon:
    entries: Mapping[str, float]
    scale: tuple[float, float] = (-5.0, 5.0)

    def __post_init__(self):
        lo, hi = self.scale
        if not lo < 0 < hi:
            raise ValidationError(f"lexicon scale must straddle zero, got {self.scale}")
        for term, v in self.entries.items():
            if term != term.lower():
                raise ValidationError(f"lexicon term {term!r} is not lowercase")
            if not lo <= v <= hi:
                raise ValidationError(f"valence {v} of {term!r} outside scale {self.scale}")

    def get(self, word: str) -> float | None:
        return self.entries.get(word.lower())


def read_lexicon(path: str | Path, scale: tuple[float, float] = (-5.0, 5.0)) -> SentimentLexicon:
    """Read ``term<TAB>valence`` rows."""
    entries: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValidationError(f"{path}:{lineno}: expected term<TAB>valence")
            try:
                entries[parts[0].strip().lower()] = float(parts[1])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: valence is not a number") from None
    return SentimentLexicon(entries, scale)


@dataclass(frozen=True)
class RuleConstants:
    negation: float = -0.74
    booster: float = 0.293
    caps: float = 0.733
    exclamation: float = 0.292
    max_exclamations: int = 3
    alpha: float = 15.0
    window: int = 3
    decay: tuple[float, ...] = (1.0, 0.95, 0.9)


@dataclass(frozen=True)
class Modifiers:
    """Negators (word -> multiplier) and intensifiers (word -> signed increment)."""

    negators: Mapping[str, float] = field(default_factory=dict)
    intensifiers: Mapping[str, float] = field(default_factory=dict)

    def negation(self, word: str, default: float) -> float | None:
        w = word.lower()
        if w in self.negators:
            return self.negators[w]
        if w.endswith("n't"):
            return default
        return None


def read_modifiers(path: str | Path) -> Modifiers:
    """Read ``term<TAB>{negate|boost|dampen}<TAB>multiplier`` rows.

    For ``boost`` and ``dampen`` the multiplier is the size of the shift;
    dampeners shift towards zero.
    """
    negators, intensifiers = {}, {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split("\t")]
            if len(parts) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 tab-separated fields")
            term, kind, value = parts
            try:
                x = float(value)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: multiplier is not a number") from None
            term = term.lower()
            if kind == "negate":
                negators[term] = x
            elif kind == "boost":
                intensifiers[term] = abs(x)
            elif kind == "dampen":
                intensifiers[term] = -abs(x)
            else:
                raise ValidationError(f"{path}:{lineno}: unknown modifier kind {kind!r}")
    return Modifiers(negators, intensifiers)


# ---------------------------------------------------------------------------
# Analyzers
# ---------------------------------------------------------------------------

_WORD = re.compile(r"[A-Za-z]+(?:['’][A-Za-z]+)*")


def words(text: str) -> list[str]:
    """Case-preserving word tokens; apostrophes are normalized."""
    return [w.replace("’", "'") for w in _WORD.findall(text)]


@dataclass(frozen=True)
class SentimentScore:
    analyzer_id: str
    value: float
    lower: float
    upper: float


@dataclass(frozen=True)
class SentimentThresholds:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValidationError(f"threshold lower {self.lower} exceeds upper {self.upper}")


def to_category(value: float, thresholds: SentimentThresholds) -> Sentiment:
    """Positive above the upper threshold, Negative below the lower, Neutral between (inclusive)."""
    if value > thresholds.upper:
        return Sentiment.POSITIVE
    if value < thresholds.lower:
        return Sentiment.NEGATIVE
    return Sentiment.NEUTRAL


def score_sum(text: str, lexicon: SentimentLexicon) -> SentimentScore:
    toks = words(text)
    total = 0.0
    for w in toks:
        v = lexicon.get(w)
        if v is not None:
            total += v
    bound = max(abs(lexicon.scale[0]), abs(lexicon.scale[1])) * len(toks)
    return SentimentScore("sum", total, -bound, bound)


EMPHATIC_BOOST = 1.292
_EMPHATIC = re.compile(r"!{2,}")


def score_scaled(text: str, lexicon: SentimentLexicon, boost: float = EMPHATIC_BOOST) -> SentimentScore:
    pos, neg = 0.0, 0.0
    for w in words(text):
        v = lexicon.get(w)
        if v is not None:
            pos = max(pos, v)
            neg = min(neg, v)
    value = (pos + neg) / max(abs(lexicon.scale[0]), abs(lexicon.scale[1]))
    if _EMPHATIC.search(text):
        value *= boost
    return SentimentScore("scaled", min(1.0, max(-1.0, value)), -1.0, 1.0)


def _is_shouted(word: str) -> bool:
    return word.isupper() and len(word) > 1


def rule_valence(toks: Sequence[str], i: int, v: float, modifiers: Modifiers,
                 rules: RuleConstants, caps_differential: bool) -> float:
    """Valence of ``toks[i]`` after emphasis, intensifier and negation rules."""
    sign = 1.0 if v > 0 else -1.0
    if caps_differential and _is_shouted(toks[i]):
        v += sign * rules.caps
    negation = None
    for j in range(1, rules.window + 1):
        if i - j < 0:
            break
        prev = toks[i - j]
        shift = modifiers.intensifiers.get(prev.lower())
        if shift is not None:
            scalar = sign * shift
            if caps_differential and _is_shouted(prev):
                scalar += sign * rules.caps
            v += scalar * rules.decay[j - 1]
        if negation is None:
            negation = modifiers.negation(prev, rules.negation)
    if negation is not None:
        v *= negation
    return v


def score_rule_augmented(text: str, lexicon: SentimentLexicon, modifiers: Modifiers = Modifiers(),
                         rules: RuleConstants = RuleConstants()) -> SentimentScore:
    toks = words(text)
    shouted = sum(_is_shouted(w) for w in toks)
    caps_differential = 0 < shouted < len(toks)
    total = 0.0
    for i, w in enumerate(toks):
        v = lexicon.get(w)
        if v is None or v == 0 or w.lower() in modifiers.intensifiers:
            continue
        total += rule_valence(toks, i, v, modifiers, rules, caps_differential)
    if total:
        amp = min(text.count("!"), rules.max_exclamations) * rules.exclamation
        total += amp if total > 0 else -amp
    value = total / math.sqrt(total * total + rules.alpha) if total else 0.0
    return SentimentScore("rule", value, -1.0, 1.0)


class Analyzer(Protocol):
    analyzer_id: str
    thresholds: SentimentThresholds

    def score(self, text: str) -> SentimentScore: ...


@dataclass
class SumAnalyzer:
    lexicon: SentimentLexicon
    thresholds: SentimentThresholds = SentimentThresholds(-1.0, 1.0)
    analyzer_id: str = "sum"

    def score(self, text: str) -> SentimentScore:
        return score_sum(text, self.lexicon)


@dataclass
class ScaledAnalyzer:
    lexicon: SentimentLexicon
    thresholds: SentimentThresholds = SentimentThresholds(-0.05, 0.05)
    boost: float = EMPHATIC_BOOST
    analyzer_id: str = "scaled"

    def score(self, text: str) -> SentimentScore:
        return score_scaled(text, self.lexicon, self.boost)


@dataclass
class RuleAugmentedAnalyzer:
    lexicon: SentimentLexicon
    modifiers: Modifiers = field(default_factory=Modifiers)
    rules: RuleConstants = field(default_factory=RuleConstants)
    thresholds: SentimentThresholds = SentimentThresholds(-0.05, 0.05)
    analyzer_id: str = "rule"

    def score(self, text: str) -> SentimentScore:
        return score_rule_augmented(text, self.lexicon, self.modifiers, self.rules)


# ---------------------------------------------------------------------------
# Calibration and the ensemble
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyzerCalibration:
    minimum: Mapping[str, float]
    maximum: Mapping[str, float]

    def degenerate(self, analyzer_id: str) -> bool:
        return self.maximum[analyzer_id] <= self.minimum[analyzer_id]

    def normalize(self, analyzer_id: str, value: float) -> float:
        """Map the observed range onto [-1, 1]; a flat analyzer maps to 0."""
        lo, hi = self.minimum[analyzer_id], self.maximum[analyzer_id]
        if hi <= lo:
            return 0.0
        return 2.0 * (value - lo) / (hi - lo) - 1.0

    def to_dict(self) -> dict:
        return {"minimum": dict(self.minimum), "maximum": dict(self.maximum)}


def calibration_from_scores(scores: Mapping[str, Iterable[float]]) -> AnalyzerCalibration:
    lo, hi = {}, {}
    for analyzer_id, values in scores.items():
        values = list(values)
        if not values:
            raise ValidationError("calibration corpus is empty")
        lo[analyzer_id], hi[analyzer_id] = min(values), max(values)
        if hi[analyzer_id] == lo[analyzer_id]:
            logger.warning("analyzer %s gave %g on every sentence; its normalized score is 0",
                           analyzer_id, lo[analyzer_id])
    return AnalyzerCalibration(lo, hi)


def calibrate(analyzers: Sequence[Analyzer], texts: Iterable[str]) -> AnalyzerCalibration:
    texts = list(texts)
    if not texts:
        raise ValidationError("calibration corpus is empty")
    return calibration_from_scores({a.analyzer_id: [a.score(t).value for t in texts] for a in analyzers})


@dataclass(frozen=True)
class SentimentVerdict:
    scores: dict[str, float]
    categories: dict[str, Sentiment]
    category: Sentiment
    decision_path: str  # "mode" or "tiebreak"


def decide_sentiment(scores: Mapping[str, float], categories: Mapping[str, Sentiment],
                     calibration: AnalyzerCalibration) -> SentimentVerdict:
    """Plurality category, else the category of the most extreme calibrated score."""
    ranked = Counter(categories.values()).most_common()
    if len(ranked) == 1 or ranked[0][1] > ranked[1][1]:
        return SentimentVerdict(dict(scores), dict(categories), ranked[0][0], "mode")
    strength = {a: abs(calibration.normalize(a, v)) for a, v in scores.items()}
    chosen = max(scores, key=lambda a: strength[a])  # first analyzer wins exact ties
    return SentimentVerdict(dict(scores), dict(categories), categories[chosen], "tiebreak")


def classify_sentiment_ensemble(text: str, analyzers: Sequence[Analyzer],
                                calibration: AnalyzerCalibration,
                                thresholds: Mapping[str, SentimentThresholds] | None = None
                                ) -> SentimentVerdict:
    thresholds = thresholds or {}
    scores, categories = {}, {}
    for a in analyzers:
        v = a.score(text).value
        scores[a.analyzer_id] = v
        categories[a.analyzer_id] = to_category(v, thresholds.get(a.analyzer_id, a.thresholds))
    return decide_sentiment(scores, categories, calibration)


def verdict_record(sentence_id: str, verdict: SentimentVerdict) -> dict:
    return {
        "sentence_id": sentence_id,
        "v": verdict.scores,
        "o": {a: c.label for a, c in verdict.categories.items()},
        "O": verdict.category.label,
        "decision_path": verdict.decision_path,
    }


def write_verdicts(rows: Sequence[tuple[str, SentimentVerdict]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sid, verdict in rows:
            fh.write(json.dumps(verdict_record(sid, verdict), sort_keys=True) + "\n")


def read_verdicts(path: str | Path) -> dict[str, Sentiment]:
    """Sentence id -> ensemble category."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out[d["sentence_id"]] = Sentiment.parse(d["O"])
    return out
