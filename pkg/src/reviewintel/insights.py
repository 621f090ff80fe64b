"""Opinion summaries per entity, strengths and weaknesses, competitor grids and bigrams."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from reviewintel.aspects import NULL_LABEL
from reviewintel.errors import ValidationError
from reviewintel.sentiment import Sentiment

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.10
DEFAULT_BIGRAM_THRESHOLD = 0.15
VERDICTS = ("strength", "weakness", "mixed")


@dataclass(frozen=True)
class AspectCounts:
    positive: int = 0
    neutral: int = 0
    negative: int = 0

    @property
    def total(self) -> int:
        return self.positive + self.neutral + self.negative

    def proportions(self) -> tuple[float, float, float]:
        n = self.total
        if n == 0:
            return (0.0, 0.0, 0.0)
        return (self.positive / n, self.neutral / n, self.negative / n)

    def add(self, sentiment: Sentiment) -> "AspectCounts":
        return AspectCounts(self.positive + (sentiment == Sentiment.POSITIVE),
                            self.neutral + (sentiment == Sentiment.NEUTRAL),
                            self.negative + (sentiment == Sentiment.NEGATIVE))


@dataclass(frozen=True)
class OpinionSummary:
    entity_id: str
    aspects: dict[str, AspectCounts]
    excluded_null: int = 0

    @property
    def total_classified(self) -> int:
        return sum(c.total for c in self.aspects.values())

    @property
    def total(self) -> int:
        return self.total_classified + self.excluded_null

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "total_sentences": self.total,
            "classified_sentences": self.total_classified,
            "excluded_null": self.excluded_null,
            "aspects": {
                a: {"positive": c.positive, "neutral": c.neutral, "negative": c.negative,
                    "proportions": dict(zip(("positive", "neutral", "negative"), c.proportions()))}
                for a, c in self.aspects.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OpinionSummary":
        aspects = {a: AspectCounts(v["positive"], v["neutral"], v["negative"])
                   for a, v in data["aspects"].items()}
        return cls(data["entity_id"], aspects, data["excluded_null"])


@dataclass(frozen=True)
class OpinionRecord:
    """One classified sentence as seen by the aggregations."""

    sentence_id: str
    entity_id: str
    aspect: str
    sentiment: Sentiment
    tokens: tuple[str, ...] = ()


def aggregate_aos(records: Iterable[OpinionRecord], entity_id: str,
                  aspect_order: Sequence[str] | None = None) -> OpinionSummary:
    """Count sentiments per aspect for one entity; Null sentences are only tallied.

    Aspects appear in ``aspect_order`` when given (unseen ones are left
    out), otherwise alphabetically.
    """
    counts: dict[str, AspectCounts] = {}
    nulls = 0
    for r in records:
        if r.entity_id != entity_id:
            continue
        if r.aspect == NULL_LABEL:
            nulls += 1
            continue
        counts[r.aspect] = counts.get(r.aspect, AspectCounts()).add(r.sentiment)
    order = [a for a in aspect_order if a in counts] if aspect_order else []
    order += sorted(set(counts) - set(order))
    if not counts:
        logger.warning("entity %s has no sentence with a non-Null aspect", entity_id)
    return OpinionSummary(entity_id, {a: counts[a] for a in order}, nulls)


def aggregate_all(records: Sequence[OpinionRecord],
                  aspect_order: Sequence[str] | None = None) -> dict[str, OpinionSummary]:
    entities = sorted({r.entity_id for r in records})
    return {e: aggregate_aos(records, e, aspect_order) for e in entities}


@dataclass(frozen=True)
class Verdict:
    aspect: str
    classification: str
    positive_share: float
    negative_share: float
    margin: float


def classify_shares(positive: float, negative: float, margin: float) -> str:
    if positive - negative > margin:
        return "strength"
    if negative - positive > margin:
        return "weakness"
    return "mixed"


def verdicts(summary: OpinionSummary, margin: float = DEFAULT_MARGIN) -> list[Verdict]:
    if not 0.0 <= margin < 1.0:
        raise ValidationError(f"margin must lie in [0, 1), got {margin}")
    out = []
    for aspect, counts in summary.aspects.items():
        if counts.total == 0:
            continue
        pos, _, neg = counts.proportions()
        out.append(Verdict(aspect, classify_shares(pos, neg, margin), pos, neg, margin))
    return out


# ---------------------------------------------------------------------------
# Bigrams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BigramCount:
    first: str
    second: str
    count: int        # occurrences
    sentences: int    # sentences containing the pair at least once
    share: float


@dataclass(frozen=True)
class BigramReport:
    aspect: str | None
    sentiment: str | None
    threshold: float
    n_sentences: int
    bigrams: list[BigramCount] = field(default_factory=list)


def frequent_bigrams(sentences: Sequence[Sequence[str]], threshold: float = DEFAULT_BIGRAM_THRESHOLD,
                     aspect: str | None = None, sentiment: str | None = None) -> BigramReport:
    """Adjacent token pairs found in more than ``threshold`` of the sentences."""
    if not 0.0 < threshold <= 1.0:
        raise ValidationError(f"threshold must lie in (0, 1], got {threshold}")
    occurrences: Counter[tuple[str, str]] = Counter()
    containing: Counter[tuple[str, str]] = Counter()
    for tokens in sentences:
        pairs = list(zip(tokens, tokens[1:]))
        occurrences.update(pairs)
        containing.update(set(pairs))
    n = len(sentences)
    kept = [BigramCount(a, b, occurrences[(a, b)], k, k / n)
            for (a, b), k in containing.items() if k / n > threshold]
    kept.sort(key=lambda g: (-g.count, g.first, g.second))
    return BigramReport(aspect, sentiment, threshold, n, kept)


def bigram_reports(records: Sequence[OpinionRecord], entity_id: str | None = None,
                   threshold: float = DEFAULT_BIGRAM_THRESHOLD,
                   sentiments: Sequence[Sentiment] = (Sentiment.NEGATIVE, Sentiment.POSITIVE)
                   ) -> list[BigramReport]:
    """One report per (aspect, sentiment) cell with at least one sentence."""
    groups: dict[tuple[str, Sentiment], list[tuple[str, ...]]] = {}
    for r in records:
        if r.aspect == NULL_LABEL or r.sentiment not in sentiments:
            continue
        if entity_id is not None and r.entity_id != entity_id:
            continue
        groups.setdefault((r.aspect, r.sentiment), []).append(r.tokens)
    return [frequent_bigrams(groups[key], threshold, key[0], key[1].label)
            for key in sorted(groups, key=lambda k: (k[0], k[1]))]


def bigrams_csv(reports: Sequence[BigramReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["aspect", "sentiment", "w1", "w2", "count", "share"])
    for rep in reports:
        for g in rep.bigrams:
            w.writerow([rep.aspect, rep.sentiment, g.first, g.second, g.count, f"{g.share:.6f}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Competitor matrix
# ---------------------------------------------------------------------------

GLYPHS = {"strength": "+", "weakness": "-", "mixed": "~"}
NA = "N/A"
_ANSI = {"strength": "\033[32m", "weakness": "\033[31m", "mixed": "\033[33m"}
_RESET = "\033[0m"


def color_enabled(stream=None) -> bool:
    """Colour only for terminals, and never when ``NO_COLOR`` is set."""
    if "NO_COLOR" in os.environ:
        return False
    return bool(stream is not None and hasattr(stream, "isatty") and stream.isatty())


@dataclass(frozen=True)
class MatrixCell:
    counts: AspectCounts
    net: float
    verdict: str


@dataclass(frozen=True)
class CompetitorMatrix:
    aspects: list[str]
    entities: list[str]
    cells: dict[tuple[str, str], MatrixCell]
    excluded_null: dict[str, int]
    margin: float

    def cell(self, aspect: str, entity: str) -> MatrixCell | None:
        return self.cells.get((aspect, entity))

    def to_summaries(self) -> dict[str, OpinionSummary]:
        out = {}
        for e in self.entities:
            aspects = {a: self.cells[(a, e)].counts for a in self.aspects if (a, e) in self.cells}
            out[e] = OpinionSummary(e, aspects, self.excluded_null[e])
        return out

    def rows(self) -> tuple[list[str], list[list[str]]]:
        header = ["aspect"] + self.entities
        body = []
        for a in self.aspects:
            row = [a]
            for e in self.entities:
                c = self.cell(a, e)
                row.append(NA if c is None else f"{c.net:+.2f} {GLYPHS[c.verdict]}")
            body.append(row)
        return header, body

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["aspect", "entity", "positive", "neutral", "negative", "net", "verdict"])
        for a in self.aspects:
            for e in self.entities:
                c = self.cell(a, e)
                if c is None:
                    w.writerow([a, e, "", "", "", NA, NA])
                else:
                    w.writerow([a, e, c.counts.positive, c.counts.neutral, c.counts.negative,
                                f"{c.net:.6f}", c.verdict])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, margin: float = DEFAULT_MARGIN) -> "CompetitorMatrix":
        rows = list(csv.DictReader(io.StringIO(text)))
        aspects = list(dict.fromkeys(r["aspect"] for r in rows))
        entities = list(dict.fromkeys(r["entity"] for r in rows))
        cells = {}
        for r in rows:
            if r["verdict"] != NA:
                counts = AspectCounts(int(r["positive"]), int(r["neutral"]), int(r["negative"]))
                cells[(r["aspect"], r["entity"])] = MatrixCell(counts, float(r["net"]), r["verdict"])
        return cls(aspects, entities, cells, dict.fromkeys(entities, 0), margin)

    def render_text(self, color: bool = False) -> str:
        header, body = self.rows()
        widths = [max(len(x) for x in col) for col in zip(header, *body)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
                 "  ".join("-" * w for w in widths)]
        for a, row in zip(self.aspects, body):
            cells = [row[0].ljust(widths[0])]
            for e, text, w in zip(self.entities, row[1:], widths[1:]):
                padded = text.rjust(w)
                c = self.cell(a, e)
                if color and c is not None:
                    padded = f"{_ANSI[c.verdict]}{padded}{_RESET}"
                cells.append(padded)
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines) + "\n"


def competitor_matrix(summaries: Sequence[OpinionSummary] | Mapping[str, OpinionSummary],
                      margin: float = DEFAULT_MARGIN,
                      aspect_order: Sequence[str] | None = None) -> CompetitorMatrix:
    """Aspects by entities, each cell holding net sentiment and a verdict."""
    if isinstance(summaries, Mapping):
        summaries = list(summaries.values())
    if len(summaries) < 2:
        raise ValidationError("a competitor matrix needs at least two entities")
    entities = [s.entity_id for s in summaries]
    if len(set(entities)) != len(entities):
        raise ValidationError("duplicate entity in competitor matrix")
    seen = list(dict.fromkeys(a for s in summaries for a in s.aspects))
    aspects = [a for a in aspect_order if a in seen] if aspect_order else []
    aspects += sorted(set(seen) - set(aspects))
    cells = {}
    for s in summaries:
        for a, counts in s.aspects.items():
            if counts.total == 0:
                continue
            pos, _, neg = counts.proportions()
            cells[(a, s.entity_id)] = MatrixCell(counts, pos - neg, classify_shares(pos, neg, margin))
    return CompetitorMatrix(aspects, entities, cells, {s.entity_id: s.excluded_null for s in summaries},
                            margin)


def aos_csv(summaries: Mapping[str, OpinionSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entity", "aspect", "positive", "neutral", "negative",
                "positive_share", "neutral_share", "negative_share"])
    for e, s in summaries.items():
        for a, c in s.aspects.items():
            p = c.proportions()
            w.writerow([e, a, c.positive, c.neutral, c.negative] + [f"{x:.6f}" for x in p])
    return buf.getvalue()


def aos_json(summaries: Mapping[str, OpinionSummary], margin: float = DEFAULT_MARGIN) -> str:
    data = []
    for s in summaries.values():
        d = s.to_dict()
        d["verdicts"] = {v.aspect: v.classification for v in verdicts(s, margin)}
        data.append(d)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"
