"""Precision, recall and F1 against human annotations, plus report rendering."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from reviewintel.errors import ValidationError
from reviewintel.sentiment import Sentiment

TASKS = ("aspect", "sentiment")
F1_TOLERANCE = 0.01


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall (0 when both are 0)."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    true_positives: int
    false_positives: int
    false_negatives: int

    @property
    def support(self) -> int:
        return self.true_positives + self.false_negatives

    @property
    def precision(self) -> float | None:
        predicted = self.true_positives + self.false_positives
        return self.true_positives / predicted if predicted else None

    @property
    def recall(self) -> float | None:
        return self.true_positives / self.support if self.support else None

    @property
    def f1(self) -> float | None:
        """Undefined for a class nobody annotated."""
        if not self.support:
            return None
        return f1_score(self.precision or 0.0, self.recall)

    @property
    def defined(self) -> bool:
        return self.support > 0


def _mean(values: Iterable[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


@dataclass(frozen=True)
class EvaluationReport:
    task: str
    classes: list[ClassMetrics]
    n_sentences: int
    n_correct: int

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_sentences if self.n_sentences else 0.0

    @property
    def macro_precision(self) -> float | None:
        return _mean(c.precision for c in self.classes if c.defined)

    @property
    def macro_recall(self) -> float | None:
        return _mean(c.recall for c in self.classes if c.defined)

    @property
    def macro_f1(self) -> float | None:
        return _mean(c.f1 for c in self.classes if c.defined)

    def by_label(self) -> dict[str, ClassMetrics]:
        return {c.label: c for c in self.classes}


def _canonical(label: str, task: str) -> str:
    if task == "sentiment":
        return Sentiment.parse(label).label
    return label.strip()


def evaluate(predictions: Mapping[str, str], truth: Mapping[str, str] | Sequence[tuple[str, str]],
             task: str = "aspect", classes: Sequence[str] | None = None) -> EvaluationReport:
    """One-vs-rest counts for every class seen in truth, predictions or ``classes``.

    Only annotated sentences are scored; predictions for other sentences
    are ignored.
    """
    if task not in TASKS:
        raise ValidationError(f"unknown task {task!r}; choose from {TASKS}")
    truth = dict(truth)
    missing = sorted(sid for sid in truth if sid not in predictions)
    if missing:
        shown = ", ".join(missing[:10]) + (" ..." if len(missing) > 10 else "")
        raise ValidationError(f"{len(missing)} annotated sentences have no prediction: {shown}")

    pairs = [(_canonical(truth[sid], task), _canonical(predictions[sid], task)) for sid in truth]
    labels = list(dict.fromkeys(_canonical(c, task) for c in classes or ()))
    labels += sorted({x for pair in pairs for x in pair} - set(labels))

    tp = dict.fromkeys(labels, 0)
    fp = dict.fromkeys(labels, 0)
    fn = dict.fromkeys(labels, 0)
    for t, p in pairs:
        if t == p:
            tp[t] += 1
        else:
            fn[t] += 1
            fp[p] += 1
    metrics = [ClassMetrics(lab, tp[lab], fp[lab], fn[lab]) for lab in labels]
    return EvaluationReport(task, metrics, len(pairs), sum(tp.values()))


# ---------------------------------------------------------------------------
# Annotations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnotatedSentence:
    sentence_id: str
    true_aspect: str
    true_sentiment: str
    annotator2_aspect: str | None = None
    annotator2_sentiment: str | None = None


def read_annotations(path: str | Path) -> list[AnnotatedSentence]:
    """CSV with ``sentence_id,true_aspect,true_sentiment`` and optional second-annotator columns."""
    rows = []
    seen = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"sentence_id", "true_aspect", "true_sentiment"}
        if not required <= set(reader.fieldnames or ()):
            raise ValidationError(f"{path}: header must include {sorted(required)}")
        for lineno, row in enumerate(reader, 2):
            sid = (row["sentence_id"] or "").strip()
            if not sid:
                raise ValidationError(f"{path}:{lineno}: empty sentence_id")
            if sid in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate sentence_id {sid}")
            seen.add(sid)
            sentiment = Sentiment.parse(row["true_sentiment"]).label
            a2 = (row.get("annotator2_aspect") or "").strip() or None
            s2 = (row.get("annotator2_sentiment") or "").strip() or None
            rows.append(AnnotatedSentence(sid, row["true_aspect"].strip(), sentiment, a2,
                                          Sentiment.parse(s2).label if s2 else None))
    return rows


@dataclass(frozen=True)
class Disagreement:
    sentence_id: str
    field: str
    first: str
    second: str


def disagreements(annotations: Sequence[AnnotatedSentence]) -> list[Disagreement]:
    out = []
    for a in annotations:
        if a.annotator2_aspect is not None and a.annotator2_aspect != a.true_aspect:
            out.append(Disagreement(a.sentence_id, "aspect", a.true_aspect, a.annotator2_aspect))
        if a.annotator2_sentiment is not None and a.annotator2_sentiment != a.true_sentiment:
            out.append(Disagreement(a.sentence_id, "sentiment", a.true_sentiment, a.annotator2_sentiment))
    return out


def check_annotation_ids(annotations: Sequence[AnnotatedSentence], holdout_ids: Iterable[str]) -> None:
    known = set(holdout_ids)
    stray = [a.sentence_id for a in annotations if a.sentence_id not in known]
    if stray:
        raise ValidationError(f"{len(stray)} annotated ids are not in the held-out set: "
                              + ", ".join(stray[:10]))


# ---------------------------------------------------------------------------
# Published tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PublishedRow:
    table: str
    method: str
    label: str
    recall: float
    precision: float
    f1: float


@dataclass(frozen=True)
class ConsistencyRow:
    row: PublishedRow
    computed_f1: float

    @property
    def ok(self) -> bool:
        return abs(self.computed_f1 - self.row.f1) <= F1_TOLERANCE + 1e-12


def _read_published(name: str, table: str) -> list[PublishedRow]:
    text = resources.files("reviewintel.data").joinpath(name).read_text("utf-8")
    return [PublishedRow(table, r["method"], r["class"], float(r["recall"]),
                         float(r["precision"]), float(r["f1"]))
            for r in csv.DictReader(io.StringIO(text))]


def load_published_tables() -> list[PublishedRow]:
    """Bundled reference per-class metrics, aspect rows first, then sentiment rows."""
    return (_read_published("published_aspect_metrics.csv", "aspect")
            + _read_published("published_sentiment_metrics.csv", "sentiment"))


def consistency_check(rows: Sequence[PublishedRow]) -> list[ConsistencyRow]:
    """Recompute F1 from each (R, P) pair; raises listing every row off by more than 0.01."""
    checked = [ConsistencyRow(r, f1_score(r.precision, r.recall)) for r in rows]
    bad = [c for c in checked if not c.ok]
    if bad:
        lines = [f"{c.row.table}/{c.row.method}/{c.row.label}: published {c.row.f1:.2f}, "
                 f"computed {c.computed_f1:.4f}" for c in bad]
        raise ValidationError("F1 disagrees with R and P:\n" + "\n".join(lines))
    return checked


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.2f}"


def comparison_rows(reports: Mapping[str, EvaluationReport]) -> tuple[list[str], list[list[str]]]:
    """Classes down, one R/P/F1 column triple per method, macro row last."""
    methods = list(reports)
    labels = list(dict.fromkeys(c.label for r in reports.values() for c in r.classes))
    header = ["class"] + [f"{m} {x}" for m in methods for x in ("R", "P", "F1")]
    rows = []
    for lab in labels:
        row = [lab]
        for m in methods:
            c = reports[m].by_label().get(lab)
            row += ["n/a"] * 3 if c is None else [_fmt(c.recall), _fmt(c.precision), _fmt(c.f1)]
        rows.append(row)
    macro = ["macro"]
    for m in methods:
        r = reports[m]
        macro += [_fmt(r.macro_recall), _fmt(r.macro_precision), _fmt(r.macro_f1)]
    rows.append(macro)
    return header, rows


def render_csv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def render_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    out = []
    for i, row in enumerate([header, *rows]):
        cells = [str(x).ljust(w) if j == 0 else str(x).rjust(w) for j, (x, w) in enumerate(zip(row, widths))]
        out.append("  ".join(cells).rstrip())
        if i == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"
