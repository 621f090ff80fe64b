"""Pipeline stages over an output directory.

Each stage reads what earlier stages left in the output directory, writes
its own artifacts, and records a manifest under ``manifests/``. Artifacts
depend only on inputs, configuration and seeds; the manifests also hold
wall-clock timings and so are not byte-stable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterator, Sequence

from filelock import FileLock, Timeout

import reviewintel
from reviewintel import aspects as asp
from reviewintel import evaluation as ev
from reviewintel import insights as ins
from reviewintel import sentiment as sen
from reviewintel.config import ProjectConfig
from reviewintel.corpus import (
    Corpus,
    DEFAULT_ABBREVIATIONS,
    DEFAULT_STOPWORDS,
    PreprocessOptions,
    StandardizationMap,
    build_corpus,
    ingest_reviews,
    load_corpus,
    read_word_list,
    save_corpus,
)
from reviewintel.errors import StageDependencyError, ValidationError
from reviewintel.topic_models import FittedTopicModel, ModelConfig, fit, select_k

logger = logging.getLogger(__name__)

CORPUS_FILE = "corpus.json"
CATALOG_FILE = "catalog.json"
MERGE_DRAFT_FILE = "merge_map.draft.tsv"
WORDLISTS_FILE = "wordlists.csv"
ASPECT_LABELS_FILE = "aspect_labels.jsonl"
SENTIMENT_FILE = "sentiment.jsonl"
CALIBRATION_FILE = "calibration.json"
AOS_JSON_FILE = "aos.json"
AOS_CSV_FILE = "aos.csv"
BIGRAMS_FILE = "bigrams.csv"
MATRIX_CSV_FILE = "matrix.csv"
MATRIX_TEXT_FILE = "matrix.txt"
STAGES = ("ingest", "select-k", "fit", "classify-aspects", "classify-sentiment",
          "evaluate", "aos", "bigrams", "matrix")


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Workspace:
    """The output directory and the files each stage owns in it."""

    def __init__(self, cfg: ProjectConfig, out: Path | None = None):
        out = out or cfg.paths.output_dir
        if out is None:
            raise ValidationError("no output directory: pass --out or set paths.output_dir")
        self.cfg = cfg
        self.root = Path(out)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, *parts: str) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def model_path(self, algorithm: str) -> Path:
        return self.path("models", f"{algorithm}.json")

    def need(self, name: str, stage: str) -> Path:
        p = self.root / name
        if not p.exists():
            raise StageDependencyError(f"{name} not found in {self.root}; run `{stage}` first")
        return p

    @contextmanager
    def locked(self) -> Iterator[None]:
        lock = FileLock(str(self.root / ".lock"))
        try:
            lock.acquire(timeout=0)
        except Timeout:
            raise ValidationError(f"another run holds the lock on {self.root}") from None
        try:
            yield
        finally:
            lock.release()

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text, "utf-8")
        return p

    def write_manifest(self, stage: str, outputs: Sequence[Path], seconds: float,
                       extra: dict | None = None) -> Path:
        manifest = {
            "stage": stage,
            "tool_version": reviewintel.__version__,
            "python": platform.python_version(),
            "config_digest": self.cfg.digest(),
            "config": self.cfg.to_dict(),
            "seed": self.cfg.seed,
            "threads": self.cfg.threads,
            "seconds": round(seconds, 3),
            "outputs": {str(p.relative_to(self.root)): sha256_file(p) for p in outputs},
        }
        if extra:
            manifest.update(extra)
        p = self.path("manifests", f"{stage}.json")
        p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
        return p


def _timed(stage: str, body: Callable[[Workspace], list[Path]]):
    def run(ws: Workspace) -> list[Path]:
        start = time.perf_counter()
        outputs = body(ws)
        ws.write_manifest(stage, outputs, time.perf_counter() - start)
        logger.info("%s: wrote %d artifacts", stage, len(outputs))
        return outputs
    return run


# ---------------------------------------------------------------------------
# Loading helpers
# ---------------------------------------------------------------------------

def preprocess_options(cfg: ProjectConfig) -> PreprocessOptions:
    p = cfg.paths
    return PreprocessOptions(
        stopwords=read_word_list(p.stopwords) if p.stopwords else DEFAULT_STOPWORDS,
        abbreviations=read_word_list(p.abbreviations) if p.abbreviations else DEFAULT_ABBREVIATIONS,
        standardization=StandardizationMap.from_tsv(p.standardization) if p.standardization else None,
        stemmer=cfg.corpus.stemmer,
        dedupe=cfg.corpus.dedupe,
    )


def load_ws_corpus(ws: Workspace) -> Corpus:
    return load_corpus(ws.need(CORPUS_FILE, "ingest"))


def algorithms(cfg: ProjectConfig) -> list[str]:
    return list(cfg.models)


def load_models(ws: Workspace) -> dict[str, FittedTopicModel]:
    models = {}
    for algorithm in algorithms(ws.cfg):
        p = ws.root / "models" / f"{algorithm}.json"
        if not p.exists():
            raise StageDependencyError(f"models/{algorithm}.json not found in {ws.root}; run `fit` first")
        models[algorithm] = FittedTopicModel.load(p)
    return models


def resolved_model_config(ws: Workspace, algorithm: str) -> ModelConfig:
    cfg = ws.cfg.model_config(algorithm)
    if cfg.k is None:
        chosen = ws.root / "select_k" / f"{algorithm}.json"
        if not chosen.exists():
            raise StageDependencyError(
                f"models.{algorithm}.k is null and select_k/{algorithm}.json is missing; run `select-k` first")
        cfg = replace(cfg, k=int(json.loads(chosen.read_text("utf-8"))["chosen_k"]))
    return cfg


def analyzers(cfg: ProjectConfig) -> list[sen.Analyzer]:
    s = cfg.sentiment
    modifiers = sen.read_modifiers(cfg.paths.modifiers) if cfg.paths.modifiers else sen.Modifiers()
    return [
        sen.SumAnalyzer(sen.read_lexicon(cfg.require("lexicon_sum"), tuple(s.sum_scale)),
                        sen.SentimentThresholds(*s.sum_thresholds)),
        sen.ScaledAnalyzer(sen.read_lexicon(cfg.require("lexicon_scaled"), tuple(s.scaled_scale)),
                           sen.SentimentThresholds(*s.scaled_thresholds)),
        sen.RuleAugmentedAnalyzer(sen.read_lexicon(cfg.require("lexicon_rule"), tuple(s.rule_scale)),
                                  modifiers, thresholds=sen.SentimentThresholds(*s.rule_thresholds)),
    ]


def final_method(labels: Sequence[asp.LabeledSentence]) -> str:
    methods = {r.method for r in labels}
    if asp.ENSEMBLE_METHOD in methods:
        return asp.ENSEMBLE_METHOD
    return sorted(methods)[0]


def opinion_records(ws: Workspace) -> tuple[list[ins.OpinionRecord], list[str]]:
    """Ensemble aspect and ensemble sentiment per sentence, plus the catalog order."""
    corpus = load_ws_corpus(ws)
    labels = asp.read_labels(ws.need(ASPECT_LABELS_FILE, "classify-aspects"))
    sentiments = sen.read_verdicts(ws.need(SENTIMENT_FILE, "classify-sentiment"))
    catalog = asp.AspectCatalog.from_dict(json.loads(ws.need(CATALOG_FILE, "classify-aspects").read_text("utf-8")))
    method = final_method(labels)
    aspect_of = {r.sentence_id: r.aspect for r in labels if r.method == method}
    records = []
    for s in corpus.sentences:
        if s.sentence_id not in aspect_of or s.sentence_id not in sentiments:
            raise StageDependencyError(f"sentence {s.sentence_id} lacks labels; rerun the classify stages")
        records.append(ins.OpinionRecord(s.sentence_id, s.entity_id, aspect_of[s.sentence_id],
                                         sentiments[s.sentence_id], s.tokens))
    return records, catalog.labels


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def _ingest(ws: Workspace) -> list[Path]:
    cfg = ws.cfg
    reviews = ingest_reviews(cfg.require("reviews"))
    corpus = build_corpus(reviews, holdout_count=cfg.corpus.holdout_count, seed=cfg.seed,
                          min_sentence_frequency=cfg.corpus.min_sentence_frequency,
                          options=preprocess_options(cfg))
    path = ws.path(CORPUS_FILE)
    save_corpus(corpus, path)
    logger.info("ingest: %d reviews, %d sentences, %d terms, %d skipped rows, %d duplicates",
                len(reviews), len(corpus.sentences), len(corpus.vocabulary),
                len(corpus.skipped_rows), corpus.duplicates_removed)
    return [path]


def _select_k(ws: Workspace) -> list[Path]:
    cfg = ws.cfg
    corpus = load_ws_corpus(ws)
    opts = cfg.select_k
    outputs = []
    for algorithm in algorithms(cfg):
        template = cfg.model_config(algorithm)
        template = replace(template, k=template.k or opts.k_min)
        result = select_k(corpus.matrix, template, opts.k_min, opts.k_max, opts.step, opts.n_top, opts.epsilon,
                           seeds=opts.seeds or None)
        p = ws.path("select_k", f"{algorithm}.json")
        p.write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")
        outputs.append(p)
    return outputs


def _fit(ws: Workspace) -> list[Path]:
    corpus = load_ws_corpus(ws)
    outputs = []
    for algorithm in algorithms(ws.cfg):
        model = fit(corpus.matrix, resolved_model_config(ws, algorithm))
        p = ws.model_path(algorithm)
        model.save(p)
        outputs.append(p)
    return outputs


def _classify_aspects(ws: Workspace) -> list[Path]:
    cfg = ws.cfg
    corpus = load_ws_corpus(ws)
    models = load_models(ws)
    outputs = []
    if cfg.paths.merge_map:
        merge = asp.read_merge_map(cfg.paths.merge_map)
    elif cfg.aspects.seed_keywords:
        merge = asp.draft_merge_map(models, cfg.aspects.seed_keywords, cfg.corpus.stemmer)
    else:
        merge = asp.identity_merge_map(models)
    draft = ws.path(MERGE_DRAFT_FILE)
    asp.write_merge_map(merge, draft)
    outputs.append(draft)

    catalog = asp.build_catalog(models, merge, cfg.aspects.prevalence_floor, cfg.aspects.n_keywords)
    relations = asp.read_relations(cfg.paths.relations) if cfg.paths.relations else {}
    wordlists = asp.build_custom_wordlists(catalog, relations, cfg.aspects.n_keywords, cfg.corpus.stemmer)
    outputs.append(ws.write_text(CATALOG_FILE, json.dumps(catalog.to_dict(), indent=2, sort_keys=True) + "\n"))
    wl_path = ws.path(WORDLISTS_FILE)
    asp.write_wordlists(wordlists, catalog, wl_path)
    outputs.append(wl_path)

    classifier = asp.AspectClassifier(models, catalog, wordlists,
                                      asp.EnsembleTopicConfig(cfg.aspects.gamma, cfg.aspects.tie_seed))
    labels_path = ws.path(ASPECT_LABELS_FILE)
    asp.write_labels(classifier.label_all(corpus.sentences), labels_path)
    outputs.append(labels_path)
    return outputs


def _classify_sentiment(ws: Workspace) -> list[Path]:
    corpus = load_ws_corpus(ws)
    members = analyzers(ws.cfg)
    texts = [s.raw_text for s in corpus.sentences]
    calibration = sen.calibrate(members, texts)
    verdicts = [(s.sentence_id, sen.classify_sentiment_ensemble(s.raw_text, members, calibration))
                for s in corpus.sentences]
    out = ws.path(SENTIMENT_FILE)
    sen.write_verdicts(verdicts, out)
    cal = ws.write_text(CALIBRATION_FILE, json.dumps(calibration.to_dict(), indent=2, sort_keys=True) + "\n")
    return [out, cal]


def _evaluate(ws: Workspace) -> list[Path]:
    cfg = ws.cfg
    annotations_path = cfg.require("annotations")
    corpus = load_ws_corpus(ws)
    annotations = ev.read_annotations(annotations_path)
    ev.check_annotation_ids(annotations, corpus.holdout_ids)
    labels = asp.read_labels(ws.need(ASPECT_LABELS_FILE, "classify-aspects"))
    catalog = asp.AspectCatalog.from_dict(json.loads(ws.need(CATALOG_FILE, "classify-aspects").read_text("utf-8")))
    classes = catalog.labels + [asp.NULL_LABEL]

    aspect_truth = {a.sentence_id: a.true_aspect for a in annotations}
    methods = list(dict.fromkeys(r.method for r in labels))
    aspect_reports = {}
    for m in methods:
        pred = {r.sentence_id: r.aspect for r in labels if r.method == m}
        aspect_reports[m] = ev.evaluate(pred, aspect_truth, "aspect", classes)

    records = [json.loads(line) for line in
               ws.need(SENTIMENT_FILE, "classify-sentiment").read_text("utf-8").splitlines() if line]
    sentiment_truth = {a.sentence_id: a.true_sentiment for a in annotations}
    sentiment_classes = [s.label for s in (sen.Sentiment.POSITIVE, sen.Sentiment.NEGATIVE, sen.Sentiment.NEUTRAL)]
    sentiment_reports = {}
    analyzer_ids = list(records[0]["o"]) if records else []
    for a in analyzer_ids:
        pred = {r["sentence_id"]: r["o"][a] for r in records}
        sentiment_reports[a] = ev.evaluate(pred, sentiment_truth, "sentiment", sentiment_classes)
    sentiment_reports["e_sa"] = ev.evaluate({r["sentence_id"]: r["O"] for r in records},
                                            sentiment_truth, "sentiment", sentiment_classes)

    outputs = []
    for name, reports in (("aspect", aspect_reports), ("sentiment", sentiment_reports)):
        header, rows = ev.comparison_rows(reports)
        outputs.append(ws.write_text(f"evaluation/{name}.csv", ev.render_csv(header, rows)))
        outputs.append(ws.write_text(f"evaluation/{name}.txt", ev.render_text(header, rows)))

    header = ["sentence_id", "field", "annotator1", "annotator2"]
    rows = [[d.sentence_id, d.field, d.first, d.second] for d in ev.disagreements(annotations)]
    outputs.append(ws.write_text("evaluation/disagreements.csv", ev.render_csv(header, rows)))
    return outputs


def _aos(ws: Workspace) -> list[Path]:
    records, order = opinion_records(ws)
    summaries = ins.aggregate_all(records, order)
    return [ws.write_text(AOS_JSON_FILE, ins.aos_json(summaries, ws.cfg.insights.margin)),
            ws.write_text(AOS_CSV_FILE, ins.aos_csv(summaries))]


def _bigrams(ws: Workspace) -> list[Path]:
    records, _ = opinion_records(ws)
    reports = ins.bigram_reports(records, ws.cfg.insights.target_entity, ws.cfg.insights.bigram_threshold)
    return [ws.write_text(BIGRAMS_FILE, ins.bigrams_csv(reports))]


def _matrix(ws: Workspace) -> list[Path]:
    records, order = opinion_records(ws)
    summaries = ins.aggregate_all(records, order)
    target = ws.cfg.insights.target_entity
    if target is not None:
        if target not in summaries:
            raise ValidationError(f"insights.target_entity {target!r} has no sentences")
        summaries = {target: summaries[target], **{e: s for e, s in summaries.items() if e != target}}
    matrix = ins.competitor_matrix(summaries, ws.cfg.insights.margin, order)
    return [ws.write_text(MATRIX_CSV_FILE, matrix.to_csv()),
            ws.write_text(MATRIX_TEXT_FILE, matrix.render_text(color=False))]


STAGE_FUNCTIONS: dict[str, Callable[[Workspace], list[Path]]] = {
    "ingest": _timed("ingest", _ingest),
    "select-k": _timed("select-k", _select_k),
    "fit": _timed("fit", _fit),
    "classify-aspects": _timed("classify-aspects", _classify_aspects),
    "classify-sentiment": _timed("classify-sentiment", _classify_sentiment),
    "evaluate": _timed("evaluate", _evaluate),
    "aos": _timed("aos", _aos),
    "bigrams": _timed("bigrams", _bigrams),
    "matrix": _timed("matrix", _matrix),
}


def pipeline_stages(cfg: ProjectConfig) -> list[str]:
    """Every stage; select-k only when some model leaves K open, evaluate only with annotations."""
    stages = list(STAGES)
    if all(opts.k is not None for opts in cfg.models.values()):
        stages.remove("select-k")
    if cfg.paths.annotations is None:
        stages.remove("evaluate")
    return stages


def run_stage(stage: str, cfg: ProjectConfig, out: Path | None = None) -> list[Path]:
    ws = Workspace(cfg, out)
    with ws.locked():
        return STAGE_FUNCTIONS[stage](ws)


def run_pipeline(cfg: ProjectConfig, out: Path | None = None) -> list[Path]:
    ws = Workspace(cfg, out)
    outputs: list[Path] = []
    with ws.locked():
        for stage in pipeline_stages(cfg):
            outputs += STAGE_FUNCTIONS[stage](ws)
    return outputs

