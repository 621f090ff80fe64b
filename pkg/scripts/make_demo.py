"""Regenerate the bundled demo project under demo/.

Writes the review CSV, the three sentiment lexicons, modifiers, lexical
relations, a standardization map, held-out annotations and config.json.
Annotations come from the generator's known labels for the sentences
that the configured split holds out.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from reviewintel.corpus import ingest_reviews, preprocess_reviews, partition, SplitSpec
from reviewintel.synthetic import DEMO_ASPECTS, demo_reviews, write_reviews_csv

ROOT = Path(__file__).resolve().parents[1] / "demo"
SEED = 7
HOLDOUT = 200

SUM_LEXICON = {
    "great": 3, "excellent": 3, "good": 3, "wonderful": 4, "pleasant": 2, "superb": 5, "lovely": 3,
    "loved": 3, "friendly": 2, "helpful": 2, "tasty": 2, "delicious": 3, "punctual": 2, "fast": 2,
    "quickly": 1, "early": 1, "plenty": 1, "fine": 1,
    "terrible": -3, "awful": -3, "bad": -3, "poor": -2, "horrible": -3, "disappointing": -2,
    "dreadful": -3, "cramped": -2, "broken": -1, "rude": -2, "ignored": -1, "unhelpful": -2,
    "lost": -3, "damaged": -3, "stale": -2, "cold": -1, "bland": -2, "freezing": -1,
    "delayed": -2, "late": -1, "forever": -1, "wait": -1,
}
SCALED_LEXICON = {w: round(v / 5, 2) for w, v in SUM_LEXICON.items()}
SCALED_LEXICON.update({"wait": 0.0, "quickly": 0.2, "broken": -0.4, "late": -0.4})
RULE_LEXICON = {w: round(v * 0.8, 2) for w, v in SUM_LEXICON.items()}
RULE_LEXICON.update({"standard": 0.3, "typical": -0.3, "fine": 0.8, "wait": -0.4})

MODIFIERS = [("not", "negate", -0.74), ("never", "negate", -0.74), ("no", "negate", -0.74),
             ("very", "boost", 0.293), ("really", "boost", 0.293), ("extremely", "boost", 0.293),
             ("slightly", "dampen", 0.293), ("somewhat", "dampen", 0.293)]

RELATIONS = [
    ("food", "hypo", "burger"), ("food", "hypo", "sandwich"), ("food", "hypo", "noodles"),
    ("food", "hypo", "croissant"), ("meal", "syn", "dinner"), ("meal", "syn", "lunch"),
    ("drinks", "hypo", "juice"), ("seat", "syn", "chair"), ("legroom", "syn", "space"),
    ("baggage", "syn", "luggage"), ("bag", "hypo", "backpack"), ("staff", "syn", "personnel"),
    ("crew", "hypo", "pilot"), ("delay", "syn", "holdup"), ("delay", "ant", "punctuality"),
    ("entertainment", "hypo", "games"), ("screen", "syn", "monitor"), ("movies", "syn", "cinema"),
]

STANDARDIZATION = [("wi-fi", "wifi"), ("inflight", "in-flight"), ("bags", "bag")]


def write_tsv(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in rows:
            fh.write("\t".join(str(x) for x in row) + "\n")


def main() -> None:
    ROOT.mkdir(exist_ok=True)
    reviews = demo_reviews(n_per_entity=100, seed=SEED)
    write_reviews_csv(reviews, ROOT / "reviews.csv")
    write_tsv(ROOT / "lexicon_sum.tsv", sorted(SUM_LEXICON.items()))
    write_tsv(ROOT / "lexicon_scaled.tsv", sorted(SCALED_LEXICON.items()))
    write_tsv(ROOT / "lexicon_rule.tsv", sorted(RULE_LEXICON.items()))
    write_tsv(ROOT / "modifiers.tsv", MODIFIERS)
    write_tsv(ROOT / "relations.tsv", RELATIONS)
    write_tsv(ROOT / "standardization.tsv", STANDARDIZATION)

    # the same preprocessing and split the pipeline will run
    from reviewintel.pipeline import preprocess_options
    from reviewintel.config import config_from_dict

    config = {
        "paths": {
            "reviews": "reviews.csv", "output_dir": "out", "standardization": "standardization.tsv",
            "relations": "relations.tsv", "annotations": "annotations.csv",
            "lexicon_sum": "lexicon_sum.tsv", "lexicon_scaled": "lexicon_scaled.tsv",
            "lexicon_rule": "lexicon_rule.tsv", "modifiers": "modifiers.tsv",
        },
        "corpus": {"holdout_count": HOLDOUT, "min_sentence_frequency": 3, "stemmer": "snowball", "dedupe": True},
        "select_k": {"k_min": 5, "k_max": 10, "step": 1, "n_top": 10, "epsilon": 1.0},
        "models": {
            "plsa_em": {"k": 8},
            "lda_vi": {"k": 8},
            "lda_gs": {"k": 8, "max_iterations": 600, "burn_in": 300},
        },
        "aspects": {
            "gamma": 0.7, "prevalence_floor": 0.0005, "n_keywords": 10, "tie_seed": 0,
            "seed_keywords": {a.label: list(a.nouns) for a in DEMO_ASPECTS},
        },
        "insights": {"margin": 0.1, "bigram_threshold": 0.15, "target_entity": "target"},
        "seed": SEED,
    }
    (ROOT / "config.json").write_text(json.dumps(config, indent=2) + "\n", "utf-8")
    (ROOT / "annotations.csv").write_text("sentence_id,true_aspect,true_sentiment\n", "utf-8")
    cfg = config_from_dict(config, ROOT)

    pre = preprocess_reviews(ingest_reviews(ROOT / "reviews.csv"), preprocess_options(cfg))
    _, holdout = partition(pre.sentences, SplitSpec(HOLDOUT, SEED))
    truth = {}
    for r in reviews:
        for pos, s in enumerate(r.sentences):
            truth[f"{r.review_id}:{pos}"] = s
    rng = np.random.default_rng(SEED + 1)
    aspects = [a.label for a in DEMO_ASPECTS] + ["Null"]
    with open(ROOT / "annotations.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sentence_id", "true_aspect", "true_sentiment", "annotator2_aspect", "annotator2_sentiment"])
        for s in holdout:
            t = truth[s.sentence_id]
            # the generator's sentence must be the one the splitter found
            assert s.raw_text == t.text, (s.sentence_id, s.raw_text, t.text)
            second = t.aspect
            if rng.random() < 0.05:
                second = aspects[rng.integers(len(aspects))]
            w.writerow([s.sentence_id, t.aspect, t.sentiment, second, t.sentiment])


if __name__ == "__main__":
    main()
