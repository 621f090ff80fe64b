"""Synthetic corpora with known ground truth.

Two generators: one draws bag-of-words sentences from a known LDA model
(used to check topic recovery and the aspect ensemble), the other writes
templated English reviews for several entities (the bundled demo corpus).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from reviewintel.corpus import CorpusMatrix


@dataclass
class SyntheticLDA:
    phi: np.ndarray
    theta: np.ndarray
    documents: list[list[int]]

    @property
    def terms(self) -> list[str]:
        return [f"t{i:03d}" for i in range(self.phi.shape[1])]

    def matrix(self) -> CorpusMatrix:
        return documents_to_matrix(self.documents, self.phi.shape[1])


def documents_to_matrix(documents: list[list[int]], n_terms: int) -> CorpusMatrix:
    rows = np.repeat(np.arange(len(documents)), [len(d) for d in documents])
    cols = np.concatenate([np.asarray(d, dtype=np.int64) for d in documents]) if documents else []
    counts = sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)),
                           shape=(len(documents), n_terms))
    return CorpusMatrix(counts, [str(i) for i in range(len(documents))],
                        [f"t{i:03d}" for i in range(n_terms)])


def block_topics(k: int, n_terms: int, leakage: float, rng: np.random.Generator) -> np.ndarray:
    """Topics owning disjoint vocabulary blocks, each leaking ``leakage`` weight per foreign word."""
    phi = np.full((k, n_terms), leakage)
    blocks = np.array_split(np.arange(n_terms), k)
    for topic, block in enumerate(blocks):
        phi[topic, block] += rng.gamma(2.0, 1.0, size=block.size)
    return phi / phi.sum(axis=1, keepdims=True)


def generate_lda_corpus(k: int = 3, n_terms: int = 60, n_docs: int = 500, mean_length: int = 50,
                        alpha: float = 0.1, leakage: float = 0.01, seed: int = 0,
                        phi: np.ndarray | None = None) -> SyntheticLDA:
    """Sample documents from LDA with near-disjoint block topics."""
    rng = np.random.default_rng(seed)
    if phi is None:
        phi = block_topics(k, n_terms, leakage, rng)
    theta = rng.dirichlet(np.full(k, alpha), size=n_docs)
    docs = []
    for d in range(n_docs):
        length = max(1, int(rng.poisson(mean_length)))
        z = rng.choice(k, size=length, p=theta[d])
        docs.append([int(rng.choice(n_terms, p=phi[t])) for t in z])
    return SyntheticLDA(phi, theta, docs)


def labeled_sentences(phi: np.ndarray, n: int, length: int = 8, purity: float = 0.8,
                      seed: int = 0) -> tuple[list[list[int]], list[int]]:
    """Short sentences with a known dominant topic.

    Each token comes from the sentence's label topic with probability
    ``purity`` and from a uniformly chosen topic otherwise.
    """
    rng = np.random.default_rng(seed)
    k, n_terms = phi.shape
    docs, labels = [], []
    for _ in range(n):
        label = int(rng.integers(k))
        topics = np.where(rng.random(length) < purity, label, rng.integers(k, size=length))
        docs.append([int(rng.choice(n_terms, p=phi[t])) for t in topics])
        labels.append(label)
    return docs, labels


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def greedy_alignment(estimated: np.ndarray, truth: np.ndarray) -> dict[int, int]:
    """Match estimated topics to true topics by repeatedly taking the closest free pair."""
    dist = np.array([[total_variation(e, t) for t in truth] for e in estimated])
    mapping: dict[int, int] = {}
    free_est, free_true = set(range(len(estimated))), set(range(len(truth)))
    for flat in np.argsort(dist, axis=None, kind="stable"):
        i, j = divmod(int(flat), dist.shape[1])
        if i in free_est and j in free_true:
            mapping[i] = j
            free_est.discard(i)
            free_true.discard(j)
        if not free_est or not free_true:
            break
    return mapping


def optimal_alignment(estimated: np.ndarray, truth: np.ndarray) -> dict[int, int]:
    dist = np.array([[total_variation(e, t) for t in truth] for e in estimated])
    r, c = scipy.optimize.linear_sum_assignment(dist)
    return {int(i): int(j) for i, j in zip(r, c)}


def recovery_error(estimated: np.ndarray, truth: np.ndarray) -> float:
    """Mean total-variation distance after greedy alignment."""
    mapping = greedy_alignment(estimated, truth)
    return float(np.mean([total_variation(estimated[i], truth[j]) for i, j in mapping.items()]))


# ---------------------------------------------------------------------------
# Templated airline reviews
# ---------------------------------------------------------------------------

POSITIVE_WORDS = ("great", "excellent", "good", "wonderful", "pleasant", "superb", "lovely")
NEGATIVE_WORDS = ("terrible", "awful", "bad", "poor", "horrible", "disappointing", "dreadful")
NEUTRAL_WORDS = ("standard", "typical", "ordinary")


@dataclass(frozen=True)
class AspectTemplates:
    label: str
    nouns: tuple[str, ...]
    positive: tuple[str, ...]
    negative: tuple[str, ...]
    neutral: tuple[str, ...]
    rare: tuple[str, ...] = ()


DEMO_ASPECTS = (
    AspectTemplates(
        "Seating",
        ("seat", "legroom", "recline", "cushion", "row", "armrest", "headrest"),
        ("The {n1} was {p} and the {n2} was {p2}.", "I loved the {p} {n1} and the {n2}.",
         "Really {p} {n1}, the {n2} was {p2} too!"),
        ("The {n1} was cramped and the {n2} was {ng}.", "The {n1} was not {p} at all and the {n2} was broken.",
         "Very {ng} {n1}, the {n2} would not recline!!"),
        ("Our {n1} was in the {n2} near the wing.",),
    ),
    AspectTemplates(
        "On-time Performance",
        ("delay", "departure", "arrival", "schedule", "timetable", "takeoff", "landing"),
        ("The {n1} was on time and the {n2} was {p}.", "A {p} {n1}, we landed early and the {n2} was punctual.",
         "Punctual {n1} and {p} {n2}!"),
        ("The {n1} was late and we had to wait {k} hours for the connecting flight.",
         "Our incoming flight was delayed so we had to wait for the connecting flight to {c1}.",
         "The {n1} was {ng}, the {n2} was delayed by {k} hours!"),
        ("The {n1} was scheduled for the morning and the {n2} for the evening.",),
    ),
    AspectTemplates(
        "Food and Beverage",
        ("food", "meal", "drinks", "snack", "coffee", "menu", "wine"),
        ("The {n1} was {p} and the {n2} was {p2}.", "Tasty {n1} and {p} {n2}.", "The {n1} was delicious!"),
        ("The {n1} was cold and the {n2} was {ng}.", "The {n1} was bland and the {n2} was {ng2}.",
         "The {r} was stale."),
        ("They served a {n1} with {n2} after takeoff.",),
        rare=("burger", "sandwich", "noodles", "croissant"),
    ),
    AspectTemplates(
        "Cabin Staff",
        ("staff", "crew", "attendants", "stewards", "purser", "captain", "hostess"),
        ("The {n1} were {p} and the {n2} was {p2}.", "Friendly {n1} and {p} {n2}!", "The {n1} were helpful and {p}."),
        ("The {n1} were rude and the {n2} was {ng}.", "The {n1} ignored us and the {n2} was {ng2}.",
         "Unhelpful {n1}, {ng} {n2}!!"),
        ("The {n1} handed out forms before landing.",),
    ),
    AspectTemplates(
        "Baggage",
        ("baggage", "luggage", "bag", "suitcase", "carousel", "belt", "trolley"),
        ("Our {n1} arrived quickly and the {n2} was {p}.", "The {n1} service was {p} and the {n2} was fast.",
         "{P} {n1} handling!"),
        ("The {n1} was lost and the {n2} was {ng}.", "My {n1} was damaged and the {n2} took forever.",
         "They lost my {n1}, {ng} {n2}!!"),
        ("We collected the {n1} from the {n2}.",),
    ),
    AspectTemplates(
        "Entertainment",
        ("entertainment", "movies", "screen", "films", "headphones", "wifi", "music"),
        ("The {n1} was {p} with plenty of {n2}.", "Great {n1} and {p} {n2}!", "The {n1} had {p} {n2}."),
        ("The {n1} was broken and the {n2} was {ng}.", "No {n1} and {ng} {n2}.", "The {n1} kept freezing, {ng} {n2}!!"),
        ("The {n1} had a selection of {n2}.",),
    ),
)

OBJECTIVE_SENTENCES = (
    "We flew from {c1} to {c2} in {m}.", "This was my {o} trip with them.",
    "I booked the ticket {o} weeks ago for {c1}.", "We travelled to {c1} as a family of {k}.",
    "It was a business trip to {c2} in {m}.", "The trip to {c1} was part of a holiday package.",
)
CITIES = ("Boston", "Denver", "Chicago", "Dallas", "Miami", "Seattle", "Atlanta", "Phoenix", "Houston",
          "Portland", "Orlando", "Detroit", "Austin", "Nashville", "Tampa", "Raleigh", "Omaha", "Tucson")
MONTHS = ("January", "February", "March", "April", "May", "June", "July", "August",
          "September", "October", "November", "December")
ORDINALS = ("first", "second", "third", "fourth", "fifth")
NUMBERS = ("two", "three", "four", "five", "six")

# P(positive) per aspect; None means the entity does not offer the aspect
DEMO_PROFILES: dict[str, dict[str, float | None]] = {
    "target": {"Seating": 0.25, "On-time Performance": 0.2, "Food and Beverage": 0.55,
               "Cabin Staff": 0.75, "Baggage": 0.5, "Entertainment": 0.85},
    "fsc1": {"Seating": 0.65, "On-time Performance": 0.6, "Food and Beverage": 0.7,
             "Cabin Staff": 0.6, "Baggage": 0.55, "Entertainment": 0.6},
    "fsc2": {"Seating": 0.55, "On-time Performance": 0.8, "Food and Beverage": 0.45,
             "Cabin Staff": 0.7, "Baggage": 0.65, "Entertainment": 0.45},
    "lcc1": {"Seating": 0.3, "On-time Performance": 0.65, "Food and Beverage": 0.25,
             "Cabin Staff": 0.55, "Baggage": 0.4, "Entertainment": None},
    "lcc2": {"Seating": 0.35, "On-time Performance": 0.5, "Food and Beverage": 0.3,
             "Cabin Staff": 0.65, "Baggage": 0.35, "Entertainment": None},
}

NEUTRAL_SHARE = 0.1
OBJECTIVE_SHARE = 0.12
RARE_SHARE = 0.08


@dataclass(frozen=True)
class DemoSentence:
    text: str
    aspect: str       # aspect label or "Null"
    sentiment: str    # "Positive", "Neutral" or "Negative"


@dataclass(frozen=True)
class DemoReview:
    review_id: str
    entity_id: str
    date: str
    rating: int
    sentences: tuple[DemoSentence, ...]

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)


def _fill(template: str, asp: AspectTemplates | None, rng: np.random.Generator) -> str:
    """Fill every slot a template may use; unused slots still consume draws."""
    c1, c2 = rng.choice(len(CITIES), size=2, replace=False)
    slots = {
        "c1": CITIES[c1], "c2": CITIES[c2], "m": MONTHS[rng.integers(len(MONTHS))],
        "o": ORDINALS[rng.integers(len(ORDINALS))], "k": NUMBERS[rng.integers(len(NUMBERS))],
    }
    if asp is not None:
        n1, n2 = rng.choice(len(asp.nouns), size=2, replace=False)
        p1, p2 = rng.choice(len(POSITIVE_WORDS), size=2, replace=False)
        g1, g2 = rng.choice(len(NEGATIVE_WORDS), size=2, replace=False)
        slots.update(
            n1=asp.nouns[n1], n2=asp.nouns[n2],
            p=POSITIVE_WORDS[p1], p2=POSITIVE_WORDS[p2], P=POSITIVE_WORDS[p1].capitalize(),
            ng=NEGATIVE_WORDS[g1], ng2=NEGATIVE_WORDS[g2],
            r=asp.rare[rng.integers(len(asp.rare))] if asp.rare else "",
        )
    text = template.format(**slots)
    return text[0].upper() + text[1:]


def demo_sentence(entity: str, rng: np.random.Generator) -> DemoSentence:
    if rng.random() < OBJECTIVE_SHARE:
        template = OBJECTIVE_SENTENCES[rng.integers(len(OBJECTIVE_SENTENCES))]
        return DemoSentence(_fill(template, None, rng), "Null", "Neutral")
    profile = DEMO_PROFILES[entity]
    offered = [a for a in DEMO_ASPECTS if profile[a.label] is not None]
    asp = offered[rng.integers(len(offered))]
    u = rng.random()
    if u < NEUTRAL_SHARE:
        pool, sentiment = asp.neutral, "Neutral"
    elif u < NEUTRAL_SHARE + (1 - NEUTRAL_SHARE) * profile[asp.label]:
        pool, sentiment = asp.positive, "Positive"
    else:
        pool, sentiment = asp.negative, "Negative"
    templates = [t for t in pool if "{r}" not in t]
    rare = [t for t in pool if "{r}" in t]
    if rare and rng.random() < RARE_SHARE * len(pool):
        template = rare[rng.integers(len(rare))]
    else:
        template = templates[rng.integers(len(templates))]
    return DemoSentence(_fill(template, asp, rng), asp.label, sentiment)


def demo_reviews(n_per_entity: int = 100, seed: int = 0) -> list[DemoReview]:
    """Short multi-sentence reviews for five carriers with known labels per sentence."""
    rng = np.random.default_rng(seed)
    reviews = []
    for entity in DEMO_PROFILES:
        for i in range(n_per_entity):
            sentences = tuple(demo_sentence(entity, rng) for _ in range(int(rng.integers(3, 6))))
            day = int(rng.integers(1, 29))
            month = int(rng.integers(1, 13))
            pos = sum(s.sentiment == "Positive" for s in sentences)
            neg = sum(s.sentiment == "Negative" for s in sentences)
            rating = int(np.clip(3 + pos - neg, 1, 5))
            reviews.append(DemoReview(f"{entity}-{i:04d}", entity, f"2019-{month:02d}-{day:02d}",
                                      rating, sentences))
    return reviews


def write_reviews_csv(reviews: list[DemoReview], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["review_id", "entity_id", "date", "rating", "text"])
        for r in reviews:
            writer.writerow([r.review_id, r.entity_id, r.date, r.rating, r.text])
