"""Exit criteria, one or more tests each, reported per criterion in the terminal summary."""

import filecmp
import json
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from reviewintel import aspects as asp
from reviewintel import insights as ins
from reviewintel import sentiment as sen
from reviewintel.aspects import CustomWordList, decide_ensemble, tie_rng
from reviewintel.config import load_config
from reviewintel.corpus import DEFAULT_STOPWORDS, load_corpus
from reviewintel.evaluation import consistency_check, evaluate, f1_score, load_published_tables, read_annotations
from reviewintel.pipeline import run_pipeline
from reviewintel.synthetic import generate_lda_corpus, greedy_alignment, labeled_sentences, recovery_error
from reviewintel.topic_models import coherence, fit, infer_theta
from reviewintel.topic_models.base import FittedTopicModel, ModelConfig
from reviewintel.topic_models.lda_gibbs import GibbsSampler
from reviewintel.topic_models.plsa import responsibilities

ALGS = ("plsa_em", "lda_vi", "lda_gs")


# 1 -------------------------------------------------------------------------

@pytest.mark.acceptance(1)
def test_published_tables_f1_consistent(detail):
    start = time.perf_counter()
    rows = load_published_tables()
    checked = consistency_check(rows)
    elapsed = time.perf_counter() - start

    tables = Counter(r.table for r in rows)
    assert tables == {"aspect": 48, "sentiment": 12}
    # second route: the harmonic mean written out inline
    for r in rows:
        assert abs(2 * r.precision * r.recall / (r.precision + r.recall) - r.f1) <= 0.01 + 1e-12
    assert all(c.ok for c in checked)
    worst = max(abs(c.computed_f1 - c.row.f1) for c in checked)
    assert elapsed < 1.0
    detail(f"{len(rows)} rows, worst |dF1| {worst:.4f}, {elapsed * 1000:.0f} ms")


@pytest.mark.acceptance(1)
@pytest.mark.parametrize("table,method,label,r,p,f", [
    ("aspect", "EA-TM", "Baggage Services", 0.71, 0.95, 0.81),
    ("sentiment", "E-SA", "Positive", 0.88, 0.93, 0.90),
    ("sentiment", "SentiStrength", "Neutral", 0.84, 0.40, 0.54),
    ("aspect", "pLSA", "Rewards Program", 0.41, 0.79, 0.53),
])
def test_published_rows_present(table, method, label, r, p, f):
    rows = {(x.table, x.method, x.label): x for x in load_published_tables()}
    row = rows[(table, method, label)]
    assert (row.recall, row.precision, row.f1) == (r, p, f)
    assert abs(f1_score(p, r) - f) <= 0.01


# 2, 3 ----------------------------------------------------------------------

def _monotone_sweep(algorithm: str):
    worst, fits = 0.0, 0
    start = time.perf_counter()
    for seed in range(100):
        _, matrix = oracles.random_matrix(seed, n_docs=50, n_terms=200)
        model = fit(matrix, ModelConfig(algorithm, k=5, seed=seed, max_iterations=200))
        steps = np.diff(model.objective_trace)
        if steps.size:
            worst = min(worst, float(steps.min()))
        assert np.all(steps >= -1e-8), f"seed {seed}: objective fell by {-steps.min():.3g}"
        fits += 1
    return worst, fits, time.perf_counter() - start


@pytest.mark.acceptance(2)
def test_plsa_log_likelihood_never_decreases(detail):
    worst, fits, elapsed = _monotone_sweep("plsa_em")
    assert fits == 100
    assert elapsed < 30
    detail(f"largest drop {-worst:.2e}, {elapsed:.1f} s")


@pytest.mark.acceptance(2)
def test_plsa_trace_matches_token_level_oracle():
    docs, matrix = oracles.random_matrix(7, n_docs=50, n_terms=200)
    model = fit(matrix, ModelConfig("plsa_em", k=5, seed=7, max_iterations=50, tolerance=1e-12))
    # the last trace entry is the likelihood of the returned parameters
    assert abs(model.objective_trace[-1] - oracles.mixture_log_likelihood(model.phi, model.theta, docs)) < 1e-8


@pytest.mark.acceptance(3)
def test_vi_elbo_never_decreases(detail):
    worst, fits, elapsed = _monotone_sweep("lda_vi")
    assert fits == 100
    assert elapsed < 60
    detail(f"largest drop {-worst:.2e}, {elapsed:.1f} s")


# 4 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def recovery_corpus():
    return generate_lda_corpus(k=3, n_terms=60, n_docs=500, mean_length=50, alpha=0.1, seed=11)


@pytest.mark.acceptance(4)
@pytest.mark.parametrize("algorithm,bound", [("lda_gs", 0.15), ("lda_vi", 0.15), ("plsa_em", 0.20)])
def test_synthetic_topic_recovery(recovery_corpus, algorithm, bound, detail):
    start = time.perf_counter()
    model = fit(recovery_corpus.matrix(), ModelConfig(algorithm, k=3, alpha=0.1, beta=0.01, seed=3))
    elapsed = time.perf_counter() - start
    error = recovery_error(model.phi, recovery_corpus.phi)
    assert error <= bound
    assert elapsed < 60
    detail(f"{algorithm} TV {error:.3f} in {elapsed:.1f} s")


# 5 -------------------------------------------------------------------------

def _model_with_phi(phi, terms):
    k = phi.shape[0]
    return FittedTopicModel("plsa_em", phi, np.full((1, k), 1.0 / k), [], ModelConfig("plsa_em", k=k), terms)


@pytest.mark.acceptance(5)
def test_coherence_matches_pair_count_oracle(detail):
    start = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n_docs = int(rng.integers(5, 51))
        docs, matrix = oracles.random_matrix(seed, n_docs=n_docs, n_terms=30, min_len=2, max_len=12)
        phi = rng.dirichlet(np.ones(30), size=4)
        for n_top in (2, 5, 10):
            for eps in (1.0, 0.5):
                got = coherence(_model_with_phi(phi, matrix.terms), matrix, n_top, eps).per_topic
                want = oracles.coherence_oracle(docs, phi.tolist(), n_top, eps)
                diff = max(abs(a - b) for a, b in zip(got, want))
                worst = max(worst, diff)
                assert diff <= 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 5
    detail(f"worst diff {worst:.1e}, {elapsed:.2f} s")


# 6 -------------------------------------------------------------------------

def _probs(*values):
    return np.array(values, dtype=float)


FOOD, SEAT, DELAY, STAFF = 0, 1, 2, 3
WORDLISTS = [
    CustomWordList(FOOD, frozenset({"food", "meal", "burger"})),
    CustomWordList(SEAT, frozenset({"seat", "legroom"})),
    CustomWordList(DELAY, frozenset({"delay", "late"})),
    CustomWordList(STAFF, frozenset({"crew", "staff"})),
]


def _algorithm1_cases():
    six = lambda hot: _probs(*[0.5 if i == hot else 0.1 for i in range(6)])
    return [
        # (member probabilities, oov flags, tokens, gamma, expected aspect, expected branch)
        ([six(3), six(3), six(5)], [False] * 3, ["x"], 0.7, 3, "mode"),
        ([six(3), six(3), six(5)], [False] * 3, ["x"], 0.05, 3, "mode"),
        ([_probs(0.05, 0.60, 0.20, 0.15), _probs(0.03, 0.02, 0.91, 0.04), _probs(0.10, 0.10, 0.10, 0.70)],
         [False] * 3, ["x"], 0.7, DELAY, "threshold"),
        ([_probs(0.2, 0.5, 0.2, 0.1), _probs(0.3, 0.2, 0.4, 0.1), _probs(0.1, 0.2, 0.1, 0.6)],
         [False] * 3, ["burger", "stale"], 0.7, FOOD, "wordlist"),
        ([_probs(0.2, 0.5, 0.2, 0.1), _probs(0.3, 0.2, 0.4, 0.1), _probs(0.1, 0.2, 0.1, 0.6)],
         [False] * 3, ["stale", "awful"], 0.7, None, "null"),
        # every member out of vocabulary: straight to the word lists
        ([_probs(0.25, 0.25, 0.25, 0.25)] * 3, [True] * 3, ["crew", "crew", "late"], 0.7, STAFF, "wordlist"),
        ([_probs(0.25, 0.25, 0.25, 0.25)] * 3, [True] * 3, [], 0.7, None, "null"),
    ]


@pytest.mark.acceptance(6)
def test_algorithm1_each_branch(detail):
    taken = Counter()
    for probs, oov, tokens, gamma, aspect, branch in _algorithm1_cases():
        decision = decide_ensemble(probs, oov, tokens, WORDLISTS, gamma, tie_rng(0, " ".join(tokens)))
        assert (decision.aspect, decision.branch) == (aspect, branch)
        taken[decision.branch] += 1
    assert set(taken) == set(asp.BRANCHES)
    detail(", ".join(f"{b}={taken[b]}" for b in asp.BRANCHES))


@pytest.mark.acceptance(6)
def test_algorithm1_wordlist_tie_is_seeded():
    probs = [_probs(0.2, 0.5, 0.2, 0.1), _probs(0.3, 0.2, 0.4, 0.1), _probs(0.1, 0.2, 0.1, 0.6)]
    tokens = ["food", "seat"]
    picks = {decide_ensemble(probs, [False] * 3, tokens, WORDLISTS, 0.7, tie_rng(seed, "s1")).aspect
             for seed in range(40)}
    assert picks == {FOOD, SEAT}
    again = [decide_ensemble(probs, [False] * 3, tokens, WORDLISTS, 0.7, tie_rng(5, "s1")) for _ in range(5)]
    assert len(set(again)) == 1 and again[0].branch == "wordlist"


@pytest.mark.acceptance(6)
def test_algorithm1_through_fitted_models():
    # three hand-built pLSA models over a four-word vocabulary, one word per topic
    terms = ["meal", "seat", "delay", "crew"]
    phi = np.full((4, 4), 0.01) + np.eye(4) * 0.96
    phi /= phi.sum(axis=1, keepdims=True)
    models = {f"m{i}": FittedTopicModel("plsa_em", phi.copy(), np.full((1, 4), 0.25), [],
                                        ModelConfig("plsa_em", k=4), terms) for i in range(3)}
    merge = {(m, t): ["Food", "Seating", "Delay", "Staff"][t] for m in models for t in range(4)}
    catalog = asp.build_catalog(models, merge, prevalence_floor=0.0)
    lists = asp.build_custom_wordlists(catalog, {}, stemmer="none")
    cfg = asp.EnsembleTopicConfig(0.7)

    d = asp.classify_ensemble(models, ["seat", "seat", "seat"], lists, cfg, catalog)
    assert (catalog.label_of(d.aspect), d.branch) == ("Seating", "mode")
    d = asp.classify_ensemble(models, ["unknown", "words"], lists, cfg, catalog)
    assert (catalog.label_of(d.aspect), d.branch) == ("Null", "null")


# 7 -------------------------------------------------------------------------

P, U, N = sen.Sentiment.POSITIVE, sen.Sentiment.NEUTRAL, sen.Sentiment.NEGATIVE
IDS = ("sum", "scaled", "rule")
UNIT = sen.AnalyzerCalibration(dict.fromkeys(IDS, -1.0), dict.fromkeys(IDS, 1.0))


@pytest.mark.acceptance(7)
@pytest.mark.parametrize("scores,categories,calibration,category,path", [
    ((0.9, 0.4, 0.2), (P, P, P), UNIT, P, "mode"),
    ((-3.0, -0.2, -0.5), (N, N, N), UNIT, N, "mode"),
    ((2.0, 0.3, -0.6), (P, P, N), UNIT, P, "mode"),
    ((0.0, -0.3, 0.01), (U, N, U), UNIT, U, "mode"),
    ((0.40, -0.05, -0.62), (P, U, N), UNIT, N, "tiebreak"),
    ((0.80, -0.05, -0.62), (P, U, N), UNIT, P, "tiebreak"),
    # sum analyzer flat over the corpus: its huge raw score counts as zero
    ((9.0, 0.0, -0.3), (P, U, N),
     sen.AnalyzerCalibration({"sum": 9.0, "scaled": -1.0, "rule": -1.0}, {"sum": 9.0, "scaled": 1.0, "rule": 1.0}),
     N, "tiebreak"),
    # every analyzer flat: all strengths zero, the first analyzer decides
    ((2.0, 0.0, -0.5), (P, U, N),
     sen.AnalyzerCalibration({"sum": 2.0, "scaled": 0.0, "rule": -0.5}, {"sum": 2.0, "scaled": 0.0, "rule": -0.5}),
     P, "tiebreak"),
])
def test_algorithm2_branches(scores, categories, calibration, category, path):
    verdict = sen.decide_sentiment(dict(zip(IDS, scores)), dict(zip(IDS, categories)), calibration)
    assert (verdict.category, verdict.decision_path) == (category, path)


@pytest.mark.acceptance(7)
def test_algorithm2_calibrated_tiebreak_end_to_end():
    # corpus scores {-2, 0, 6} for the sum analyzer: v = 2 normalizes to 0
    cal = sen.calibration_from_scores({"sum": [-2, 0, 6], "scaled": [-1, 1], "rule": [-1, 1]})
    assert cal.normalize("sum", 2) == 0.0
    verdict = sen.decide_sentiment({"sum": 2.0, "scaled": 0.0, "rule": -0.3}, dict(zip(IDS, (P, U, N))), cal)
    assert (verdict.category, verdict.decision_path) == (N, "tiebreak")


@pytest.mark.acceptance(7)
def test_algorithm2_with_real_analyzers(tmp_path):
    lex = sen.SentimentLexicon({"good": 3.0, "slow": -1.0})
    analyzers = [sen.SumAnalyzer(lex), sen.ScaledAnalyzer(lex),
                 sen.RuleAugmentedAnalyzer(lex, sen.Modifiers({"not": -0.74}))]
    cal = sen.calibrate(analyzers, ["good", "not good", "slow slow", "fine"])
    v = sen.classify_sentiment_ensemble("good food", analyzers, cal)
    assert (v.category, v.decision_path) == (P, "mode")
    # only the rule analyzer sees the negation; two of three still say Positive
    v = sen.classify_sentiment_ensemble("not good", analyzers, cal)
    assert v.categories == {"sum": P, "scaled": P, "rule": N}
    assert (v.category, v.decision_path) == (P, "mode")
    # three different opinions: the most extreme calibrated score decides
    v = sen.classify_sentiment_ensemble("not slow", analyzers, cal)
    assert v.categories == {"sum": U, "scaled": N, "rule": P}
    assert (v.category, v.decision_path) == (N, "tiebreak")


# 8 -------------------------------------------------------------------------

def _ensemble_trial(seed: int) -> dict:
    syn = generate_lda_corpus(k=3, n_terms=60, n_docs=500, mean_length=50, alpha=0.1, seed=seed)
    matrix = syn.matrix()
    models = {}
    for algorithm in ALGS:
        cfg = ModelConfig(algorithm, k=3, alpha=0.1, seed=seed, max_iterations=400 if algorithm == "lda_gs" else 300,
                          burn_in=200 if algorithm == "lda_gs" else None)
        models[algorithm] = fit(matrix, cfg)
    merge = {}
    for m, model in models.items():
        for topic, true_topic in greedy_alignment(model.phi, syn.phi).items():
            merge[(m, topic)] = f"a{true_topic}"
    catalog = asp.build_catalog(models, merge, prevalence_floor=0.0)
    lists = asp.build_custom_wordlists(catalog, {}, stemmer="none")

    docs, labels = labeled_sentences(syn.phi, 2000, seed=10_000 + seed)
    correct = Counter()
    unanimous = agree = 0
    for i, (doc, label) in enumerate(zip(docs, labels)):
        tokens = [syn.terms[w] for w in doc]
        truth = catalog.id_of(f"a{label}")
        probs, oovs, nulls = [], [], []
        for m, model in models.items():
            theta, oov = infer_theta(model, tokens)
            probs.append(catalog.project(m, theta))
            oovs.append(oov)
            nulls.append(catalog.null_mass(m, theta))
            correct[m] += asp.decide_single(probs[-1], 0.7, oov, nulls[-1]) == truth
        decision = decide_ensemble(probs, oovs, tokens, lists, 0.7, tie_rng(0, str(i)), nulls)
        correct["ea_tm"] += decision.aspect == truth
        tops = {asp.top_aspect(p, nm) for p, nm in zip(probs, nulls)}
        if len(tops) == 1:
            unanimous += 1
            agree += decision.aspect == tops.pop()
    return {"accuracy": {m: c / len(docs) for m, c in correct.items()}, "unanimous": unanimous, "agree": agree}


@pytest.mark.acceptance(8)
def test_ensemble_not_worse_than_members(detail):
    margins = []
    for seed in range(10):
        result = _ensemble_trial(seed)
        acc = result["accuracy"]
        for m in ALGS:
            assert acc["ea_tm"] >= acc[m] - 0.02, (seed, acc)
        assert result["agree"] == result["unanimous"]
        margins.append(acc["ea_tm"] - max(acc[m] for m in ALGS))
    detail(f"EA-TM minus best member: min {min(margins):+.3f}, mean {np.mean(margins):+.3f}")


# 9 -------------------------------------------------------------------------

sentences_strategy = st.lists(
    st.lists(st.sampled_from(["seat", "delay", "crew", "food", "late", "bag", "wait"]), max_size=8),
    min_size=1, max_size=100)


@pytest.mark.acceptance(9)
def test_bigrams_equal_brute_force(detail):
    checked = []

    @settings(max_examples=50, derandomize=True, deadline=None)
    @given(sentences_strategy, st.sampled_from([0.01, 0.05, 0.15, 0.3, 0.5]))
    def check(sentences, threshold):
        report = ins.frequent_bigrams(sentences, threshold)
        got = [(g.first, g.second, g.count, g.sentences) for g in report.bigrams]
        assert got == oracles.bigram_oracle(sentences, threshold)
        checked.append(len(sentences))

    start = time.perf_counter()
    check()
    elapsed = time.perf_counter() - start
    assert len(checked) >= 50
    assert elapsed < 5
    detail(f"{len(checked)} corpora, {elapsed:.2f} s")


# 10, 11 --------------------------------------------------------------------

COMPARED = ["corpus.json", "catalog.json", "merge_map.draft.tsv", "wordlists.csv", "aspect_labels.jsonl",
            "sentiment.jsonl", "calibration.json", "aos.json", "aos.csv", "bigrams.csv", "matrix.csv",
            "matrix.txt", "evaluation/aspect.csv", "evaluation/aspect.txt", "evaluation/sentiment.csv",
            "evaluation/sentiment.txt", "evaluation/disagreements.csv"] + [f"models/{a}.json" for a in ALGS]


@pytest.fixture(scope="module")
def demo_runs(demo_dir, tmp_path_factory):
    cfg = load_config(demo_dir / "config.json")
    outs = [tmp_path_factory.mktemp("run_a"), tmp_path_factory.mktemp("run_b")]
    start = time.perf_counter()
    for out in outs:
        run_pipeline(cfg, out)
    return cfg, outs, time.perf_counter() - start


@pytest.mark.acceptance(10)
def test_pipeline_twice_is_byte_identical(demo_runs, detail):
    _, (a, b), elapsed = demo_runs
    for name in COMPARED:
        assert (a / name).is_file(), name
        assert filecmp.cmp(a / name, b / name, shallow=False), f"{name} differs between runs"
    assert elapsed < 120
    detail(f"{len(COMPARED)} artifacts identical, two runs in {elapsed:.1f} s")


@pytest.mark.acceptance(11)
def test_invariants_on_demo_run(demo_runs):
    cfg, (out, _), _ = demo_runs
    corpus = load_corpus(out / "corpus.json")

    # corpus: counts conserved, tokens clean, split is a partition
    vocab = set(corpus.vocabulary.terms)
    by_id = corpus.by_id()
    row_sums = corpus.matrix.lengths
    assert corpus.matrix.counts.data.min() >= 1
    for row, sid in enumerate(corpus.matrix.sentence_ids):
        assert row_sums[row] == sum(t in vocab for t in by_id[sid].tokens)
    for s in corpus.sentences:
        assert all(t and t == t.lower() and t not in DEFAULT_STOPWORDS for t in s.tokens)
    hold = set(corpus.holdout_ids)
    learn = {s.sentence_id for s in corpus.learning}
    assert not hold & learn and hold | learn == set(by_id)
    assert len(hold) == cfg.corpus.holdout_count
    assert not hold & set(corpus.matrix.sentence_ids)

    # topic models: row-stochastic, bounded traces, normalized inference
    models = {a: FittedTopicModel.load(out / f"models/{a}.json") for a in ALGS}
    for a, m in models.items():
        for mat in (m.phi, m.theta):
            assert np.all((mat >= 0) & (mat <= 1))
            np.testing.assert_allclose(mat.sum(axis=1), 1.0, atol=1e-6)
        assert len(m.objective_trace) <= m.config.max_iterations
        for s in corpus.holdout[:25]:
            theta = infer_theta(m, s).theta
            assert np.all(np.isfinite(theta)) and abs(theta.sum() - 1) < 1e-6

    # catalog: each retained raw topic in exactly one place, dense ids
    catalog = asp.AspectCatalog.from_dict(json.loads((out / "catalog.json").read_text()))
    assert [a.aspect_id for a in catalog.aspects] == list(range(len(catalog)))
    for a, m in models.items():
        for t in range(m.k):
            places = [(a, t) in catalog.merge_map, (a, t) in catalog.null_topics, (a, t) in catalog.discarded]
            assert sum(places) == 1

    # labels: one per sentence and method, all from the catalog
    labels = asp.read_labels(out / "aspect_labels.jsonl")
    allowed = set(catalog.labels) | {asp.NULL_LABEL}
    assert {r.aspect for r in labels} <= allowed
    assert Counter(r.method for r in labels) == {m: len(corpus.sentences) for m in (*ALGS, "ea_tm")}

    # sentiment: scores in range, calibrated scores in [-1, 1] with both ends attained
    cal = json.loads((out / "calibration.json").read_text())
    calibration = sen.AnalyzerCalibration(cal["minimum"], cal["maximum"])
    records = [json.loads(line) for line in (out / "sentiment.jsonl").read_text().splitlines()]
    assert len(records) == len(corpus.sentences)
    for analyzer in ("scaled", "rule"):
        assert all(-1 <= r["v"][analyzer] <= 1 for r in records)
    for analyzer in cal["minimum"]:
        normalized = [calibration.normalize(analyzer, r["v"][analyzer]) for r in records]
        assert all(-1 - 1e-12 <= x <= 1 + 1e-12 for x in normalized)
        if not calibration.degenerate(analyzer):
            assert min(normalized) == pytest.approx(-1) and max(normalized) == pytest.approx(1)

    # evaluation counts on the held-out annotations
    annotations = read_annotations(cfg.paths.annotations)
    truth = {a.sentence_id: a.true_aspect for a in annotations}
    pred = {r.sentence_id: r.aspect for r in labels if r.method == "ea_tm"}
    report = evaluate(pred, truth, "aspect", catalog.labels + [asp.NULL_LABEL])
    assert sum(c.true_positives for c in report.classes) == sum(pred[s] == t for s, t in truth.items())
    assert sum(c.support for c in report.classes) == len(truth)
    for c in report.classes:
        if c.defined and c.precision is not None:
            assert min(c.precision, c.recall) - 1e-12 <= c.f1 <= max(c.precision, c.recall) + 1e-12

    # AOS totals per entity, proportions sum to one, matches a group-by oracle
    aos = json.loads((out / "aos.json").read_text())
    final = {r.sentence_id: r.aspect for r in labels if r.method == "ea_tm"}
    sentiment_of = {r["sentence_id"]: r["O"] for r in records}
    per_entity = Counter(s.entity_id for s in corpus.sentences)
    expected = oracles.aos_oracle([(s.entity_id, final[s.sentence_id], sentiment_of[s.sentence_id])
                                   for s in corpus.sentences])
    for entry in aos:
        e = entry["entity_id"]
        counts = sum(v["positive"] + v["neutral"] + v["negative"] for v in entry["aspects"].values())
        assert counts + entry["excluded_null"] == per_entity[e] == entry["total_sentences"]
        for aspect, v in entry["aspects"].items():
            assert sum(v["proportions"].values()) == pytest.approx(1.0, abs=1e-9)
            assert expected[e][aspect] == {"Positive": v["positive"], "Neutral": v["neutral"],
                                           "Negative": v["negative"]}
        assert set(expected[e]) == set(entry["aspects"])

    # bigram report: shares in range, above threshold, sorted by count
    import csv
    rows = list(csv.DictReader((out / "bigrams.csv").open()))
    groups = {}
    for r in rows:
        share = float(r["share"])
        assert cfg.insights.bigram_threshold < share <= 1
        groups.setdefault((r["aspect"], r["sentiment"]), []).append(int(r["count"]))
    for counts in groups.values():
        assert counts == sorted(counts, reverse=True)


@pytest.mark.acceptance(11)
def test_invariants_on_synthetic_fits():
    syn = generate_lda_corpus(k=3, n_terms=40, n_docs=120, mean_length=20, seed=2)
    matrix = syn.matrix()
    rows, cols, counts = matrix.nonzeros()

    # Gibbs: count tables conserve the token total after every sweep
    sampler = GibbsSampler(matrix, ModelConfig("lda_gs", k=3, seed=1).resolved())
    for _ in range(30):
        sampler.sweep()
        assert sampler.ndk.sum() == sampler.nkw.sum() == sampler.nk.sum() == sampler.n_tokens
        np.testing.assert_array_equal(sampler.ndk.sum(axis=1), matrix.lengths)
        np.testing.assert_array_equal(sampler.nkw.sum(axis=1), sampler.nk)

    for algorithm in ALGS:
        model = fit(matrix, ModelConfig(algorithm, k=3, seed=4, max_iterations=100))
        for mat in (model.phi, model.theta):
            np.testing.assert_allclose(mat.sum(axis=1), 1.0, atol=1e-6)
            assert np.all((mat >= 0) & (mat <= 1))
        assert len(model.objective_trace) <= 100
        if algorithm == "plsa_em":
            resp = responsibilities(model.phi, model.theta, rows, cols)
            np.testing.assert_allclose(resp.sum(axis=1), 1.0, atol=1e-9)

    # AOS totals and verdict rules on a random labeling
    rng = np.random.default_rng(0)
    records = [ins.OpinionRecord(str(i), f"e{rng.integers(3)}", ["A", "B", "Null"][rng.integers(3)],
                                 sen.Sentiment(int(rng.integers(-1, 2)))) for i in range(300)]
    for e, summary in ins.aggregate_all(records).items():
        assert summary.total == sum(r.entity_id == e for r in records)
        for v in ins.verdicts(summary, 0.1):
            diff = v.positive_share - v.negative_share
            assert v.classification == ("strength" if diff > 0.1 else "weakness" if -diff > 0.1 else "mixed")
