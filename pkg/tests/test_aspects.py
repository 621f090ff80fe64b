import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reviewintel.aspects import (
    NULL_LABEL,
    AspectCatalog,
    AspectClassifier,
    CustomWordList,
    EnsembleTopicConfig,
    LabeledSentence,
    build_catalog,
    build_custom_wordlists,
    classify_single,
    decide_ensemble,
    decide_single,
    draft_merge_map,
    read_labels,
    read_merge_map,
    read_relations,
    tie_rng,
    unique_mode,
    write_labels,
    write_merge_map,
)
from reviewintel.corpus import ReviewSentence
from reviewintel.errors import ValidationError
from reviewintel.topic_models.base import FittedTopicModel, ModelConfig

TERMS = ["food", "meal", "seat", "legroom", "delay", "hour"]


def model(phi, theta=None, algorithm="plsa_em", terms=TERMS, ids=None):
    phi = np.asarray(phi, dtype=float)
    phi = phi / phi.sum(axis=1, keepdims=True)
    k = phi.shape[0]
    theta = np.full((1, k), 1 / k) if theta is None else np.asarray(theta, dtype=float)
    ids = ids or [f"s{i}" for i in range(theta.shape[0])]
    return FittedTopicModel(algorithm, phi, theta, [], ModelConfig(algorithm, k=k).resolved(), list(terms), ids)


# three topics, each owning two words
BLOCKS = [[1, 1, 0, 0, 0, 0], [0, 0, 1, 1, 0, 0], [0, 0, 0, 0, 1, 1]]


# single-model rule ----------------------------------------------------------

def test_confident_single_model():
    assert decide_single(np.array([0.8, 0.1, 0.1]), 0.7) == 0


def test_unconfident_single_model():
    assert decide_single(np.array([0.69, 0.21, 0.10]), 0.7) is None


def test_threshold_is_strict():
    assert decide_single(np.array([0.7, 0.3]), 0.7) is None


def test_zero_scores_give_null():
    assert decide_single(np.zeros(3), 0.7) is None
    assert decide_single(np.array([0.9, 0.1]), 0.7, oov=True) is None


def test_null_mass_outweighs_best_aspect():
    assert decide_single(np.array([0.2, 0.1]), 0.1, null_mass=0.7) is None


def test_classify_single_without_catalog():
    m = model(BLOCKS)
    assert classify_single(m, ["delay", "hour", "delay"], gamma=0.5) == 2
    with pytest.raises(ValidationError):
        classify_single(m, ["delay"], gamma=1.0)


def test_unique_mode():
    assert unique_mode([1, 1, 2]) == (True, 1)
    assert unique_mode([1, 2]) == (False, None)
    assert unique_mode([None, None, 0]) == (True, None)
    assert unique_mode([]) == (False, None)


@settings(max_examples=100)
@given(st.integers(0, 4), st.integers(2, 5), st.integers(0, 2**31))
def test_unanimity_always_wins(winner, n_members, seed):
    rng = np.random.default_rng(seed)
    probs = []
    for _ in range(n_members):
        p = rng.dirichlet(np.ones(5))
        p[winner] = p.max() + rng.uniform(0.01, 1.0)
        probs.append(p / p.sum())
    d = decide_ensemble(probs, [False] * n_members, [], [], 0.99)
    assert d.aspect == winner and d.branch == "mode"


@settings(max_examples=100)
@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3), st.floats(0.05, 0.9), st.floats(0.0, 0.09))
def test_raising_gamma_never_adds_confident_labels(raw, gamma, bump):
    p = np.array(raw) + 1e-9
    p /= p.sum()
    if decide_single(p, gamma + bump) is not None:
        assert decide_single(p, gamma) is not None


# catalog --------------------------------------------------------------------

def test_identity_catalog():
    cat = build_catalog({"plsa_em": model(BLOCKS)}, prevalence_floor=0.0)
    assert cat.labels == ["topic_0", "topic_1", "topic_2"]
    assert cat.merge_map == {("plsa_em", 0): 0, ("plsa_em", 1): 1, ("plsa_em", 2): 2}


def test_catalog_merges_and_projects():
    models = {"a": model(BLOCKS), "b": model(BLOCKS[::-1])}
    mapping = {("a", 0): "food", ("a", 1): "seat", ("a", 2): "delay",
               ("b", 0): "delay", ("b", 1): "seat", ("b", 2): "food"}
    cat = build_catalog(models, mapping, prevalence_floor=0.0)
    assert cat.labels == ["food", "seat", "delay"]
    assert cat.project("b", np.array([0.6, 0.3, 0.1])).tolist() == [0.1, 0.3, 0.6]
    assert cat.aspects[0].keywords["a"][:2] == ("food", "meal")


def test_catalog_discards_rare_topics():
    theta = np.array([[0.999, 0.0005, 0.0005]] * 4)
    cat = build_catalog({"m": model(BLOCKS, theta)}, prevalence_floor=0.001)
    assert cat.discarded == [("m", 1), ("m", 2)] and len(cat) == 1
    # discarded mass simply drops out
    assert cat.project("m", np.array([0.5, 0.3, 0.2])).tolist() == [0.5]


def test_catalog_null_topics():
    mapping = {("m", 0): "food", ("m", 1): NULL_LABEL, ("m", 2): "delay"}
    cat = build_catalog({"m": model(BLOCKS)}, mapping, prevalence_floor=0.0)
    assert cat.null_topics == [("m", 1)]
    assert cat.null_mass("m", np.array([0.2, 0.7, 0.1])) == pytest.approx(0.7)


def test_catalog_errors():
    with pytest.raises(ValidationError, match="unmapped"):
        build_catalog({"m": model(BLOCKS)}, {("m", 0): "food"}, prevalence_floor=0.0)
    with pytest.raises(ValidationError, match="unknown topic"):
        build_catalog({"m": model(BLOCKS)}, {("m", 5): "food"}, prevalence_floor=0.0)
    with pytest.raises(ValidationError, match="different vocabularies"):
        build_catalog({"a": model(BLOCKS), "b": model(BLOCKS, terms=[t + "x" for t in TERMS])})
    with pytest.raises(ValidationError):
        build_catalog({})


def test_catalog_round_trip():
    mapping = {("m", 0): "food", ("m", 1): NULL_LABEL, ("m", 2): "delay"}
    cat = build_catalog({"m": model(BLOCKS)}, mapping, prevalence_floor=0.0)
    assert AspectCatalog.from_dict(cat.to_dict()) == cat
    assert cat.id_of("delay") == 1 and cat.id_of(NULL_LABEL) is None
    with pytest.raises(ValidationError):
        cat.id_of("wifi")


def test_merge_map_file_round_trip(tmp_path):
    mapping = {("lda_gs", 1): "seat", ("lda_gs", 0): "food", ("plsa_em", 3): NULL_LABEL}
    write_merge_map(mapping, tmp_path / "m.tsv")
    assert read_merge_map(tmp_path / "m.tsv") == mapping
    assert (tmp_path / "m.tsv").read_text().splitlines()[0] == "lda_gs\t0\tfood"


@pytest.mark.parametrize("body,match", [
    ("a\t1\n", "3 tab-separated"),
    ("a\tx\tfood\n", "integer"),
    ("a\t1\tfood\na\t1\tseat\n", "mapped twice"),
    ("a\t1\t \n", "invalid aspect label"),
])
def test_merge_map_errors(tmp_path, body, match):
    (tmp_path / "m.tsv").write_text(body)
    with pytest.raises(ValidationError, match=match):
        read_merge_map(tmp_path / "m.tsv")


def test_draft_merge_map():
    draft = draft_merge_map({"m": model(BLOCKS)}, {"Food": ["meals"], "Delay": ["delayed"]})
    assert draft == {("m", 0): "Food", ("m", 1): NULL_LABEL, ("m", 2): "Delay"}


# word lists -----------------------------------------------------------------

def test_relations_expand_keywords(tmp_path):
    (tmp_path / "rel.tsv").write_text("food\thypo\tmeal\nfood\thypo\tsnack\nfood\tsyn\teating\n")
    relations = read_relations(tmp_path / "rel.tsv")
    cat = build_catalog({"m": model(BLOCKS)}, {("m", 0): "food", ("m", 1): "seat", ("m", 2): "delay"},
                        prevalence_floor=0.0, n_keywords=1)
    lists = build_custom_wordlists(cat, relations, n_keywords=1)
    assert lists[0].words == {"food", "meal", "snack", "eat"}
    assert lists[0].uncovered == ()
    assert lists[1].words == {"seat"} and lists[1].uncovered == ("seat",)


def test_empty_relations_keep_keywords():
    cat = build_catalog({"m": model(BLOCKS)}, prevalence_floor=0.0, n_keywords=2)
    lists = build_custom_wordlists(cat, {}, n_keywords=2)
    assert [sorted(wl.words) for wl in lists] == [["food", "meal"], ["legroom", "seat"], ["delay", "hour"]]


def test_relations_file_errors(tmp_path):
    (tmp_path / "r.tsv").write_text("food\tcousin\tmeal\n")
    with pytest.raises(ValidationError, match="unknown relation"):
        read_relations(tmp_path / "r.tsv")


# ensemble rule --------------------------------------------------------------

def test_wordlist_tie_uses_seeded_rng():
    lists = [CustomWordList(0, frozenset({"a"})), CustomWordList(1, frozenset({"b"}))]
    picks = {decide_ensemble([], [], ["a", "b"], lists, 0.7, tie_rng(s, "x")).aspect for s in range(40)}
    assert picks == {0, 1}
    again = decide_ensemble([], [], ["a", "b"], lists, 0.7, tie_rng(3, "x"))
    assert again == decide_ensemble([], [], ["a", "b"], lists, 0.7, tie_rng(3, "x"))


def test_wordlist_counts_repeats():
    lists = [CustomWordList(0, frozenset({"a"})), CustomWordList(1, frozenset({"b"}))]
    d = decide_ensemble([], [], ["a", "b", "b"], lists, 0.7)
    assert (d.aspect, d.branch) == (1, "wordlist")


def test_ensemble_config_validation():
    with pytest.raises(ValidationError):
        EnsembleTopicConfig(gamma=0.0).validate()


# classifier -----------------------------------------------------------------

def _sentence(sid, tokens):
    return ReviewSentence(sid, "r1", "acme", 0, " ".join(tokens), tuple(tokens))


def test_classifier_reuses_training_rows(tmp_path):
    theta = np.array([[0.9, 0.05, 0.05], [0.05, 0.05, 0.9]])
    models = {"a": model(BLOCKS, theta), "b": model(BLOCKS, theta, algorithm="lda_vi")}
    cat = build_catalog(models, prevalence_floor=0.0)
    clf = AspectClassifier(models, cat, build_custom_wordlists(cat, {}))
    assert clf.methods == ["a", "b", "ea_tm"]
    # s0's stored mixture says topic 0 even though its tokens point elsewhere
    out = clf.classify(_sentence("s0", ["delay", "hour"]))
    assert out["ea_tm"].aspect == 0 and out["a"].aspect == 0
    # a sentence not seen in training goes through inference
    out = clf.classify(_sentence("new", ["delay", "hour"]))
    assert out["ea_tm"].aspect == 2

    rows = clf.label_all([_sentence("s1", ["food"]), _sentence("x", ["unknownword"])])
    assert {r.method for r in rows} == {"a", "b", "ea_tm"}
    oov = [r for r in rows if r.sentence_id == "x"]
    assert all(r.aspect == NULL_LABEL for r in oov)
    write_labels(rows, tmp_path / "l.jsonl")
    assert read_labels(tmp_path / "l.jsonl") == rows


def test_single_model_has_no_ensemble():
    m = {"a": model(BLOCKS)}
    cat = build_catalog(m, prevalence_floor=0.0)
    clf = AspectClassifier(m, cat, [])
    assert clf.methods == ["a"] and "ea_tm" not in clf.classify(_sentence("s9", ["food"]))


def test_labeled_sentence_dict():
    row = LabeledSentence("s1", "acme", "Food", "ea_tm", "mode")
    assert row.to_dict() == {"sentence_id": "s1", "entity_id": "acme", "aspect": "Food",
                             "method": "ea_tm", "branch_taken": "mode"}
