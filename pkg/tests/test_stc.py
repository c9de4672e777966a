import random
from collections import defaultdict

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from travelsat.data import Category, Dataset, ReviewRecord
from travelsat.stc import (STOPWORDS, BaseCluster, ClusterSet, base_clusters, format_table,
                           length_weight, merge, preprocess, topics_by_polarity)

from synth import make_dataset


def brute_force_clusters(docs, cap=6):
    """Right-maximal phrases (length <= cap) found in two or more documents.

    A phrase is a suffix-tree node when its occurrences are not all followed
    by the same word; sentence ends and the length cap count as distinct
    followers.
    """
    followers = defaultdict(set)
    members = defaultdict(set)
    for d, sentences in enumerate(docs):
        for s, toks in enumerate(sentences):
            for i in range(len(toks)):
                for n in range(1, min(cap, len(toks) - i) + 1):
                    phrase = tuple(toks[i:i + n])
                    nxt = toks[i + n] if n < cap and i + n < len(toks) else ("end", d, s, i)
                    followers[phrase].add(nxt)
                    members[phrase].add(d)
    return {p: frozenset(m) for p, m in members.items() if len(m) >= 2 and len(followers[p]) >= 2}


def all_shared_phrases(docs, cap=6):
    members = defaultdict(set)
    for d, sentences in enumerate(docs):
        for toks in sentences:
            for i in range(len(toks)):
                for n in range(1, min(cap, len(toks) - i) + 1):
                    members[tuple(toks[i:i + n])].add(d)
    return {p: frozenset(m) for p, m in members.items() if len(m) >= 2}


def contains(sentences, phrase):
    n = len(phrase)
    return any(tuple(t[i:i + n]) == phrase for t in sentences for i in range(len(t) - n + 1))


def random_corpus(rng, n_docs, vocab=8):
    words = [f"w{i}" for i in range(vocab)]
    return [[[rng.choice(words) for _ in range(rng.randint(1, 9))] for _ in range(rng.randint(1, 3))]
            for _ in range(n_docs)]


def test_preprocess_empty():
    assert preprocess("") == []


def test_preprocess_sentences_and_stopwords():
    out = preprocess("The gates were great. Boarding was slow.")
    assert out == [["gate", "great"], ["board", "slow"]]
    assert not {"the", "were", "was"} & {t for s in out for t in s}


def test_preprocess_is_idempotent_on_its_output():
    text = ("Immigration officers were generously helpful! Queues everywhere, "
            "the boarding gates kept changing. Relaxing lounges; agreeable staff.")
    once = preprocess(text)
    assert preprocess(". ".join(" ".join(s) for s in once)) == once
    assert all(t not in STOPWORDS for s in once for t in s)


def test_length_weight():
    assert [length_weight(n) for n in range(1, 8)] == pytest.approx([0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.0])


def test_shared_phrase_two_docs():
    docs = [preprocess("Long boarding time."), preprocess("boarding time was awful")]
    bases = base_clusters(docs)
    by_phrase = {b.phrase: b for b in bases}
    assert by_phrase[("board", "time")].docs == {0, 1}
    assert by_phrase[("board", "time")].score == pytest.approx(2 * 0.6)


def test_no_shared_phrase_and_single_doc():
    assert base_clusters([[["a", "b"]], [["c", "d"]]]) == []
    assert base_clusters([[["a", "b"], ["a", "b"]]]) == []
    assert base_clusters([]) == []


def test_top_k_and_ordering():
    rng = random.Random(2)
    docs = random_corpus(rng, 30)
    bases = base_clusters(docs, top_k=10_000)
    keys = [(-b.score, b.phrase) for b in bases]
    assert keys == sorted(keys)
    assert base_clusters(docs, top_k=5) == bases[:5]


def test_base_clusters_equal_brute_force_small():
    rng = random.Random(0)
    for _ in range(20):
        docs = random_corpus(rng, rng.randint(2, 15))
        got = {b.phrase: b.docs for b in base_clusters(docs, top_k=10**9)}
        assert got == brute_force_clusters(docs)


def test_every_shared_phrase_is_covered_by_a_base_cluster():
    rng = random.Random(1)
    docs = random_corpus(rng, 25)
    got = {b.phrase: b.docs for b in base_clusters(docs, top_k=10**9)}
    for phrase, members in all_shared_phrases(docs).items():
        assert any(p[:len(phrase)] == phrase and m == members for p, m in got.items()), phrase


def test_members_contain_their_phrase():
    rng = random.Random(3)
    docs = random_corpus(rng, 200, vocab=30)
    for b in base_clusters(docs, top_k=10**9):
        assert all(contains(docs[d], b.phrase) for d in b.docs)
        assert sum(contains(s, b.phrase) for s in docs) == len(b.docs)


def _bc(phrase, docs, score=None):
    docs = frozenset(docs)
    return BaseCluster(tuple(phrase.split()), docs, score if score is not None else len(docs) * 0.5)


def test_merge_identical_sets():
    out = merge([_bc("a", {1, 2, 3}), _bc("b c", {1, 2, 3}, 2.0)])
    assert len(out) == 1
    assert out[0].label == ("b", "c") and out[0].docs == {1, 2, 3}
    assert out[0].score == pytest.approx(3.5)


def test_merge_disjoint_sets():
    assert len(merge([_bc("a", {1, 2}), _bc("b", {3, 4})])) == 2


def test_merge_chain_is_one_component():
    a, b, c = _bc("a", {1, 2, 3, 4, 5}), _bc("b", {3, 4, 5, 6, 7}), _bc("c", {5, 6, 7, 8, 9})
    # A~B and B~C share 3 of 5 docs; A and C share only one
    out = merge([a, b, c])
    assert len(out) == 1
    assert out[0].docs == set(range(1, 10))


def test_merge_threshold_is_strict_and_mutual():
    assert len(merge([_bc("a", {1, 2, 3, 4}), _bc("b", {3, 4, 5, 6})])) == 2
    # 2/2 for the small one but 2/10 for the large one
    assert len(merge([_bc("a", {1, 2}), _bc("b", set(range(1, 11)))])) == 2


@settings(max_examples=40, deadline=None)
@given(st.lists(st.frozensets(st.integers(0, 12), min_size=1, max_size=8), min_size=1, max_size=15),
       st.randoms(use_true_random=False))
def test_merge_independent_of_input_order(sets, rnd):
    bases = [BaseCluster((f"p{i}",), s, float(len(s))) for i, s in enumerate(sets)]
    shuffled = list(bases)
    rnd.shuffle(shuffled)
    assert merge(bases) == merge(shuffled)


def test_clusters_invariant_under_document_reordering():
    rng = random.Random(5)
    docs = random_corpus(rng, 20)
    perm = list(range(len(docs)))
    rng.shuffle(perm)
    reordered = [docs[i] for i in perm]
    a = {b.phrase: b.docs for b in base_clusters(docs, top_k=10**9)}
    b = {c.phrase: frozenset(perm[d] for d in c.docs) for c in base_clusters(reordered, top_k=10**9)}
    assert a == b


def _rec(text, rec):
    return ReviewRecord(Category.AIRLINE, None, "e", text, recommended=rec)


def test_topics_all_positive():
    d = Dataset(Category.AIRLINE, tuple(_rec(t, True) for t in ["great crew", "great seats", "crew great"]))
    pos, neg = topics_by_polarity(d, 5)
    assert pos.clusters and neg == ClusterSet("negative", ())


def test_negative_boarding_topic():
    d = make_dataset(Category.AIRPORT, n=120, seed=6)
    pos, neg = topics_by_polarity(d, 5)
    neg_labels = {" ".join(c.label) for c in neg.clusters}
    pos_labels = {" ".join(c.label) for c in pos.clusters}
    assert any("board time" in l for l in neg_labels)
    assert not any("board" in l for l in pos_labels)
    for c in neg.clusters:
        assert all(d.records[i].recommended is False for i in c.docs)
    report = neg.to_dict()
    assert report["polarity"] == "negative"
    assert set(report["clusters"][0]) == {"label", "size", "score", "sample_doc_ids"}
    assert "board" in format_table(neg)


def test_topics_k_zero():
    d = make_dataset(Category.AIRPORT, n=30, seed=6)
    pos, neg = topics_by_polarity(d, 0)
    assert pos.clusters == () and neg.clusters == ()


def test_partition_with_one_doc_is_empty():
    d = Dataset(Category.AIRLINE, (_rec("bad food", False), _rec("good food", True), _rec("good food", True)))
    pos, neg = topics_by_polarity(d, 3)
    assert neg.clusters == () and pos.clusters
