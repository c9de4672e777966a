"""Suffix Tree Clustering of review texts.

Documents are lists of sentences, each a list of stemmed tokens. A
word-level generalized suffix tree over all sentences yields base
clusters (phrases shared by at least two documents); base clusters whose
document sets overlap strongly in both directions are merged, and the
connected components become the topics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

import snowballstemmer

from .data import Dataset

MAX_PHRASE_LEN = 6
TOP_K = 500
OVERLAP = 0.5

_SENTENCE_END = re.compile(r"[.!?]+|\n\s*\n")
_WORD = re.compile(r"[a-z0-9]+")


def _load_stopwords() -> frozenset[str]:
    text = resources.files("travelsat").joinpath("resources", "stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


STOPWORDS = _load_stopwords()
_stemmer = snowballstemmer.stemmer("porter")


@lru_cache(maxsize=65536)
def stem(word: str) -> str:
    # Porter is not idempotent on every word; iterate to a fixed point so
    # preprocessing its own output changes nothing.
    for _ in range(10):
        nxt = _stemmer.stemWord(word)
        if nxt == word:
            break
        word = nxt
    return word


def preprocess(text: str) -> list[list[str]]:
    sentences = []
    for chunk in _SENTENCE_END.split(text.lower()):
        tokens = []
        for w in _WORD.findall(chunk):
            if w in STOPWORDS:
                continue
            s = stem(w)
            if s and s not in STOPWORDS:
                tokens.append(s)
        if tokens:
            sentences.append(tokens)
    return sentences


def length_weight(n_words: int) -> float:
    """0.5 for single words, rising by 0.1 per word to 1.0 at six words."""
    return min(1.0, 0.5 + 0.1 * (n_words - 1))


@dataclass(frozen=True)
class BaseCluster:
    phrase: tuple[str, ...]
    docs: frozenset[int]
    score: float

    @property
    def label(self) -> str:
        return " ".join(self.phrase)


@dataclass(frozen=True)
class Cluster:
    label: tuple[str, ...]
    docs: frozenset[int]
    score: float
    members: tuple[BaseCluster, ...] = ()

    @property
    def size(self) -> int:
        return len(self.docs)


@dataclass(frozen=True)
class ClusterSet:
    polarity: str
    clusters: tuple[Cluster, ...]

    def to_dict(self, sample: int = 5) -> dict:
        return {
            "polarity": self.polarity,
            "clusters": [
                {
                    "label": " ".join(c.label),
                    "size": c.size,
                    "score": c.score,
                    "sample_doc_ids": sorted(c.docs)[:sample],
                }
                for c in self.clusters
            ],
        }


class _Node:
    __slots__ = ("children", "docs")

    def __init__(self):
        # first token -> (edge label, child)
        self.children: dict = {}
        self.docs: set[int] = set()


class SuffixTree:
    """Generalized word-level suffix tree, built by naive suffix insertion.

    Suffixes are truncated to ``max_len`` words and every inserted suffix
    ends in its own unique terminator, so two suffixes never share a leaf.
    """

    def __init__(self, max_len: int = MAX_PHRASE_LEN):
        self.max_len = max_len
        self.root = _Node()

    def add_sentence(self, doc: int, sent: int, tokens: Sequence[str]) -> None:
        for start in range(len(tokens)):
            suffix = (*tokens[start:start + self.max_len], ("$", doc, sent, start))
            self._insert(suffix, doc)

    def _insert(self, suffix: tuple, doc: int) -> None:
        node, i = self.root, 0
        while i < len(suffix):
            entry = node.children.get(suffix[i])
            if entry is None:
                leaf = _Node()
                leaf.docs.add(doc)
                node.children[suffix[i]] = (suffix[i:], leaf)
                return
            edge, child = entry
            k = 0
            while k < len(edge) and i + k < len(suffix) and edge[k] == suffix[i + k]:
                k += 1
            if k < len(edge):
                mid = _Node()
                mid.docs = set(child.docs)
                mid.children[edge[k]] = (edge[k:], child)
                node.children[suffix[i]] = (edge[:k], mid)
                child = mid
            child.docs.add(doc)
            node, i = child, i + k

    def internal_nodes(self):
        """Yield (phrase, docs) for every internal node below the root."""
        stack = [((), self.root)]
        while stack:
            phrase, node = stack.pop()
            for edge, child in node.children.values():
                if child.children:
                    p = phrase + edge
                    yield p, child.docs
                    stack.append((p, child))


def base_clusters(docs: Sequence[Sequence[Sequence[str]]], max_phrase_len: int = MAX_PHRASE_LEN,
                  top_k: int = TOP_K) -> list[BaseCluster]:
    """Base clusters from every suffix-tree node shared by two or more documents."""
    if len(docs) < 2:
        return []
    tree = SuffixTree(max_phrase_len)
    for d, sentences in enumerate(docs):
        for s, tokens in enumerate(sentences):
            tree.add_sentence(d, s, tokens)
    out = [
        BaseCluster(phrase, frozenset(members), len(members) * length_weight(len(phrase)))
        for phrase, members in tree.internal_nodes()
        if len(members) >= 2
    ]
    out.sort(key=lambda b: (-b.score, b.phrase))
    return out[:top_k]


def _similar(a: BaseCluster, b: BaseCluster, threshold: float) -> bool:
    common = len(a.docs & b.docs)
    return common / len(a.docs) > threshold and common / len(b.docs) > threshold


def merge(bases: Sequence[BaseCluster], overlap_threshold: float = OVERLAP) -> list[Cluster]:
    """Connected components of the mutual-overlap graph, best first."""
    order = sorted(bases, key=lambda b: (-b.score, b.phrase))
    parent = list(range(len(order)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if _similar(order[i], order[j], overlap_threshold):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[BaseCluster]] = {}
    for i, b in enumerate(order):
        groups.setdefault(find(i), []).append(b)
    clusters = []
    for members in groups.values():
        # members keep the (score desc, phrase) order, so the first is the label
        docs = frozenset().union(*(m.docs for m in members))
        clusters.append(Cluster(members[0].phrase, docs, sum(m.score for m in members), tuple(members)))
    clusters.sort(key=lambda c: (-c.score, c.label))
    return clusters


@dataclass(frozen=True)
class STCParams:
    max_phrase_len: int = MAX_PHRASE_LEN
    top_k: int = TOP_K
    overlap_threshold: float = OVERLAP


def cluster_texts(texts: Sequence[str], ids: Sequence[int], k: int, polarity: str,
                  params: STCParams = STCParams()) -> ClusterSet:
    if k <= 0:
        return ClusterSet(polarity, ())
    docs = [preprocess(t) for t in texts]
    bases = base_clusters(docs, params.max_phrase_len, params.top_k)
    merged = merge(bases, params.overlap_threshold)[:k]
    # translate partition-local doc indices back to caller ids
    relabeled = tuple(
        Cluster(c.label, frozenset(ids[i] for i in c.docs), c.score,
                tuple(BaseCluster(m.phrase, frozenset(ids[i] for i in m.docs), m.score) for m in c.members))
        for c in merged
    )
    return ClusterSet(polarity, relabeled)


def topics_by_polarity(d: Dataset, k: int, params: STCParams = STCParams()) -> tuple[ClusterSet, ClusterSet]:
    """Top-k topics among recommending and among non-recommending reviews.

    Document ids in the result are record positions within ``d``.
    """
    pos = [(i, r.text) for i, r in enumerate(d.records) if r.recommended is True]
    neg = [(i, r.text) for i, r in enumerate(d.records) if r.recommended is False]
    out = []
    for polarity, part in (("positive", pos), ("negative", neg)):
        ids = [i for i, _ in part]
        texts = [t for _, t in part]
        out.append(cluster_texts(texts, ids, k, polarity, params))
    return out[0], out[1]


def format_table(cs: ClusterSet) -> str:
    lines = [f"{cs.polarity} topics", f"{'rank':>4}  {'size':>5}  {'score':>8}  label"]
    for i, c in enumerate(cs.clusters, 1):
        lines.append(f"{i:>4}  {c.size:>5}  {c.score:>8.2f}  {' '.join(c.label)}")
    return "\n".join(lines)
