"""Incremental Hoeffding tree (VFDT) for a binary label over discrete attributes.

Every attribute is discrete: nominal ratings keep their values, numeric
inputs such as sentiment are binned, and a missing value is routed to an
explicit ``absent`` branch. Leaves hold class counts plus a per-attribute
contingency table, which is all the split test needs.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

ABSENT = "absent"
FORMAT_NAME = "travelsat.hoeffding-tree"
FORMAT_VERSION = 1

NEG, POS = 0, 1
# gains below this are rounding noise, not information
GAIN_EPS = 1e-12


def hoeffding_bound(split_range: float, delta: float, n: int) -> float:
    """sqrt(R^2 ln(1/delta) / 2n): the deviation the observed mean may have
    from the true mean with probability 1 - delta after n observations."""
    if not split_range > 0:
        raise ValueError(f"range must be positive, got {split_range}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return math.sqrt(split_range * split_range * math.log(1.0 / delta) / (2.0 * n))


def entropy(counts: Sequence[int]) -> float:
    n = sum(counts)
    if n == 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c:
            p = c / n
            h -= p * math.log2(p)
    return h


@dataclass(frozen=True)
class AttributeSpec:
    """A discrete attribute: nominal ``values`` or numeric bin ``edges``.

    Nominal attributes always include :data:`ABSENT` among their values;
    numeric attributes get one extra trailing branch for absent inputs.
    """

    name: str
    values: tuple = ()
    edges: tuple[float, ...] = ()
    _index: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if bool(self.values) == bool(self.edges):
            raise ValueError(f"{self.name}: give exactly one of values or edges")
        if self.values:
            if len(set(self.values)) != len(self.values):
                raise ValueError(f"{self.name}: duplicate nominal values")
            if ABSENT not in self.values:
                object.__setattr__(self, "values", (*self.values, ABSENT))
            self._index.update({v: i for i, v in enumerate(self.values)})
        else:
            if len(self.edges) < 2 or any(b <= a for a, b in zip(self.edges, self.edges[1:])):
                raise ValueError(f"{self.name}: bin edges must be strictly increasing")

    @property
    def kind(self) -> str:
        return "nominal" if self.values else "numeric"

    @property
    def n_branches(self) -> int:
        return len(self.values) if self.values else len(self.edges)

    def branch(self, value) -> int:
        if self.values:
            key = ABSENT if value is None else value
            try:
                return self._index[key]
            except (KeyError, TypeError):
                raise ValueError(f"{self.name}: value {value!r} not in {self.values}") from None
        if value is None:
            return len(self.edges) - 1  # trailing absent branch
        i = bisect.bisect_right(self.edges, value) - 1
        return min(max(i, 0), len(self.edges) - 2)

    def branch_label(self, i: int) -> str:
        if self.values:
            return str(self.values[i])
        if i == len(self.edges) - 1:
            return ABSENT
        return f"[{self.edges[i]:g}, {self.edges[i + 1]:g})"

    def to_dict(self) -> dict:
        if self.values:
            return {"name": self.name, "values": list(self.values)}
        return {"name": self.name, "edges": list(self.edges)}

    @classmethod
    def from_dict(cls, obj: Mapping) -> "AttributeSpec":
        if "values" in obj:
            return cls(obj["name"], values=tuple(obj["values"]))
        return cls(obj["name"], edges=tuple(obj["edges"]))


def nominal(name: str, lo: int, hi: int) -> AttributeSpec:
    return AttributeSpec(name, values=tuple(range(lo, hi + 1)))


def binned(name: str, lo: float = -1.0, hi: float = 1.0, bins: int = 20) -> AttributeSpec:
    width = (hi - lo) / bins
    edges = tuple(lo + i * width for i in range(bins)) + (hi,)
    return AttributeSpec(name, edges=edges)


@dataclass(frozen=True)
class HoeffdingParams:
    delta: float = 1e-7
    tau: float = 0.05
    grace: int = 200
    split_range: float = 1.0  # log2(#classes) for entropy

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.grace < 1:
            raise ValueError("grace must be >= 1")
        if not self.split_range > 0:
            raise ValueError("split_range must be positive")


class LeafStats:
    """Sufficient statistics at one leaf."""

    __slots__ = ("names", "class_counts", "contingency", "n_seen", "n_at_last_check")

    def __init__(self, attributes: Sequence[AttributeSpec]):
        self.names = tuple(a.name for a in attributes)
        self.class_counts = [0, 0]
        self.contingency = [[[0, 0] for _ in range(a.n_branches)] for a in attributes]
        self.n_seen = 0
        self.n_at_last_check = 0

    def update(self, branches: Sequence[int], y: int) -> None:
        self.class_counts[y] += 1
        for table, b in zip(self.contingency, branches):
            table[b][y] += 1
        self.n_seen += 1

    def table(self, attr: str) -> list[list[int]]:
        try:
            return self.contingency[self.names.index(attr)]
        except ValueError:
            raise KeyError(f"unknown attribute {attr!r}") from None


def _gain(class_counts: Sequence[int], table: Sequence[Sequence[int]]) -> float:
    n = class_counts[0] + class_counts[1]
    if n == 0:
        return 0.0
    remainder = 0.0
    for row in table:
        nv = row[0] + row[1]
        if nv:
            remainder += nv / n * entropy(row)
    return entropy(class_counts) - remainder


def info_gain(stats: LeafStats, attr: str) -> float:
    """Information gain (bits) of splitting ``stats`` on ``attr``."""
    if stats.n_seen < 1:
        raise ValueError("info gain needs at least one observation")
    return _gain(stats.class_counts, stats.table(attr))


@dataclass
class Leaf:
    id: int
    stats: LeafStats
    # class counts inherited from the parent's contingency row at split time
    prior: list[int] = field(default_factory=lambda: [0, 0])


@dataclass
class SplitNode:
    id: int
    attribute: int
    children: list


@dataclass(frozen=True)
class SplitEvent:
    node_id: int
    attribute: str
    gain: float
    second_attribute: str | None
    second_gain: float
    epsilon: float
    n: int


@dataclass(frozen=True)
class Prediction:
    recommend: bool
    probability: float

    @property
    def label(self) -> str:
        return "recommend" if self.recommend else "not_recommend"


class ModelFormatError(ValueError):
    """Model file is truncated, not JSON, or missing fields."""


class ModelVersionError(ModelFormatError):
    pass


class HoeffdingTree:
    """VFDT over discrete attributes with Laplace-smoothed majority leaves.

    Training mutates the tree in place and is not thread-safe. Prediction
    only reads and can run concurrently with other predictions.
    """

    def __init__(self, attributes: Sequence[AttributeSpec], params: HoeffdingParams | None = None):
        if not attributes:
            raise ValueError("at least one attribute is required")
        names = [a.name for a in attributes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate attribute names: {names}")
        self.attributes = tuple(attributes)
        self.params = params or HoeffdingParams()
        self.n_trained = 0
        self.splits: list[SplitEvent] = []
        self._next_id = 1
        self.root: Leaf | SplitNode = Leaf(0, LeafStats(self.attributes))

    def encode(self, x: Mapping) -> tuple[int, ...]:
        return tuple(a.branch(x.get(a.name)) for a in self.attributes)

    def _descend(self, branches: Sequence[int]):
        parent, slot, node = None, -1, self.root
        while isinstance(node, SplitNode):
            parent, slot = node, branches[node.attribute]
            node = node.children[slot]
        return node, parent, slot

    def route(self, x: Mapping) -> Leaf:
        return self._descend(self.encode(x))[0]

    def learn_one(self, x: Mapping, y: bool) -> None:
        if y is None:
            raise ValueError("cannot train on a record without a label")
        branches = self.encode(x)
        leaf, parent, slot = self._descend(branches)
        st = leaf.stats
        st.update(branches, POS if y else NEG)
        self.n_trained += 1
        if st.n_seen - st.n_at_last_check >= self.params.grace:
            self._attempt_split(leaf, parent, slot)

    def _attempt_split(self, leaf: Leaf, parent: SplitNode | None, slot: int) -> None:
        st = leaf.stats
        st.n_at_last_check = st.n_seen
        if 0 in st.class_counts:
            return
        ranked = sorted(
            ((_gain(st.class_counts, table), i) for i, table in enumerate(st.contingency)),
            key=lambda gi: (-gi[0], self.attributes[gi[1]].name),
        )
        g1, best = ranked[0]
        # the null split (no split at all) has gain 0
        g2, second = (ranked[1][0], ranked[1][1]) if len(ranked) > 1 else (0.0, None)
        g2 = max(g2, 0.0)
        if g1 <= GAIN_EPS:
            return
        if sum(1 for row in st.contingency[best] if row[0] or row[1]) < 2:
            return
        eps = hoeffding_bound(self.params.split_range, self.params.delta, st.n_seen)
        if not (g1 - g2 > eps or eps < self.params.tau):
            return

        children = []
        for row in st.contingency[best]:
            children.append(Leaf(self._next_id, LeafStats(self.attributes), prior=list(row)))
            self._next_id += 1
        node = SplitNode(leaf.id, best, children)
        if parent is None:
            self.root = node
        else:
            parent.children[slot] = node
        self.splits.append(SplitEvent(
            node_id=leaf.id,
            attribute=self.attributes[best].name,
            gain=g1,
            second_attribute=None if second is None else self.attributes[second].name,
            second_gain=g2,
            epsilon=eps,
            n=st.n_seen,
        ))

    def predict_proba_one(self, x: Mapping) -> float:
        leaf = self.route(x)
        neg = leaf.prior[NEG] + leaf.stats.class_counts[NEG]
        pos = leaf.prior[POS] + leaf.stats.class_counts[POS]
        return (pos + 1) / (pos + neg + 2)

    def predict_one(self, x: Mapping) -> Prediction:
        p = self.predict_proba_one(x)
        return Prediction(p > 0.5, p)

    def nodes(self) -> Iterator[Leaf | SplitNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, SplitNode):
                stack.extend(reversed(node.children))

    def leaves(self) -> list[Leaf]:
        return [n for n in self.nodes() if isinstance(n, Leaf)]

    @property
    def n_nodes(self) -> int:
        return sum(1 for _ in self.nodes())

    @property
    def depth(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(c) for c in node.children)
        return walk(self.root)

    def describe(self) -> str:
        lines = []

        def walk(node, indent, label):
            pad = "  " * indent
            if isinstance(node, Leaf):
                c = node.stats.class_counts
                lines.append(f"{pad}{label}leaf #{node.id} neg={c[0]} pos={c[1]} prior={node.prior}")
            else:
                attr = self.attributes[node.attribute]
                lines.append(f"{pad}{label}split #{node.id} on {attr.name}")
                for i, child in enumerate(node.children):
                    walk(child, indent + 1, f"{attr.name}={attr.branch_label(i)}: ")
        walk(self.root, 0, "")
        return "\n".join(lines)

    # serialization

    def to_dict(self) -> dict:
        nodes = []
        for node in self.nodes():
            if isinstance(node, Leaf):
                st = node.stats
                nodes.append({
                    "id": node.id,
                    "type": "leaf",
                    "prior": list(node.prior),
                    "class_counts": list(st.class_counts),
                    "contingency": [[list(row) for row in t] for t in st.contingency],
                    "n_seen": st.n_seen,
                    "n_at_last_check": st.n_at_last_check,
                })
            else:
                nodes.append({
                    "id": node.id,
                    "type": "split",
                    "attribute": node.attribute,
                    "children": [c.id for c in node.children],
                })
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "params": asdict(self.params),
            "attributes": [a.to_dict() for a in self.attributes],
            "n_trained": self.n_trained,
            "next_id": self._next_id,
            "root": self.root.id,
            "nodes": nodes,
            "splits": [asdict(s) for s in self.splits],
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "HoeffdingTree":
        if not isinstance(obj, Mapping) or obj.get("format") != FORMAT_NAME:
            raise ModelFormatError("not a Hoeffding tree model document")
        if obj.get("version") != FORMAT_VERSION:
            raise ModelVersionError(
                f"model format version {obj.get('version')!r}, expected {FORMAT_VERSION}")
        try:
            attrs = [AttributeSpec.from_dict(a) for a in obj["attributes"]]
            tree = cls(attrs, HoeffdingParams(**obj["params"]))
            tree.n_trained = int(obj["n_trained"])
            tree._next_id = int(obj["next_id"])
            tree.splits = [SplitEvent(**s) for s in obj["splits"]]
            by_id = {n["id"]: n for n in obj["nodes"]}

            def build(node_id):
                raw = by_id[node_id]
                if raw["type"] == "leaf":
                    st = LeafStats(attrs)
                    st.class_counts = [int(c) for c in raw["class_counts"]]
                    st.contingency = [[[int(a), int(b)] for a, b in t] for t in raw["contingency"]]
                    if [len(t) for t in st.contingency] != [a.n_branches for a in attrs]:
                        raise ModelFormatError(f"leaf {node_id}: contingency shape mismatch")
                    st.n_seen = int(raw["n_seen"])
                    st.n_at_last_check = int(raw["n_at_last_check"])
                    return Leaf(node_id, st, [int(c) for c in raw["prior"]])
                if raw["type"] != "split":
                    raise ModelFormatError(f"node {node_id}: unknown type {raw['type']!r}")
                attr = int(raw["attribute"])
                if len(raw["children"]) != attrs[attr].n_branches:
                    raise ModelFormatError(f"node {node_id}: wrong number of children")
                return SplitNode(node_id, attr, [build(c) for c in raw["children"]])

            tree.root = build(obj["root"])
        except ModelFormatError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ModelFormatError(f"corrupt model document: {exc!r}") from exc
        return tree

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: "str | Path") -> "HoeffdingTree":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ModelFormatError(f"{path}: corrupt model file: {exc}") from exc
        return cls.from_dict(obj)
