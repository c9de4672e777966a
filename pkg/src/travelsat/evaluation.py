"""Chronological train/test experiments with F1 and ROC-AUC."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .correlation import correlation_matrix, select_features
from .data import SCHEMAS, Category, Dataset, ReviewRecord, sort_chronological
from .hoeffding import AttributeSpec, HoeffdingParams, HoeffdingTree, binned, nominal

logger = logging.getLogger(__name__)

MIN_RECORDS = 5
SENTIMENT_BINS = 20


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[bool, bool]]) -> "Confusion":
        """Tally ``(predicted, actual)`` pairs."""
        tp = fp = tn = fn = 0
        for pred, actual in pairs:
            if pred and actual:
                tp += 1
            elif pred:
                fp += 1
            elif actual:
                fn += 1
            else:
                tn += 1
        return cls(tp, fp, tn, fn)


def _f1(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def f1_per_class(c: Confusion) -> dict[str, float]:
    return {
        "recommend": _f1(c.tp, c.fp, c.fn),
        "not_recommend": _f1(c.tn, c.fn, c.fp),
    }


def f1(c: Confusion) -> float:
    """Support-weighted F1 over both classes."""
    if c.n == 0:
        raise ValueError("F1 needs at least one test record")
    per = f1_per_class(c)
    pos_support = c.tp + c.fn
    neg_support = c.tn + c.fp
    return (pos_support * per["recommend"] + neg_support * per["not_recommend"]) / c.n


def auc(scores: Sequence[tuple[float, bool]]) -> float:
    """Mann-Whitney AUC with average ranks for tied scores."""
    n_pos = sum(1 for _, y in scores if y)
    n_neg = len(scores) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: test labels contain a single class")
    ordered = sorted(scores, key=lambda s: s[0])
    rank_sum = 0.0
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and ordered[j + 1][0] == ordered[i][0]:
            j += 1
        avg_rank = (i + j + 2) / 2.0  # ranks are 1-based
        rank_sum += avg_rank * sum(1 for k in range(i, j + 1) if ordered[k][1])
        i = j + 1
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def split(d: Dataset, fraction: float = 0.2) -> tuple[Dataset, Dataset]:
    """Oldest records for training, the most recent ``ceil(fraction * n)`` for testing."""
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(d.records)
    if n < MIN_RECORDS:
        raise ValueError(f"refusing to split {n} records (need at least {MIN_RECORDS})")
    n_test = math.ceil(round(fraction * n, 9))
    cut = n - n_test
    return d.with_records(d.records[:cut]), d.with_records(d.records[cut:])


def attribute_for(name: str, category: Category) -> AttributeSpec:
    if name == "overall":
        return nominal("overall", *SCHEMAS[category].overall_domain)
    if name == "sentiment":
        return binned("sentiment", -1.0, 1.0, SENTIMENT_BINS)
    if name not in SCHEMAS[category].features:
        raise ValueError(f"{name!r} is not a {category.value} feature")
    return nominal(name, *SCHEMAS[category].rating_domain)


def features_of(record: ReviewRecord, names: Sequence[str]) -> dict:
    return {name: record.value(name) for name in names}


@dataclass(frozen=True)
class ExperimentSpec:
    category: Category
    features: tuple[str, ...]
    name: str = ""
    split_fraction: float = 0.2
    params: HoeffdingParams = field(default_factory=HoeffdingParams)

    def __post_init__(self):
        object.__setattr__(self, "category", Category.parse(self.category))
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise ValueError("an experiment needs at least one feature")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must lie in (0, 1)")
        if not self.name:
            object.__setattr__(self, "name", "+".join(self.features))


@dataclass(frozen=True)
class EvalReport:
    spec: ExperimentSpec
    confusion: Confusion
    f1: float
    f1_per_class: Mapping[str, float]
    auc: float | None
    train_seconds: float
    n_train: int
    n_test: int
    tree_nodes: int = 1
    n_splits: int = 0

    def to_dict(self) -> dict:
        return {
            "category": self.spec.category.value,
            "experiment": self.spec.name,
            "features": list(self.spec.features),
            "split_fraction": self.spec.split_fraction,
            "params": asdict(self.spec.params),
            "confusion": asdict(self.confusion),
            "f1": self.f1,
            "f1_per_class": dict(self.f1_per_class),
            "auc": self.auc,
            "train_seconds": self.train_seconds,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "tree_nodes": self.tree_nodes,
            "n_splits": self.n_splits,
        }

    def without_timing(self) -> "EvalReport":
        return replace(self, train_seconds=0.0)


def prepare(d: Dataset) -> Dataset:
    """Labeled records only, in chronological order."""
    return sort_chronological(d.labeled())


def run_experiment(spec: ExperimentSpec, d: Dataset, *,
                   on_train: Callable[[ReviewRecord], None] | None = None) -> EvalReport:
    """Train on the older part of ``d``, score the most recent part.

    ``on_train`` sees every record handed to the learner, in order.
    """
    if d.category is not spec.category:
        raise ValueError(f"spec is for {spec.category.value}, dataset is {d.category.value}")
    data = prepare(d)
    train, test = split(data, spec.split_fraction)
    tree = HoeffdingTree([attribute_for(f, spec.category) for f in spec.features], spec.params)

    train_rows = [(features_of(r, spec.features), r.recommended) for r in train.records]
    if on_train is not None:
        for r in train.records:
            on_train(r)
    started = time.perf_counter()
    for x, y in train_rows:
        tree.learn_one(x, y)
    elapsed = time.perf_counter() - started

    scored = []
    for r in test.records:
        p = tree.predict_one(features_of(r, spec.features))
        scored.append((p, r.recommended))
    confusion = Confusion.from_pairs((p.recommend, y) for p, y in scored)
    try:
        area = auc([(p.probability, y) for p, y in scored])
    except ValueError:
        logger.warning("%s/%s: AUC undefined on a single-class test set",
                       spec.category.value, spec.name)
        area = None
    return EvalReport(
        spec=spec,
        confusion=confusion,
        f1=f1(confusion),
        f1_per_class=f1_per_class(confusion),
        auc=area,
        train_seconds=elapsed,
        n_train=len(train.records),
        n_test=len(test.records),
        tree_nodes=tree.n_nodes,
        n_splits=len(tree.splits),
    )


def suite_specs(d: Dataset, *, threshold: float = 0.3, paper_faithful: bool = False,
                split_fraction: float = 0.2,
                params: HoeffdingParams | None = None) -> list[ExperimentSpec]:
    """Overall + each rating feature alone, the correlated combination, sentiment alone."""
    params = params or HoeffdingParams()
    cat = d.category
    specs = [ExperimentSpec(cat, (f,), f, split_fraction, params)
             for f in ("overall", *d.schema.features)]

    data = prepare(d)
    basis = data if paper_faithful else split(data, split_fraction)[0]
    chosen = select_features(correlation_matrix(basis), threshold)
    if chosen:
        specs.append(ExperimentSpec(cat, tuple(chosen), "combination", split_fraction, params))
    else:
        logger.warning("%s: no feature correlates above %.2f; combination skipped", cat.value, threshold)
    specs.append(ExperimentSpec(cat, ("sentiment",), "sentiment", split_fraction, params))
    return specs


def run_paper_suite(datasets: Mapping[Category, Dataset], **kwargs) -> list[EvalReport]:
    reports = []
    for cat in Category:
        d = datasets.get(cat)
        if d is None or len(d.labeled()) < MIN_RECORDS:
            logger.warning("%s: dataset missing or too small; skipped", cat.value)
            continue
        for spec in suite_specs(d, **kwargs):
            reports.append(run_experiment(spec, d))
    return reports


CSV_COLUMNS = ("category", "experiment", "features", "f1", "auc", "train_seconds", "n_train", "n_test",
               "tp", "fp", "tn", "fn", "f1_recommend", "f1_not_recommend")


def reports_to_csv(reports: Sequence[EvalReport], header: Mapping | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {json.dumps(header, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        c = r.confusion
        w.writerow([
            r.spec.category.value, r.spec.name, " ".join(r.spec.features),
            f"{r.f1:.6f}", "" if r.auc is None else f"{r.auc:.6f}", f"{r.train_seconds:.6f}",
            r.n_train, r.n_test, c.tp, c.fp, c.tn, c.fn,
            f"{r.f1_per_class['recommend']:.6f}", f"{r.f1_per_class['not_recommend']:.6f}",
        ])
    return buf.getvalue()


def reports_to_json(reports: Sequence[EvalReport], header: Mapping | None = None) -> str:
    return json.dumps({"config": dict(header or {}), "reports": [r.to_dict() for r in reports]},
                      indent=1) + "\n"


def _pretty(name: str) -> str:
    return name.replace("_", " ").capitalize()


def reports_to_markdown(reports: Sequence[EvalReport]) -> str:
    blocks = []
    for cat in Category:
        rows = [r for r in reports if r.spec.category is cat]
        if not rows:
            continue
        lines = [f"**{cat.value.capitalize()} reviews**", "", "| Feature | F1 | AUC |", "|---|---|---|"]
        for r in rows:
            area = "n/a" if r.auc is None else f"{r.auc:.3f}"
            label = (f"{cat.value.capitalize()} Sentiment" if r.spec.name == "sentiment"
                     else _pretty(r.spec.name))
            lines.append(f"| {label} | {r.f1:.3f} | {area} |")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def write_reports(reports: Sequence[EvalReport], out_dir: "str | Path", stem: str = "evaluation",
                  header: Mapping | None = None, markdown: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.csv", out / f"{stem}.json"]
    paths[0].write_text(reports_to_csv(reports, header), encoding="utf-8")
    paths[1].write_text(reports_to_json(reports, header), encoding="utf-8")
    if markdown:
        paths.append(out / f"{stem}.md")
        paths[2].write_text(reports_to_markdown(reports), encoding="utf-8")
    return paths
