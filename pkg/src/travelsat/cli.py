"""Command-line entry point.

Stages communicate through a normalized dataset cache (``<out>/<category>.jsonl``)
written by ``ingest``; later commands only read that cache.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .correlation import correlation_matrix, ranked_correlates
from .data import (Category, Dataset, IngestError, ingest, read_jsonl, sort_chronological, stats,
                   write_jsonl, write_rejections)
from .evaluation import (ExperimentSpec, attribute_for, features_of, prepare, reports_to_markdown,
                         run_experiment, suite_specs, write_reports)
from .hoeffding import HoeffdingParams, HoeffdingTree
from .sentiment import ENDPOINT_ENV, RemoteScorer, annotate, lexicon_scorer, load_lexicon
from .stc import STCParams, format_table, topics_by_polarity

log = logging.getLogger("travelsat")

EXIT_OK, EXIT_INTERNAL, EXIT_BAD_INPUT = 0, 1, 2


class BadInput(Exception):
    pass


def _params(args) -> HoeffdingParams:
    try:
        return HoeffdingParams(delta=args.delta, tau=args.tau, grace=args.grace)
    except ValueError as exc:
        raise BadInput(str(exc)) from exc


def _config(args, **extra) -> dict:
    """Every tunable that affects an output, echoed into its header."""
    return {
        "version": __version__,
        "command": args.command,
        "lexicon": str(args.lexicon) if args.lexicon else "default",
        "hoeffding": asdict(_params(args)),
        "threshold": args.threshold,
        "paper_faithful": args.paper_faithful,
        **extra,
    }


def _cache_path(out: Path, category: Category) -> Path:
    return out / f"{category.value}.jsonl"


def _load(out: Path, category: Category) -> Dataset:
    try:
        d, _ = read_jsonl(_cache_path(out, category))
    except IngestError as exc:
        raise BadInput(f"{exc} (run `travelsat ingest` first)") from exc
    return d


def _categories(value: str) -> list[Category]:
    if value == "all":
        return list(Category)
    try:
        return [Category.parse(value)]
    except ValueError as exc:
        raise BadInput(str(exc)) from exc


def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
    if endpoint:
        scorer = RemoteScorer(endpoint, out / "sentiment_cache.jsonl")
        sentiment_source = f"remote:{endpoint}"
    else:
        scorer = lexicon_scorer(load_lexicon(args.lexicon))
        sentiment_source = f"lexicon:{args.lexicon or 'default'}"

    for raw in args.paths:
        path = Path(raw)
        try:
            category = Category.parse(args.category or path.stem)
        except ValueError as exc:
            raise BadInput(f"{path}: {exc}; pass --category") from exc
        try:
            d = ingest(path, category)
        except IngestError as exc:
            raise BadInput(str(exc)) from exc
        d = annotate(d, scorer, force=args.force_sentiment)
        s = stats(d)
        print(s.describe())
        print(f"rejected rows: {len(d.rejections)}")
        print(f"warnings: {len(d.warnings)}")
        header = _config(args, source=str(path), sentiment=sentiment_source)
        write_jsonl(d, _cache_path(out, category), header={"config": header})
        write_rejections(d, out / f"{category.value}.rejections.jsonl")
    return EXIT_OK


def cmd_analyze(args) -> int:
    out = Path(args.out)
    for category in _categories(args.category):
        d = _load(out, category)
        if not d.records:
            raise BadInput(f"{category.value}: dataset is empty")
        rep = correlation_matrix(d)
        header = _config(args, category=category.value)
        rep.write_json(out / f"{category.value}.correlation.json", header)
        rep.write_csv(out / f"{category.value}.correlation.csv", header)
        print(f"{category.value}: top correlates of overall")
        for name, r in ranked_correlates(rep)[:4]:
            print(f"  {name:<24} r={r:.3f}")
        s = rep.get("sentiment", "overall")
        if s is not None:
            print(f"  {'(sentiment)':<24} r={s:.3f}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    out = Path(args.out)
    params = STCParams(args.max_phrase_len, args.top_k, args.overlap)
    for category in _categories(args.category):
        d = sort_chronological(_load(out, category))
        if args.max_docs and len(d.records) > args.max_docs:
            # most recent reviews only; suffix trees over the full corpus get large
            d = d.with_records(d.records[-args.max_docs:])
        pos, neg = topics_by_polarity(d, args.k, params)
        header = _config(args, category=category.value, stc=asdict(params), k=args.k,
                         max_docs=args.max_docs)
        doc = {"config": header, "topics": [pos.to_dict(), neg.to_dict()]}
        (out / f"{category.value}.topics.json").write_text(json.dumps(doc, indent=1) + "\n",
                                                           encoding="utf-8")
        print(format_table(pos))
        print()
        print(format_table(neg))
    return EXIT_OK


def _feature_list(args, category: Category) -> list[str]:
    feats = [f.strip() for f in args.features.split(",") if f.strip()]
    for f in feats:
        try:
            attribute_for(f, category)
        except ValueError as exc:
            raise BadInput(str(exc)) from exc
    return feats


def cmd_train(args) -> int:
    out = Path(args.out)
    if args.category == "all":
        raise BadInput("train takes a single category")
    [category] = _categories(args.category)
    d = prepare(_load(out, category))
    if not d.records:
        raise BadInput(f"{category.value}: no labeled records")
    feats = _feature_list(args, category)
    tree = HoeffdingTree([attribute_for(f, category) for f in feats], _params(args))
    for r in d.records:
        tree.learn_one(features_of(r, feats), r.recommended)
    path = Path(args.model) if args.model else out / f"{category.value}.model.json"
    tree.save(path)
    print(f"trained on {tree.n_trained} records; {tree.n_nodes} nodes, {len(tree.splits)} splits")
    print(f"model written to {path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    params = _params(args)
    reports = []
    for category in _categories(args.category):
        try:
            d = _load(out, category)
        except BadInput:
            if args.category != "all":
                raise
            log.warning("%s: no dataset cache; skipped", category.value)
            continue
        try:
            if args.features:
                specs = [ExperimentSpec(category, tuple(_feature_list(args, category)),
                                        params=params, split_fraction=args.test_fraction)]
            else:
                specs = suite_specs(d, threshold=args.threshold, paper_faithful=args.paper_faithful,
                                    split_fraction=args.test_fraction, params=params)
        except ValueError as exc:
            raise BadInput(f"{category.value}: {exc}") from exc
        for spec in specs:
            try:
                reports.append(run_experiment(spec, d))
            except ValueError as exc:
                raise BadInput(f"{category.value}/{spec.name}: {exc}") from exc
    if not reports:
        raise BadInput("nothing to evaluate")
    header = _config(args, test_fraction=args.test_fraction, features=args.features)
    paths = write_reports(reports, out, header=header, markdown=args.markdown)
    if args.markdown:
        print(reports_to_markdown(reports))
    else:
        for r in reports:
            area = "n/a" if r.auc is None else f"{r.auc:.3f}"
            print(f"{r.spec.category.value:<8} {r.spec.name:<24} F1={r.f1:.3f} AUC={area} "
                  f"train={r.train_seconds:.3f}s")
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out)
    for category in Category:
        path = _cache_path(out, category)
        if path.exists():
            d, _ = read_jsonl(path)
            print(stats(d).describe())
            print()
    ev = out / "evaluation.json"
    if not ev.exists():
        raise BadInput(f"no evaluation results at {ev}; run `travelsat evaluate` first")
    doc = json.loads(ev.read_text(encoding="utf-8"))
    print("| Category | Feature | F1 | AUC | train s |")
    print("|---|---|---|---|---|")
    for r in doc["reports"]:
        area = "n/a" if r["auc"] is None else f"{r['auc']:.3f}"
        print(f"| {r['category']} | {r['experiment']} | {r['f1']:.3f} | {area} | {r['train_seconds']:.3f} |")
    return EXIT_OK


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    """Options accepted both before and after the subcommand.

    The subcommand copy suppresses its defaults so that a flag given before
    the subcommand is not reset by the subparser.
    """
    def d(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=d("out"), help="output/cache directory (default: out)")
    common.add_argument("--lexicon", default=d(None), help="sentiment lexicon file (token<TAB>polarity)")
    common.add_argument("--endpoint", default=d(None),
                        help=f"remote sentiment service URL (or set {ENDPOINT_ENV})")
    common.add_argument("--delta", type=float, default=d(1e-7), help="Hoeffding split confidence")
    common.add_argument("--tau", type=float, default=d(0.05), help="Hoeffding tie threshold")
    common.add_argument("--grace", type=int, default=d(200), help="records between split checks")
    common.add_argument("--threshold", type=float, default=d(0.3),
                        help="correlation cutoff for the feature combination")
    common.add_argument("--paper-faithful", action="store_true", default=d(False),
                        help="select combination features on the full dataset, not the training split")
    common.add_argument("--markdown", action="store_true", default=d(False),
                        help="also emit a markdown results table")
    common.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(suppress=True)
    parser = argparse.ArgumentParser(prog="travelsat", parents=[_global_options(suppress=False)],
                                     description="Explain and predict traveler satisfaction from reviews.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="ingest review CSVs, print dataset statistics")
    p.add_argument("paths", nargs="+")
    p.add_argument("--category", help="category for all paths (default: from file name)")
    p.add_argument("--force-sentiment", action="store_true", help="rescore records that carry a sentiment")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", parents=[common], help="Pearson correlation matrices")
    p.add_argument("category", help="airport, lounge, airline, seat or all")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("cluster", parents=[common], help="suffix tree clustering of review texts")
    p.add_argument("category")
    p.add_argument("--k", type=int, default=10, help="topics per polarity")
    p.add_argument("--top-k", type=int, default=500, help="base clusters kept before merging")
    p.add_argument("--max-phrase-len", type=int, default=6)
    p.add_argument("--overlap", type=float, default=0.5, help="merge overlap threshold")
    p.add_argument("--max-docs", type=int, default=3000, help="cluster only the N most recent reviews (0: all)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train", parents=[common], help="train a Hoeffding tree on all labeled records")
    p.add_argument("category")
    p.add_argument("--features", required=True, help="comma-separated feature names")
    p.add_argument("--model", help="model output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="chronological train/test experiments")
    p.add_argument("category", help="airport, lounge, airline, seat or all")
    p.add_argument("--features", help="comma-separated features for a single experiment")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="summarize dataset statistics and results")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BadInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
