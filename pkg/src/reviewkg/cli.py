"""Command-line surface: ingest -> train -> extract -> build -> query ->
export, each stage reading and writing plain files so pipelines are easy
to script and to inspect.

Exit codes: 0 success, 2 usage or input error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from reviewkg import corpus as corpus_mod
from reviewkg import kg as kg_mod
from reviewkg import queries as queries_mod
from reviewkg.annotation import read_annotations, write_annotations
from reviewkg.errors import EmptyTrainingSet, ReviewKgError
from reviewkg.ner.crf import CrfModel, TrainConfig, train_crf, write_train_log
from reviewkg.ner.pipeline import extract_entities
from reviewkg.ontology import default_schema, load_schema
from reviewkg.textproc import PosModel, read_pos_corpus, train_pos_tagger

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="seed for anything stochastic")
    parser.add_argument("--schema", help="ontology schema file (default: built-in)")
    parser.add_argument("--aliases", help="alias map file (surface<TAB>canonical)")
    parser.add_argument("--lexicon", help="concern lexicon file (surface<TAB>category)")
    parser.add_argument("--verbose", action="store_true", help="chatty diagnostics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reviewkg",
        description="mine app reviews for ethical concerns and build a knowledge graph",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load, validate, filter, and normalize a review corpus")
    p.add_argument("--in", dest="infile", required=True, help="input corpus (jsonl or csv)")
    p.add_argument("--format", choices=["jsonl", "csv"], help="input format (default: by extension)")
    p.add_argument("--app", help="keep only reviews for this app (case-insensitive)")
    p.add_argument("--out", help="write the normalized corpus (jsonl)")
    p.add_argument("--vocabulary", help="concern vocabulary file, one name per line")
    p.add_argument("--stats", action="store_true", help="print the concern distribution table")
    _common_flags(p)

    p = sub.add_parser("train", help="train the POS tagger or the sequence labeler")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pos", action="store_true", help="train the POS tagger")
    group.add_argument("--crf", action="store_true", help="train the sequence labeler")
    p.add_argument("--ann", required=True, help="training data (POS tsv or BIO annotation file)")
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--pos-model", help="POS model used to featurize CRF training data")
    p.add_argument("--log", help="write the training log (tsv) here")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--iterations", type=int, default=5, help="POS perceptron passes")
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--decay", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-7)
    _common_flags(p)

    p = sub.add_parser("extract", help="produce BIO annotations for a corpus")
    p.add_argument("--in", dest="infile", required=True, help="corpus file (jsonl or csv)")
    p.add_argument("--format", choices=["jsonl", "csv"])
    p.add_argument("--mode", choices=["gold", "model"], default="gold")
    p.add_argument("--ann", help="gold annotations to pass through (gold mode)")
    p.add_argument("--model", help="trained CRF model (model mode)")
    p.add_argument("--pos-model", help="POS model for featurization (default: baseline rules)")
    p.add_argument("--out", required=True, help="annotation file to write")
    p.add_argument("--vocabulary", help="concern vocabulary file")
    _common_flags(p)

    p = sub.add_parser("build", help="link annotated reviews into the graph")
    p.add_argument("--ann", required=True, help="annotation file")
    p.add_argument("--graph", required=True, help="graph file; merged into if it exists")
    p.add_argument("--corpus", help="corpus file supplying review-level labels")
    p.add_argument("--format", choices=["jsonl", "csv"])
    p.add_argument("--vocabulary", help="concern vocabulary file")
    _common_flags(p)

    p = sub.add_parser("query", help="run a competency query against a graph")
    p.add_argument(
        "name",
        choices=[
            "concerns", "reasons", "requirements",
            "shared-issues", "shared-requirements", "summary",
        ],
    )
    p.add_argument("--graph", required=True)
    p.add_argument("--app", help="app name (concerns)")
    p.add_argument("--concern", help="concern name (reasons, requirements)")
    p.add_argument("--records", action="store_true", help="tab-separated records instead of a table")
    _common_flags(p)

    p = sub.add_parser("export", help="export a graph to cypher, graphml, or dot")
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=["cypher", "graphml", "dot"], required=True)
    p.add_argument("--out", required=True)
    _common_flags(p)

    p = sub.add_parser("stats", help="print node/edge counts for a graph")
    p.add_argument("--graph", required=True)
    _common_flags(p)

    return parser


def _vocabulary(args) -> corpus_mod.ConcernVocabulary:
    if getattr(args, "vocabulary", None):
        return corpus_mod.ConcernVocabulary.from_file(args.vocabulary)
    return corpus_mod.ConcernVocabulary()


def _guess_format(path: str, override: str | None) -> str:
    if override:
        return override
    return "csv" if path.endswith(".csv") else "jsonl"


def _load_corpus(args) -> corpus_mod.Corpus:
    path = Path(args.infile)
    if not path.exists():
        raise ReviewKgError(f"input file not found: {path}")
    return corpus_mod.load_reviews(
        path, format=_guess_format(args.infile, args.format), vocabulary=_vocabulary(args)
    )


def cmd_ingest(args) -> int:
    loaded = _load_corpus(args)
    if args.app:
        loaded = corpus_mod.filter_by_app(loaded, args.app)
    if args.out:
        corpus_mod.write_reviews(loaded, args.out)
        print(f"wrote {len(loaded)} reviews to {args.out}")
    else:
        print(f"loaded {len(loaded)} reviews")
    if args.stats:
        report = corpus_mod.concern_distribution(loaded)
        print(corpus_mod.render_distribution(report))
    return EXIT_OK


def cmd_train(args) -> int:
    ann_path = Path(args.ann)
    if not ann_path.exists():
        raise ReviewKgError(f"annotation file not found: {ann_path}")
    if args.pos:
        sentences = read_pos_corpus(ann_path)
        model = train_pos_tagger(sentences, iterations=args.iterations, seed=args.seed)
        model.save(args.out)
        print(f"trained POS tagger on {len(sentences)} sentences; "
              f"training accuracy {model.train_accuracy:.4f}")
        return EXIT_OK
    gold = read_annotations(ann_path)
    if not gold:
        raise EmptyTrainingSet("annotation file contains no reviews")
    pos_model = PosModel.load(args.pos_model) if args.pos_model else None
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        decay=args.decay,
        batch_size=args.batch_size,
        l2=args.l2,
        seed=args.seed,
        tolerance=args.tol,
    )
    model, log = train_crf(gold, config, pos_model=pos_model)
    model.save(args.out)
    if args.log:
        write_train_log(log, args.log)
    final = log[-1]
    print(f"trained CRF for {len(log)} epochs; "
          f"mean loglik {final.mean_loglik:.6f}; "
          f"training accuracy {final.token_accuracy:.4f}")
    return EXIT_OK


def cmd_extract(args) -> int:
    loaded = _load_corpus(args)
    if args.mode == "model" and not args.model:
        raise ReviewKgError("--mode model requires --model")
    if args.mode == "gold" and not args.ann:
        raise ReviewKgError("--mode gold requires --ann")
    results = []
    if args.mode == "gold":
        by_id = {ar.review.id: ar for ar in read_annotations(args.ann)}
        for review in loaded:
            gold = by_id.get(review.id)
            if gold is None:
                raise ReviewKgError(f"no gold annotation for review {review.id!r}")
            results.append(extract_entities(review, gold=gold))
    else:
        crf_model = CrfModel.load(args.model)
        pos_model = PosModel.load(args.pos_model) if args.pos_model else None
        for review in loaded:
            results.append(extract_entities(review, crf_model=crf_model, pos_model=pos_model))
    write_annotations(results, args.out)
    nspans = sum(len(ar.all_spans()) for ar in results)
    print(f"wrote {len(results)} annotated reviews ({nspans} spans) to {args.out}")
    return EXIT_OK


def cmd_build(args) -> int:
    annotated = read_annotations(args.ann)
    labels_by_id = {}
    if args.corpus:
        corpus_args = argparse.Namespace(
            infile=args.corpus, format=args.format, vocabulary=args.vocabulary
        )
        for review in _load_corpus(corpus_args):
            labels_by_id[review.id] = review.concern_labels
    for ar in annotated:
        labels = labels_by_id.get(ar.review.id)
        if labels:
            ar.review = corpus_mod.Review(
                id=ar.review.id, app=ar.review.app, text=ar.review.text, concern_labels=labels
            )

    schema = load_schema(args.schema) if args.schema else default_schema()
    aliases = kg_mod.read_label_map(args.aliases) if args.aliases else {}
    extra = kg_mod.read_label_map(args.lexicon) if args.lexicon else None
    vocab = _vocabulary(args)
    lexicon = kg_mod.build_concern_lexicon(vocab.names, extra)

    graph_path = Path(args.graph)
    increment = kg_mod.KnowledgeGraph(schema=schema, aliases=aliases)
    for ar in annotated:
        kg_mod.link_review(increment, ar, lexicon)
    if graph_path.exists():
        base = kg_mod.load_graph(graph_path)
        graph = kg_mod.merge_graphs(base, increment)
    else:
        graph = increment
    graph.check_integrity()
    kg_mod.save_graph(graph, graph_path)
    s = graph.stats()
    print(f"nodes={s.node_count} edges={s.edge_count}")
    return EXIT_OK


def cmd_query(args) -> int:
    graph = kg_mod.load_graph(args.graph)
    if args.name == "concerns":
        if not args.app:
            raise ReviewKgError("query concerns requires --app")
        result = queries_mod.concerns_of_app(graph, args.app)
    elif args.name == "reasons":
        if not args.concern:
            raise ReviewKgError("query reasons requires --concern")
        result = queries_mod.reasons_for_concern(graph, args.concern)
    elif args.name == "requirements":
        if not args.concern:
            raise ReviewKgError("query requirements requires --concern")
        result = queries_mod.requirements_for_concern(graph, args.concern)
    elif args.name == "shared-issues":
        result = queries_mod.shared_issues(graph)
    elif args.name == "shared-requirements":
        result = queries_mod.shared_requirements(graph)
    else:
        result = queries_mod.concern_pattern_summary(graph)
    if args.records:
        out = queries_mod.render_records(result)
        if out:
            print(out)
    else:
        print(queries_mod.render_text(result))
    return EXIT_OK


def cmd_export(args) -> int:
    graph = kg_mod.load_graph(args.graph)
    kg_mod.export_graph(graph, args.format, args.out)
    print(f"wrote {args.format} export to {args.out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    graph = kg_mod.load_graph(args.graph)
    s = graph.stats()
    print(f"nodes={s.node_count} edges={s.edge_count}")
    for entity_type in sorted(s.per_type):
        print(f"  {entity_type}: {s.per_type[entity_type]}")
    print(f"requirements={s.requirement_count}")
    return EXIT_OK


_HANDLERS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "extract": cmd_extract,
    "build": cmd_build,
    "query": cmd_query,
    "export": cmd_export,
    "stats": cmd_stats,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; pass both through
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except (ReviewKgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if getattr(args, "verbose", False):
            traceback.print_exc()
        return EXIT_INPUT
    except Exception as exc:  # anything else is a bug, not bad input
        print(f"internal error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
