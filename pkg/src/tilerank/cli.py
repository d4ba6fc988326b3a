"""Command-line pipeline driver.

Subcommands: index, render, train, rank, evaluate, gradcheck, selftest.
Configuration precedence is flags > JSON config file > built-in defaults;
every command drops a ``run_metadata.json`` (resolved config, seed, and
the fixed behavioral conventions) next to its outputs.

Exit codes: 0 success, 2 missing or malformed input, 3 id lookup failure,
4 empty or invalid training data, 5 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

import tilerank
from tilerank import kernels
from tilerank.corpus import (
    DataError,
    load_corpus,
    load_embeddings,
    load_segment_cache,
    make_training_triples,
    parse_qrels,
    parse_queries,
    save_segment_cache,
    stats_from_segmented,
    CorpusStats,
)
from tilerank.evaluation import (
    DEFAULT_CUTOFFS,
    Ranking,
    bm25_score,
    evaluate_run,
    kfold_split,
    lm_dirichlet_score,
    read_run_file,
    write_run_file,
)
from tilerank.gradcheck import grad_check
from tilerank.matrix import build_matrix
from tilerank.ranker import (
    Hyperparams,
    PROFILES,
    load_model,
    save_model,
    score,
)
from tilerank.render import RenderSpec, image_filename, render, render_grid_dump
from tilerank.segmentation import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    load_default_stopwords,
    load_stopwords,
    segment_document,
    segment_words,
)
from tilerank.training import EmptyTrainingData, train

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_LOOKUP = 3
EXIT_TRAINING_DATA = 4
EXIT_INTERNAL = 5

DEFAULTS = {
    "alpha": DEFAULT_ALPHA,
    "beta": DEFAULT_BETA,
    "n_q": None,  # None = longest query in the collection
    "n_b": 30,
    "max_width": 10,
    "profile": "trec",
    "seed": 0,
    "learning_rate": 1e-3,
    "l2_coefficient": 1e-4,
    "forget_bias_init": 1.0,
    "patience": 5,
    "max_epochs": 200,
    "triples_per_query": 50,
    "validation_split": 0.1,
    "cutoffs": list(DEFAULT_CUTOFFS),
    "cell_px": 8,
    "gamma": 1.0,
}

# Fixed behavioral conventions recorded with every run for reproducibility.
CONVENTIONS = {
    "idf": "ln((N+1)/(df+1)) + 1",
    "bm25": "k1=1.2 b=0.75, idf ln((N-df+0.5)/(df+0.5)+1)",
    "lm": "dirichlet, mu=2000 default",
    "hard_sigmoid": "clamp(0.2x+0.5, 0, 1)",
    "init": "uniform [-0.1, 0.1], forget-gate biases +forget_bias_init",
    "l2": "0.5*lambda*||w||^2 on CNN weights only",
    "batch": "one triple per step",
    "validation_split": "by query",
    "ndcg_gain": "2^g - 1",
    "err_gmax": "largest positive grade observed in qrels",
    "negative_grades": "clamped to 0 for metrics",
    "embeddings": "used as loaded, no re-normalization",
    "renderer_rounding": "round half up, per-matrix normalization",
}


def _resolve_config(args: argparse.Namespace) -> dict:
    merged = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        merged.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _write_metadata(out_dir: Path, command: str, config: dict, extra: dict | None = None) -> None:
    payload = {
        "tool_version": tilerank.__version__,
        "command": command,
        "config": {k: v for k, v in sorted(config.items())},
        "backend": kernels.BACKEND,
        "conventions": CONVENTIONS,
    }
    if extra:
        payload.update(extra)
    (out_dir / "run_metadata.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n", encoding="utf-8"
    )


def _stopwords(args) -> set[str]:
    if getattr(args, "stopwords", None):
        return load_stopwords(args.stopwords)
    return load_default_stopwords()


def _load_index(index_dir) -> tuple[dict, CorpusStats, dict]:
    index_dir = Path(index_dir)
    cache_path = index_dir / "segments.jsonl"
    stats_path = index_dir / "stats.json"
    for p in (cache_path, stats_path):
        if not p.exists():
            raise FileNotFoundError(f"index file missing: {p}")
    docs, header = load_segment_cache(cache_path)
    stats = CorpusStats.load(stats_path)
    return {d.doc_id: d for d in docs}, stats, header


def _resolve_n_q(config: dict, queries: list[tuple[str, list[str]]]) -> int:
    if config.get("n_q"):
        return int(config["n_q"])
    longest = max((len(t) for _, t in queries), default=0)
    if longest == 0:
        raise DataError("cannot infer n_q: every query is empty")
    return longest


def _word_level_docs(config, args, stopwords) -> dict:
    """Word-granularity pseudo-segment documents for the w2w ablation."""
    if not getattr(args, "corpus", None):
        raise DataError("--w2w requires --corpus (raw text is needed for word order)")
    docs = {}
    for record in load_corpus(args.corpus, getattr(args, "corpus_format", "auto")):
        docs[record.doc_id] = segment_words(record.text, stopwords, doc_id=record.doc_id)
    return docs


def _segment_one(payload):
    doc_id, text, alpha, beta, stopwords = payload
    return segment_document(text, alpha=alpha, beta=beta, stopwords=stopwords, doc_id=doc_id)


def cmd_index(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stopwords = _stopwords(args)
    payloads = [
        (record.doc_id, record.text, config["alpha"], config["beta"], stopwords)
        for record in load_corpus(args.corpus, args.corpus_format)
    ]
    if args.jobs > 1:
        # segmentation is pure per document; map preserves input order
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            docs = list(pool.map(_segment_one, payloads, chunksize=8))
    else:
        docs = [_segment_one(p) for p in payloads]
    save_segment_cache(docs, out_dir / "segments.jsonl", config["alpha"], config["beta"])
    stats_from_segmented(docs).save(out_dir / "stats.json")
    _write_metadata(out_dir, "index", config, {"n_docs": len(docs)})
    print(f"indexed {len(docs)} documents -> {out_dir}")
    return EXIT_OK


def _matrix_for(query_terms, doc, stats, embeddings, n_q, n_b):
    return build_matrix(query_terms, doc, stats, embeddings, n_q=n_q, n_b=n_b)


def cmd_render(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stopwords = _stopwords(args)
    docs, stats, _ = _load_index(args.index)
    embeddings = load_embeddings(args.embeddings)
    queries = dict(parse_queries(args.queries, stopwords))
    if args.query_id not in queries:
        raise KeyError(f"unknown query id {args.query_id!r}")
    if args.w2w:
        docs = _word_level_docs(config, args, stopwords)
    if args.doc_id not in docs:
        raise KeyError(f"unknown doc id {args.doc_id!r}")
    n_q = _resolve_n_q(config, list(queries.items()))
    matrix = _matrix_for(
        queries[args.query_id], docs[args.doc_id], stats, embeddings, n_q, config["n_b"]
    )
    spec = RenderSpec(
        cell_px=config["cell_px"],
        mode=args.mode,
        gamma=config["gamma"],
        grid_lines=args.grid_lines,
    )
    name = image_filename(args.query_id, args.doc_id, args.mode)
    (out_dir / name).write_bytes(render(matrix, spec))
    if args.dump:
        dump_name = f"{args.query_id}_{args.doc_id}.grid.txt"
        (out_dir / dump_name).write_text(render_grid_dump(matrix), encoding="utf-8")
    _write_metadata(out_dir, "render", config, {"image": name, "w2w": bool(args.w2w)})
    print(f"rendered {name}")
    return EXIT_OK


def _hyper_from_config(config: dict) -> Hyperparams:
    if config["profile"] not in PROFILES:
        raise DataError(f"unknown profile {config['profile']!r} (choose from {sorted(PROFILES)})")
    profile = PROFILES[config["profile"]]
    return Hyperparams(
        max_width=config["max_width"],
        filters=profile["filters"],
        hidden=profile["hidden"],
        mlp_sizes=tuple(profile["mlp_sizes"]),
        learning_rate=config["learning_rate"],
        l2_coefficient=config["l2_coefficient"],
        forget_bias_init=config["forget_bias_init"],
        patience=config["patience"],
        max_epochs=config["max_epochs"],
        seed=config["seed"],
    )


def cmd_train(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stopwords = _stopwords(args)
    docs, stats, _ = _load_index(args.index)
    embeddings = load_embeddings(args.embeddings)
    queries = dict(parse_queries(args.queries, stopwords))
    qrels = parse_qrels(args.qrels)
    if len(qrels) == 0:
        raise EmptyTrainingData("qrels file holds no judgments")
    triples = make_training_triples(qrels, config["triples_per_query"], config["seed"])
    if not triples:
        raise EmptyTrainingData("no grade-ordered training pairs could be formed")
    if args.w2w:
        docs = _word_level_docs(config, args, stopwords)
    n_q = _resolve_n_q(config, list(queries.items()))
    n_b = config["n_b"]

    def provider(query_id: str, doc_id: str):
        if query_id not in queries:
            raise KeyError(f"qrels reference unknown query id {query_id!r}")
        if doc_id not in docs:
            raise KeyError(f"qrels reference unknown doc id {doc_id!r}")
        return _matrix_for(queries[query_id], docs[doc_id], stats, embeddings, n_q, n_b)

    hyper = _hyper_from_config(config)
    model, history = train(triples, provider, hyper, config["validation_split"])
    save_model(model, out_dir / "model.ckpt")
    (out_dir / "history.json").write_text(
        json.dumps(
            [{"epoch": h.epoch, "train_loss": h.train_loss, "val_loss": h.val_loss}
             for h in history],
            indent=2,
        ) + "\n",
        encoding="utf-8",
    )
    _write_metadata(
        out_dir, "train", config,
        {"n_triples": len(triples), "n_q": n_q, "epochs_run": len(history), "w2w": bool(args.w2w)},
    )
    print(
        f"trained on {len(triples)} triples for {len(history)} epochs "
        f"(final val loss {history[-1].val_loss:.4f}) -> {out_dir / 'model.ckpt'}"
    )
    return EXIT_OK


def cmd_rank(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stopwords = _stopwords(args)
    docs, stats, _ = _load_index(args.index)
    queries = parse_queries(args.queries, stopwords)
    doc_counts = {doc_id: d.total_term_counts for doc_id, d in docs.items()}
    rankings = []
    if args.baseline == "bm25":
        total_len = sum(sum(c.values()) for c in doc_counts.values())
        avg_len = total_len / max(1, len(doc_counts))
        for qid, terms in queries:
            scores = {d: bm25_score(terms, counts, stats, avg_len)
                      for d, counts in doc_counts.items()}
            rankings.append(Ranking.from_scores(qid, scores))
        tag = args.tag or "bm25"
    elif args.baseline == "lm":
        for qid, terms in queries:
            scores = {d: lm_dirichlet_score(terms, counts, stats)
                      for d, counts in doc_counts.items()}
            rankings.append(Ranking.from_scores(qid, scores))
        tag = args.tag or "lm"
    elif args.baseline == "random":
        rng = np.random.default_rng(config["seed"])
        for qid, _terms in queries:
            scores = {d: float(rng.random()) for d in sorted(doc_counts)}
            rankings.append(Ranking.from_scores(qid, scores))
        tag = args.tag or "random"
    else:
        if not args.model:
            raise DataError("either --model or --baseline is required")
        if not args.embeddings:
            raise DataError("--embeddings is required when ranking with a model")
        model = load_model(args.model)
        embeddings = load_embeddings(args.embeddings)
        if args.w2w:
            docs = _word_level_docs(config, args, stopwords)
        n_q, n_b = model.n_q, model.n_b
        for qid, terms in queries:
            scores = {}
            for doc_id, doc in docs.items():
                matrix = _matrix_for(terms, doc, stats, embeddings, n_q, n_b)
                scores[doc_id] = score(matrix, model)
            rankings.append(Ranking.from_scores(qid, scores))
        tag = args.tag or "tilerank"
    run_path = out_dir / f"run.{tag}.txt"
    write_run_file(rankings, run_path, tag=tag, depth=args.depth)
    _write_metadata(out_dir, "rank", config, {"run_file": run_path.name, "tag": tag})
    print(f"wrote {run_path} ({len(rankings)} queries)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    qrels = parse_qrels(args.qrels)
    try:
        rankings = read_run_file(args.run)
        cutoffs = tuple(int(c) for c in str(config["cutoffs"]).replace(",", " ").split()) \
            if isinstance(config["cutoffs"], str) else tuple(config["cutoffs"])
        report = evaluate_run(rankings, qrels, cutoffs)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    text = report.to_text()
    if args.kfold:
        folds = kfold_split([r.query_id for r in rankings], args.kfold, config["seed"])
        lines = []
        for fi, fold in enumerate(folds.folds):
            fold_set = set(fold)
            fold_rankings = [r for r in rankings if r.query_id in fold_set]
            if not fold_rankings:
                continue
            fold_report = evaluate_run(fold_rankings, qrels, cutoffs)
            for label, value in fold_report.means.items():
                lines.append(f"{label}\tfold{fi}\t{value:.6f}")
        text += "\n".join(lines) + "\n"
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    _write_metadata(out_dir, "evaluate", config, {"n_queries": len(report.per_query)})
    for label in report.metric_labels():
        print(f"{label}\tall\t{report.means[label]:.6f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 0
    report = grad_check(seed=seed, epsilon=args.epsilon)
    print(report.summary())
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "gradcheck_report.json").write_text(
            json.dumps(
                {
                    "max_rel_error": report.max_rel_error,
                    "worst_param": report.worst_param,
                    "n_params": report.n_params,
                    "epsilon": report.epsilon,
                    "min_kink_distance": report.min_kink_distance,
                    "passed": report.passed(args.threshold),
                },
                indent=2,
            ) + "\n",
            encoding="utf-8",
        )
        _write_metadata(
            out_dir, "gradcheck",
            {"seed": seed, "epsilon": args.epsilon, "threshold": args.threshold},
        )
    return EXIT_OK if report.passed(args.threshold) else 1


def cmd_selftest(args) -> int:
    """Quick internal sanity checks; exercises every stage on synthetic data."""
    from tilerank.selftest import run_selftest

    failures = run_selftest(verbose=True)
    return EXIT_OK if failures == 0 else 1


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags override it)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--stopwords", help="stopword list, one term per line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilerank",
        description="Topic-tile retrieval pipeline: segment, visualize, train, rank, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="segment a corpus and compute statistics")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--corpus-format", default="auto", choices=["auto", "dir", "tsv"])
    p.add_argument("--alpha", type=int, default=None)
    p.add_argument("--beta", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1,
                   help="segment documents with this many worker processes")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("render", help="render one query/document tile image")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--query-id", required=True)
    p.add_argument("--doc-id", required=True)
    p.add_argument("--mode", default="grayscale-tf", choices=["grayscale-tf", "rgb-3channel"])
    p.add_argument("--cell-px", dest="cell_px", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--grid-lines", action="store_true")
    p.add_argument("--dump", action="store_true", help="also write the text grid dump")
    p.add_argument("--w2w", action="store_true", help="word-to-word ablation matrix")
    p.add_argument("--corpus", help="raw corpus (required with --w2w)")
    p.add_argument("--corpus-format", default="auto", choices=["auto", "dir", "tsv"])
    p.add_argument("--n-q", dest="n_q", type=int, default=None)
    p.add_argument("--n-b", dest="n_b", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("train", help="train the neural ranker")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--profile", default=None, choices=list(PROFILES))
    p.add_argument("--max-width", dest="max_width", type=int, default=None)
    p.add_argument("--n-q", dest="n_q", type=int, default=None)
    p.add_argument("--n-b", dest="n_b", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--l2", dest="l2_coefficient", type=float, default=None)
    p.add_argument("--forget-bias-init", dest="forget_bias_init", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
    p.add_argument("--triples-per-query", dest="triples_per_query", type=int, default=None)
    p.add_argument("--validation-split", dest="validation_split", type=float, default=None)
    p.add_argument("--w2w", action="store_true")
    p.add_argument("--corpus", help="raw corpus (required with --w2w)")
    p.add_argument("--corpus-format", default="auto", choices=["auto", "dir", "tsv"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("rank", help="write a run file for the model or a baseline")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--model")
    p.add_argument("--embeddings", help="required with --model")
    p.add_argument("--baseline", choices=["bm25", "lm", "random"])
    p.add_argument("--tag", default=None)
    p.add_argument("--depth", type=int, default=1000)
    p.add_argument("--w2w", action="store_true")
    p.add_argument("--corpus", help="raw corpus (required with --w2w)")
    p.add_argument("--corpus-format", default="auto", choices=["auto", "dir", "tsv"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_rank)

    p = sub.add_parser("evaluate", help="score a run file against qrels")
    _add_common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--cutoffs", default=None, help="comma-separated, default 5,10,20")
    p.add_argument("--kfold", type=int, default=None, help="also report per-fold means")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference check of the backward pass")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--threshold", type=float, default=1e-4)
    p.add_argument("--out", help="also write report and metadata here")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("selftest", help="quick self-contained sanity suite")
    p.set_defaults(fn=cmd_selftest)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyError as exc:
        print(f"error: lookup failed: {exc}", file=sys.stderr)
        return EXIT_LOOKUP
    except EmptyTrainingData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING_DATA
    except Exception as exc:  # noqa: BLE001 - contract: internal errors exit 5
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
