"""``oprf`` command line.

Every subcommand accepts ``--config FILE``: a flat ``key=value`` file whose
keys are flag names (``prf-depth`` or ``prf_depth``). Flags given on the
command line win over the file.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .corpus import (
    FormatError,
    load_corpus,
    load_pseudo_queries,
    load_qrels,
    load_topics,
    read_pseudo_query_lines,
    read_run,
    write_run,
)
from .dense import PrfConfig, load_embeddings
from .evaluation import (
    MetricConfig,
    format_table,
    latency_report,
    map_at,
    ndcg_at,
    paired_ttest,
    recall_at,
)
from .lexical import Bm25Params, Rm3Params, Tokenizer, build_index, load_index, save_index
from .offline import (
    ModelRegistry,
    OfflineConfig,
    ResultStore,
    ScoreModel,
    estimate_storage,
    load_store,
    prepare,
    round_half_up,
    save_store,
)
from .online import OnlineConfig, SearchEngine, run_topics, write_timings
from .sweep import PARAMETERS, SweepAssets, SweepSpec, run_sweep, write_sweep_csv
from .synth import generate

log = logging.getLogger("oprf")


class UsageError(Exception):
    """Bad arguments or inputs; exit code 2."""


def _existing(path: str | Path | None, flag: str) -> Path:
    if path is None:
        raise UsageError(f"missing required option --{flag}")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"path not found: {p} (--{flag})")
    return p


def read_config(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key=value`` file; ``#`` starts a comment."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"path not found: {path} (--config)")
    config = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        config[key.replace("-", "_")] = value
    return config


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off", ""}


def _apply_config(parser: argparse.ArgumentParser, config: dict[str, str]) -> None:
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, value in config.items():
        action = actions.get(key)
        if action is None:
            continue
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if value.lower() not in _TRUE | _FALSE:
                raise UsageError(f"config key {key}: expected a boolean, got {value!r}")
            defaults[key] = value.lower() in _TRUE
        else:
            defaults[key] = value
    parser.set_defaults(**defaults)


# --- model specs -------------------------------------------------------------


def parse_model_specs(spec: str) -> list[tuple[str, str, list[str]]]:
    """``[id=]kind:path[:pq_path]`` items separated by commas."""
    models = []
    for item in filter(None, (s.strip() for s in spec.split(","))):
        model_id, _, rest = item.rpartition("=") if "=" in item else ("", "", item)
        kind, sep, paths = rest.partition(":")
        kind = {"lex": "lexical"}.get(kind, kind)
        if not sep or kind not in {"dense", "lexical"} or not paths:
            raise UsageError(f"bad model spec {item!r}; expected [id=]dense:EMB[:PQ_EMB] or [id=]lex:INDEX")
        parts = paths.split(":")
        if (kind == "lexical" and len(parts) != 1) or len(parts) > 2:
            raise UsageError(f"bad model spec {item!r}")
        models.append((model_id or ("lex" if kind == "lexical" else "dense"), kind, parts))
    if not models:
        raise UsageError("no models given")
    ids = [m[0] for m in models]
    if len(set(ids)) != len(ids):
        raise UsageError(f"duplicate model ids {ids}; name them with id=kind:path")
    return models


# --- stage implementations ------------------------------------------------------


def do_index(corpus: Path, pseudo_queries: Path, pq_index: Path, doc_index: Path | None,
             expand_docs: bool, tokenizer: Tokenizer) -> None:
    docs = load_corpus(corpus)
    pqs = load_pseudo_queries(pseudo_queries, docs)
    save_index(pq_index, build_index(((pq.pq_id, pq.text) for pq in pqs), tokenizer))
    if doc_index is not None:
        texts = docs.texts
        if expand_docs:
            extra: dict[int, list[str]] = {}
            for pq in pqs:
                for d in sorted(pq.source_docs):
                    extra.setdefault(d, []).append(pq.text)
            texts = [" ".join([t, *extra.get(i, [])]) for i, t in enumerate(texts)]
        save_index(doc_index, build_index(enumerate(texts), tokenizer))


def build_store(corpus: Path, pseudo_queries: Path, models: str, k: int, m: int, prf: PrfConfig,
                workers: int) -> ResultStore:
    docs = load_corpus(corpus)
    pqs = load_pseudo_queries(pseudo_queries, docs)
    registry = []
    for model_id, kind, paths in parse_model_specs(models):
        for p in paths:
            _existing(p, "models")
        if kind == "dense":
            doc_vecs = load_embeddings(paths[0])
            pq_vecs = load_embeddings(paths[1]) if len(paths) > 1 else None
            registry.append(ScoreModel(model_id, "dense", docs=doc_vecs, query_vectors=pq_vecs, prf=prf))
        else:
            registry.append(ScoreModel(model_id, "lexical", index=load_index(paths[0])))
    return prepare(pqs, ModelRegistry(registry), OfflineConfig(k=k, m=m), doc_ids=docs.ext_ids, workers=workers)


def do_prepare(corpus: Path, pseudo_queries: Path, store: Path, models: str, k: int, m: int,
               prf: PrfConfig, workers: int) -> dict:
    result = build_store(corpus, pseudo_queries, models, k, m, prf, workers)
    save_store(store, result)
    return result.build_stats


def do_search(store: Path, pq_index: Path, topics: Path, out: Path, timing: Path | None,
              doc_index: Path | None, cfg: OnlineConfig, tag: str) -> None:
    engine = SearchEngine(load_store(store), load_index(pq_index), load_index(doc_index) if doc_index else None)
    run, timings = run_topics(engine, load_topics(topics), cfg, tag)
    write_run(out, run)
    if timing is not None:
        write_timings(timing, timings)


def parse_metrics(spec: str) -> list[tuple[str, str, int]]:
    """``ndcg@10,map,r@1k`` -> [(label, kind, cutoff)]."""
    out = []
    for item in filter(None, (s.strip().lower() for s in spec.split(","))):
        name, _, cut = item.partition("@")
        kind = {"ndcg": "ndcg", "map": "map", "r": "recall", "recall": "recall"}.get(name)
        if kind is None:
            raise UsageError(f"unknown metric {item!r}")
        default = 10 if kind == "ndcg" else 1000
        try:
            cutoff = int(cut[:-1]) * 1000 if cut.endswith("k") else int(cut or default)
        except ValueError:
            raise UsageError(f"bad cutoff in metric {item!r}") from None
        out.append((item, kind, cutoff))
    return out


def do_eval(run_path: Path, qrels_path: Path, metrics: str, threshold: int | None,
            compare: Path | None = None, sig: bool = False, csv_path: Path | None = None) -> str:
    qrels = load_qrels(qrels_path)
    thr = MetricConfig(binarization_threshold=threshold).threshold(qrels)
    runs = {"run": read_run(run_path)}
    if compare is not None:
        runs["compare"] = read_run(compare)
    funcs: dict[str, Callable] = {
        "ndcg": lambda r, c: ndcg_at(r, qrels, c),
        "map": lambda r, c: map_at(r, qrels, c, thr),
        "recall": lambda r, c: recall_at(r, qrels, c, thr),
    }
    rows, csv_rows = [], []
    for label, kind, cutoff in parse_metrics(metrics):
        results = {name: funcs[kind](run, cutoff) for name, run in runs.items()}
        row = [label, results["run"].mean]
        if compare is not None:
            row.append(results["compare"].mean)
            if sig:
                test = paired_ttest(results["run"].per_query, results["compare"].per_query)
                row += [test.t, test.p]
        rows.append(row)
        csv_rows.append(row)
    header = ["metric", "run"] + (["compare"] if compare is not None else []) + (["t", "p"] if sig and compare else [])
    if csv_path is not None:
        with Path(csv_path).open("w", encoding="utf-8") as f:
            f.write(",".join(header) + "\n")
            for row in csv_rows:
                f.write(",".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in row) + "\n")
    return format_table(header, rows)


# --- argument parsing ------------------------------------------------------------


def _tokenizer(args) -> Tokenizer:
    return Tokenizer(stemmer=args.stemmer, stopwords=frozenset() if args.no_stopwords else Tokenizer().stopwords)


def _online_cfg(args) -> OnlineConfig:
    return OnlineConfig(
        s=args.s,
        fuse_original=args.fuse_original,
        softmax_temperature=args.temperature,
        bm25=Bm25Params(args.k1, args.b),
        rm3=Rm3Params(args.fb_docs, args.fb_terms, args.orig_weight) if args.rm3 else None,
        hits=args.hits,
    )


def _add_online(p: argparse.ArgumentParser) -> None:
    p.add_argument("--s", type=int, default=4, help="pseudo-queries matched per query")
    p.add_argument("--temperature", type=float, default=1.0, help="softmax temperature over match scores")
    p.add_argument("--fuse-original", action="store_true", help="fuse a sparse run of the original query")
    p.add_argument("--doc-index", help="document index for --fuse-original")
    p.add_argument("--rm3", action="store_true", help="expand the original query with RM3")
    p.add_argument("--fb-docs", type=int, default=10)
    p.add_argument("--fb-terms", type=int, default=10)
    p.add_argument("--orig-weight", type=float, default=0.5)
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--hits", type=int, default=1000, help="results written per query")


def cmd_index(args) -> int:
    do_index(_existing(args.corpus, "corpus"), _existing(args.pseudo_queries, "pseudo-queries"),
             Path(_required(args.pq_index, "pq-index")), Path(args.doc_index) if args.doc_index else None,
             args.expand_docs, _tokenizer(args))
    return 0


def cmd_synth(args) -> int:
    fixture = generate(args.seed, args.n_docs, args.m, args.dim, args.n_topics, args.query_form_rate)
    paths = fixture.write(_required(args.out, "out"))
    for name, p in paths.items():
        print(f"{name}\t{p}")
    return 0


def cmd_prepare(args) -> int:
    stats = do_prepare(_existing(args.corpus, "corpus"), _existing(args.pseudo_queries, "pseudo-queries"),
                       Path(_required(args.store, "store")), _required(args.models, "models"), args.k, args.m,
                       PrfConfig(args.prf, args.prf_depth), args.workers)
    print(f"prepared in {stats['seconds']:.2f}s ({stats['seconds_per_pq'] * 1e3:.3f} ms per pseudo-query)")
    return 0


def cmd_search(args) -> int:
    cfg = _online_cfg(args)
    doc_index = _existing(args.doc_index, "doc-index") if cfg.fuse_original else None
    do_search(_existing(args.store, "store"), _existing(args.pq_index, "pq-index"), _existing(args.topics, "topics"),
              Path(_required(args.out, "out")), Path(args.timing) if args.timing else None, doc_index, cfg, args.tag)
    return 0


def cmd_eval(args) -> int:
    if args.timing:
        tables = {}
        for item in args.timing:
            name, _, path = item.rpartition("=")
            tables[name or Path(path).stem] = _existing(path, "timing")
        report = latency_report(tables, args.baseline)
        rows = []
        for name, summary in report.items():
            rows.append([name, summary["total_us"]["mean"], summary["total_us"]["p50"], summary["total_us"]["p95"],
                         summary["match_us"]["mean"], summary["aggregate_us"]["mean"],
                         f"{summary['multiple']:.2f}x" if "multiple" in summary else "-"])
        print(format_table(["timing", "mean_us", "p50_us", "p95_us", "match_us", "aggregate_us", "multiple"], rows))
        if not args.run:
            return 0
    compare = _existing(args.compare, "compare") if args.compare else None
    print(do_eval(_existing(args.run, "run"), _existing(args.qrels, "qrels"), args.metrics, args.threshold,
                  compare, args.sig, Path(args.csv) if args.csv else None))
    return 0


def cmd_sweep(args) -> int:
    try:
        values = tuple(int(v) for v in args.values.split(","))
    except (AttributeError, ValueError):
        raise UsageError(f"--values must be comma-separated integers, got {args.values!r}") from None
    spec = SweepSpec(args.param, values)
    cfg = _online_cfg(args)
    store = load_store(_existing(args.store, "store"))
    reprepare = None
    if args.reprepare:
        if spec.parameter != "k_truncation":
            raise UsageError("--reprepare applies to --param k_truncation only")
        corpus = _existing(args.corpus, "corpus")
        pq_path = _existing(args.pseudo_queries, "pseudo-queries")
        models, prf = _required(args.models, "models"), PrfConfig(args.prf, args.prf_depth)

        def reprepare(k: int) -> ResultStore:
            return build_store(corpus, pq_path, models, k, store.m, prf, args.workers)
    records = None
    if spec.parameter == "m_subset":
        records = [(d, t) for _, d, t in read_pseudo_query_lines(_existing(args.pseudo_queries, "pseudo-queries"))]
    assets = SweepAssets(
        store=store,
        pq_index=load_index(_existing(args.pq_index, "pq-index")),
        topics=load_topics(_existing(args.topics, "topics")),
        qrels=load_qrels(_existing(args.qrels, "qrels")),
        online=cfg,
        doc_index=load_index(_existing(args.doc_index, "doc-index")) if cfg.fuse_original else None,
        pq_records=records,
        repetitions=args.repetitions,
        reprepare=reprepare,
    )
    rows = run_sweep(spec, assets)
    if args.out:
        write_sweep_csv(args.out, spec.parameter, rows)
    keys = list(rows[0].metrics)
    print(format_table([spec.parameter, *keys, "mean_latency_us"],
                       [[r.value, *(r.metrics[k] for k in keys), r.mean_latency_us] for r in rows]))
    return 0


def cmd_estimate_storage(args) -> int:
    per_doc = estimate_storage(args.pq_per_doc, args.avg_pq_chars, args.k, args.score_bytes, args.id_bytes)
    print(f"{per_doc:.1f} bytes per document (rounded: {round_half_up(per_doc)})")
    return 0


def _required(value, flag: str):
    if value is None:
        raise UsageError(f"missing required option --{flag}")
    return value


# --- pipeline ----------------------------------------------------------------------


def _file_hash(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Stage:
    name: str
    inputs: list[Path]
    params: dict
    outputs: list[Path]
    run: Callable[[], object]

    def key(self) -> str:
        h = hashlib.sha256(json.dumps(self.params, sort_keys=True, default=str).encode())
        for p in self.inputs:
            h.update(str(p).encode() + b"\0" + _file_hash(p).encode())
        return h.hexdigest()


def _pipeline_stages(args, work: Path) -> list[Stage]:
    corpus = _existing(args.corpus, "corpus")
    pqs = _existing(args.pseudo_queries, "pseudo-queries")
    topics = _existing(args.topics, "topics")
    qrels = _existing(args.qrels, "qrels")
    doc_emb = _existing(args.doc_embeddings, "doc-embeddings")
    pq_emb = _existing(args.pq_embeddings, "pq-embeddings") if args.pq_embeddings else None
    pq_idx, doc_idx = work / "pq.idx", work / "docs.idx"
    store, run, timings, report = work / "store.sto", work / "run.trec", work / "timings.csv", work / "eval.csv"
    tokenizer = _tokenizer(args)
    need_doc_index = args.lexical_model or args.fuse_original
    prf = PrfConfig(args.prf, args.prf_depth)
    models = f"dense:{doc_emb}" + (f":{pq_emb}" if pq_emb else "") + (f",lex:{doc_idx}" if args.lexical_model else "")
    cfg = _online_cfg(args)

    index_out = [pq_idx] + ([doc_idx] if need_doc_index else [])
    prepare_in = [corpus, pqs, doc_emb] + ([pq_emb] if pq_emb else []) + ([doc_idx] if args.lexical_model else [])
    search_in = [store, pq_idx, topics] + ([doc_idx] if cfg.fuse_original else [])
    return [
        Stage("index", [corpus, pqs], {"tokenizer": tokenizer.to_dict(), "doc_index": need_doc_index,
                                       "expand": args.expand_docs}, index_out,
              lambda: do_index(corpus, pqs, pq_idx, doc_idx if need_doc_index else None, args.expand_docs, tokenizer)),
        Stage("prepare", prepare_in, {"k": args.k, "m": args.m, "prf": [prf.mode, prf.depth],
                                      "lexical_model": args.lexical_model}, [store],
              lambda: do_prepare(corpus, pqs, store, models, args.k, args.m, prf, args.workers)),
        Stage("search", search_in, {"online": repr(cfg)}, [run, timings],
              lambda: do_search(store, pq_idx, topics, run, timings, doc_idx if cfg.fuse_original else None, cfg,
                                args.tag)),
        Stage("eval", [run, qrels], {"metrics": args.metrics, "threshold": args.threshold}, [report],
              lambda: print(do_eval(run, qrels, args.metrics, args.threshold, csv_path=report))),
    ]


def cmd_pipeline(args) -> int:
    work = Path(args.work_dir)
    work.mkdir(parents=True, exist_ok=True)
    state_path = work / "pipeline-state.json"
    state = json.loads(state_path.read_text()) if state_path.exists() else {}
    stages = _pipeline_stages(args, work)

    def fresh(stage: Stage) -> bool:
        rec = state.get(stage.name)
        if rec is None or any(not p.exists() for p in stage.inputs + stage.outputs):
            return False
        return rec["key"] == stage.key() and rec["outputs"] == {str(p): _file_hash(p) for p in stage.outputs}

    plan, upstream_runs = {}, False
    for stage in stages:
        plan[stage.name] = "run" if upstream_runs or args.force or not fresh(stage) else "skip"
        upstream_runs |= plan[stage.name] == "run"
    print("plan: " + " ".join(f"{s.name}={plan[s.name]}" for s in stages))

    for stage in stages:
        if plan[stage.name] == "skip":
            print(f"[{stage.name}] up to date")
            continue
        print(f"[{stage.name}] running")
        code = _guarded(stage.run)
        if code:
            print(f"[{stage.name}] failed with exit code {code}", file=sys.stderr)
            return code
        state[stage.name] = {"key": stage.key(), "outputs": {str(p): _file_hash(p) for p in stage.outputs}}
        state_path.write_text(json.dumps(state, indent=2, sort_keys=True))
    return 0


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oprf", description="Single-pass retrieval over precomputed pseudo-query results.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--config", help="key=value defaults file")
        p.set_defaults(func=func)
        return p

    p = add("index", cmd_index, "Build the pseudo-query index and, optionally, a document index.")
    p.add_argument("--corpus", help="documents (TSV or JSONL)")
    p.add_argument("--pseudo-queries", help="doc_id<TAB>text pseudo-query file")
    p.add_argument("--pq-index", help="output pseudo-query index")
    p.add_argument("--doc-index", help="output document index")
    p.add_argument("--expand-docs", action="store_true", help="append each document's pseudo-queries to its text")
    _add_tokenizer(p)

    p = add("synth", cmd_synth, "Write a seeded synthetic fixture.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-docs", type=int, default=200)
    p.add_argument("--m", type=int, default=5, help="pseudo-queries generated per document")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--n-topics", type=int, default=None)
    p.add_argument("--query-form-rate", type=float, default=0.8,
                   help="share of query words using the query-side vocabulary; 0 makes pseudo-queries token subsets")
    p.add_argument("--out", help="output directory")

    p = add("prepare", cmd_prepare, "Compute and store top-k lists for every pseudo-query.")
    p.add_argument("--corpus")
    p.add_argument("--pseudo-queries")
    p.add_argument("--store", help="output store file")
    p.add_argument("--models", help="comma list of [id=]dense:EMB[:PQ_EMB] or [id=]lex:INDEX")
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--m", type=int, default=80, help="generation budget, recorded in the manifest")
    p.add_argument("--prf", choices=["none", "avg"], default="none")
    p.add_argument("--prf-depth", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)

    p = add("search", cmd_search, "Answer topics from a prepared store.")
    p.add_argument("--store")
    p.add_argument("--pq-index")
    p.add_argument("--topics")
    p.add_argument("--out", help="output run file")
    p.add_argument("--timing", help="per-query timing CSV")
    p.add_argument("--tag", default="oprf")
    _add_online(p)

    p = add("eval", cmd_eval, "Score run files; optionally compare two runs and summarize timings.")
    p.add_argument("--run")
    p.add_argument("--qrels")
    p.add_argument("--metrics", default="ndcg@10,map,r@1k")
    p.add_argument("--compare", help="second run for comparison")
    p.add_argument("--sig", action="store_true", help="paired two-tailed t-test against --compare")
    p.add_argument("--threshold", type=int, default=None, help="relevance grade threshold for MAP and recall")
    p.add_argument("--csv", help="also write the table as CSV")
    p.add_argument("--timing", action="append", help="NAME=timings.csv (repeatable)")
    p.add_argument("--baseline", help="timing NAME used for latency multiples")

    p = add("sweep", cmd_sweep, "Evaluate a range of values for s, k_truncation or m_subset.")
    p.add_argument("--param", choices=PARAMETERS, default="s")
    p.add_argument("--values", default="1,2,4,8")
    p.add_argument("--store")
    p.add_argument("--pq-index")
    p.add_argument("--topics")
    p.add_argument("--qrels")
    p.add_argument("--pseudo-queries", help="needed for m_subset and --reprepare")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--reprepare", action="store_true",
                   help="k_truncation: build a fresh store per value instead of truncating the stored lists")
    p.add_argument("--corpus", help="needed for --reprepare")
    p.add_argument("--models", help="model list for --reprepare, as in prepare")
    p.add_argument("--prf", choices=["none", "avg"], default="none")
    p.add_argument("--prf-depth", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV output")
    _add_online(p)

    p = add("pipeline", cmd_pipeline, "Run index, prepare, search and eval, skipping up-to-date stages.")
    p.add_argument("--work-dir", default="oprf-work")
    p.add_argument("--corpus")
    p.add_argument("--pseudo-queries")
    p.add_argument("--topics")
    p.add_argument("--qrels")
    p.add_argument("--doc-embeddings")
    p.add_argument("--pq-embeddings")
    p.add_argument("--lexical-model", action="store_true", help="add a BM25 model over expanded documents")
    p.add_argument("--expand-docs", action="store_true")
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--m", type=int, default=80)
    p.add_argument("--prf", choices=["none", "avg"], default="none")
    p.add_argument("--prf-depth", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tag", default="oprf")
    p.add_argument("--metrics", default="ndcg@10,map,r@1k")
    p.add_argument("--threshold", type=int, default=None)
    p.add_argument("--force", action="store_true", help="rerun every stage")
    _add_tokenizer(p)
    _add_online(p)

    p = add("estimate-storage", cmd_estimate_storage, "Bytes per document of a result store.")
    p.add_argument("--pq-per-doc", type=float, default=45.0)
    p.add_argument("--avg-pq-chars", type=float, default=34.0)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--score-bytes", type=int, default=4)
    p.add_argument("--id-bytes", type=int, default=4)
    return parser


def _add_tokenizer(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stemmer", choices=["porter", "none"], default="porter")
    p.add_argument("--no-stopwords", action="store_true")


def _guarded(fn: Callable[[], object]) -> int:
    try:
        result = fn()
    except (UsageError, FormatError) as exc:
        print(f"oprf: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"oprf: error: {exc}", file=sys.stderr)
        return 1
    return result if isinstance(result, int) else 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.config:
        try:
            config = read_config(args.config)
        except UsageError as exc:
            print(f"oprf: error: {exc}", file=sys.stderr)
            return 2
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        _apply_config(subparser, config)
        args = parser.parse_args(argv)
    return _guarded(lambda: args.func(args))


if __name__ == "__main__":
    sys.exit(main())
