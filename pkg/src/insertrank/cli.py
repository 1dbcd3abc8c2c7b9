"""Command-line entry point: ``insertrank {index,retrieve,rerank,eval,ablate,hyde}``.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__
from .bm25 import (
    Bm25Params,
    IndexFormatError,
    ScoredCandidate,
    build_index,
    load_index,
    retrieve_topk,
    save_index,
)
from .corpus import DataFormatError, attach_reformulations, load_corpus, load_qrels, load_queries
from .eval import AblationCell, ablation_table, evaluate_run, read_run, write_run
from .llm import LLMError, OpenAICompatibleProvider, load_registry, mock_provider
from .rerank import (
    HYDE_TEMPLATE,
    OrderMode,
    RerankConfig,
    ScoreMode,
    hyde_reformulate,
    rerank_queries,
    write_raw_response,
)

logger = logging.getLogger("insertrank")

DEFAULT_CACHE_DIR = ".insertrank-cache"
MOCK_PREFIX = "mock-"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# -- helpers --------------------------------------------------------------------

def _load_queries(path, reformulations=None):
    queries = load_queries(path)
    if reformulations:
        queries = attach_reformulations(queries, reformulations)
    return queries


def make_provider(name: str, *, qrels_path=None, script_path=None, registry_path=None):
    if name.startswith(MOCK_PREFIX):
        kind = name[len(MOCK_PREFIX):]
        if kind == "oracle":
            if not qrels_path:
                raise UsageError("mock-oracle needs --qrels")
            return mock_provider("oracle", {"qrels": load_qrels(qrels_path)})
        if kind == "scripted":
            if not script_path:
                raise UsageError("mock-scripted needs --script")
            responses = json.loads(Path(script_path).read_text(encoding="utf-8"))
            return mock_provider("scripted", {"responses": [str(r) for r in responses]})
        try:
            return mock_provider(kind)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    registry = load_registry(registry_path)
    if name not in registry:
        raise UsageError(f"unknown provider {name!r}; known: {sorted(registry)} or mock-*")
    return OpenAICompatibleProvider(registry[name])


def _order_mode(order: str, seed: int | None) -> OrderMode:
    if order == "shuffle":
        if seed is None:
            raise UsageError("--order shuffle requires --seed")
        return OrderMode.shuffle(seed)
    return OrderMode.bm25_desc()


def _config_header(command: str, settings: dict) -> list[str]:
    lines = [f"insertrank {__version__} {command}"]
    lines += [f"{k}={settings[k]}" for k in sorted(settings)]
    return lines


def run_to_candidates(run, n: int) -> dict[str, list[ScoredCandidate]]:
    return {
        qid: [ScoredCandidate(d, s, r) for r, (d, s) in enumerate(entries[:n], 1)]
        for qid, entries in run.items()
    }


def write_outcomes(path, outcomes, raw_root) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for o in outcomes:
            raw_path = write_raw_response(raw_root, o)
            fh.write(json.dumps({
                "query_id": o.query_id,
                "prompt_digest": o.prompt_digest,
                "repairs": o.repairs,
                "raw_response_path": str(raw_path) if raw_path else None,
            }, ensure_ascii=False) + "\n")


# -- commands -------------------------------------------------------------------

def cmd_index(args) -> int:
    started = time.perf_counter()
    corpus = load_corpus(args.corpus)
    index = build_index(corpus, Bm25Params(args.k1, args.b))
    save_index(index, args.out)
    elapsed = time.perf_counter() - started
    print(f"documents\t{index.N}")
    print(f"avgdl\t{index.avgdl:.4f}")
    print(f"build_seconds\t{elapsed:.3f}")
    return 0


def cmd_retrieve(args) -> int:
    index = load_index(args.index)
    queries = _load_queries(args.queries, args.reformulations)
    use_reformulated = args.query_text == "reformulated"
    run = {
        q.query_id: [(c.doc_id, c.score) for c in retrieve_topk(index, q, args.k, use_reformulated)]
        for q in queries
    }
    header = _config_header("retrieve", {
        "index": args.index, "queries": args.queries, "k": args.k,
        "reformulations": args.reformulations, "query_text": args.query_text,
        "k1": index.params.k1, "b": index.params.b,
    })
    write_run(run, args.out, "bm25", header)
    logger.info("wrote %d queries to %s", len(run), args.out)
    return 0


def cmd_rerank(args) -> int:
    order = _order_mode(args.order, args.seed)
    provider = make_provider(args.provider, qrels_path=args.qrels, script_path=args.script,
                             registry_path=args.providers_config)
    config = RerankConfig(
        score_mode=ScoreMode(args.score_mode),
        order_mode=order,
        topk=args.topk,
        max_doc_tokens=args.max_doc_tokens,
        template=args.template,
        use_reformulated=args.query_text == "reformulated",
    )
    index = load_index(args.index)
    queries = _load_queries(args.queries, args.reformulations)
    candidates = run_to_candidates(read_run(args.run), args.candidates)
    for qid, cands in candidates.items():
        for c in cands:
            if c.doc_id not in index.corpus:
                raise DataError(f"run document {c.doc_id!r} (query {qid}) is not in the index")
    batch = rerank_queries(
        queries, candidates, index.corpus, config, provider,
        model=args.model, cache_dir=args.cache_dir, concurrency=args.concurrency,
        temperature=args.temperature, max_output_tokens=args.max_output_tokens,
    )
    header = _config_header("rerank", {
        "index": args.index, "queries": args.queries, "run": args.run,
        "reformulations": args.reformulations, "provider": args.provider, "model": args.model,
        "score_mode": config.score_mode.value, "order": order.label, "topk": config.topk,
        "candidates": args.candidates, "max_doc_tokens": args.max_doc_tokens,
        "template": config.template, "query_text": args.query_text,
        "temperature": args.temperature,
    })
    write_run(batch.run, args.out, config.run_tag, header)
    outcomes_path = args.outcomes or f"{args.out}.outcomes.jsonl"
    write_outcomes(outcomes_path, batch.outcomes, args.cache_dir or Path(args.out).parent)
    cached = sum(o.cached for o in batch.outcomes)
    logger.info("reranked %d queries (%d from cache), %d failed",
                len(batch.outcomes), cached, len(batch.failures))
    for qid, exc in batch.failures.items():
        print(f"failed\t{qid}\t{exc}", file=sys.stderr)
    return 1 if batch.failures else 0


def cmd_eval(args) -> int:
    run = read_run(args.run)
    qrels = load_qrels(args.qrels)
    report = evaluate_run(run, qrels, args.k, gain=args.gain)
    for qid in report.missing:
        print(f"warning: query {qid} has no run entries (scored 0)", file=sys.stderr)
    print(f"ndcg@{args.k} {report.mean:.4f}")
    if args.per_query:
        lines = [f"{qid}\t{v:.4f}" for qid, v in report.per_query.items()]
        text = "".join(line + "\n" for line in lines)
        if args.per_query == "-":
            sys.stdout.write(text)
        else:
            Path(args.per_query).write_text(text, encoding="utf-8")
    return 0


def setting_label(score_mode: ScoreMode, order: OrderMode, show_seed: bool = False) -> str:
    if order.kind == "bm25_desc":
        return {
            ScoreMode.NONE: "Vanilla",
            ScoreMode.RAW: "Raw BM25",
            ScoreMode.NORM01: "0-1 scale",
            ScoreMode.NORM0100: "0-100 scale",
        }[score_mode]
    label = {
        ScoreMode.NONE: "Shuffled",
        ScoreMode.RAW: "Shuffled w/ BM25",
        ScoreMode.NORM01: "Shuffled w/ BM25 (0-1)",
        ScoreMode.NORM0100: "Shuffled w/ BM25 (0-100)",
    }[score_mode]
    return f"{label} [seed {order.seed}]" if show_seed else label


def _read_toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_ablation_config(path) -> dict:
    """Parse and validate an ablation TOML file; paths resolve next to it."""
    try:
        raw = _read_toml(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    base = Path(path).resolve().parent

    def resolve(p):
        return None if p is None else str((base / p) if not Path(p).is_absolute() else Path(p))

    abl = raw.get("ablation", {})
    score_modes = abl.get("score_modes", [])
    orders = abl.get("orders", [])
    seeds = abl.get("seeds", [])
    if not score_modes or not orders:
        raise UsageError("ablation needs non-empty 'score_modes' and 'orders'")
    try:
        score_modes = [ScoreMode(m) for m in score_modes]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for o in orders:
        if o not in ("bm25_desc", "shuffle"):
            raise UsageError(f"unknown order {o!r}")
    if "shuffle" in orders and not seeds:
        raise UsageError("shuffle order requires 'seeds'")
    splits = raw.get("splits", [])
    if not splits:
        raise UsageError("config needs at least one [[splits]] table")
    for s in splits:
        for key in ("name", "corpus", "queries", "qrels"):
            if key not in s:
                raise UsageError(f"split is missing {key!r}")
        for key in ("corpus", "queries", "qrels", "reformulations"):
            if s.get(key) is not None:
                s[key] = resolve(s[key])
                if not Path(s[key]).exists():
                    raise UsageError(f"split {s['name']}: {key} path {s[key]} does not exist")
    llm = raw.get("llm", {})
    out = {
        "output_dir": resolve(raw.get("output_dir", "ablation-out")),
        "provider": llm.get("provider", "mock-identity"),
        "model": llm.get("model", "mock"),
        "cache_dir": resolve(llm.get("cache_dir", DEFAULT_CACHE_DIR)),
        "concurrency": int(llm.get("concurrency", 4)),
        "temperature": float(llm.get("temperature", 0.0)),
        "max_output_tokens": llm.get("max_output_tokens"),
        "providers_config": resolve(llm.get("providers_config")),
        "script": resolve(llm.get("script")),
        "k1": float(raw.get("bm25", {}).get("k1", 0.9)),
        "b": float(raw.get("bm25", {}).get("b", 0.4)),
        "candidates": int(raw.get("retrieval", {}).get("candidates", 100)),
        "topk": int(raw.get("rerank", {}).get("topk", 10)),
        "template": raw.get("rerank", {}).get("template", "bright"),
        "max_doc_tokens": raw.get("rerank", {}).get("max_doc_tokens"),
        "query_text": raw.get("rerank", {}).get("query_text", "reformulated"),
        "eval_k": int(raw.get("rerank", {}).get("eval_k", 10)),
        "score_modes": score_modes,
        "orders": orders,
        "seeds": [int(s) for s in seeds],
        "splits": splits,
    }
    return out


def cmd_ablate(args) -> int:
    cfg = load_ablation_config(args.config)
    for key in ("output_dir", "cache_dir", "provider", "model", "concurrency"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            cfg[key] = value
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    settings: list[tuple[ScoreMode, OrderMode]] = []
    for order in cfg["orders"]:
        seeds = cfg["seeds"] if order == "shuffle" else [None]
        for seed in seeds:
            mode = OrderMode.shuffle(seed) if order == "shuffle" else OrderMode.bm25_desc()
            for sm in cfg["score_modes"]:
                settings.append((sm, mode))
    multi_seed = len(cfg["seeds"]) > 1

    header = _config_header("ablate", {
        k: v for k, v in cfg.items() if k not in ("splits", "score_modes", "seeds", "orders")
    } | {
        "score_modes": ",".join(m.value for m in cfg["score_modes"]),
        "orders": ",".join(cfg["orders"]),
        "seeds": ",".join(map(str, cfg["seeds"])),
        "splits": ",".join(s["name"] for s in cfg["splits"]),
    })

    cells: list[AblationCell] = []
    any_failed = False
    for split in cfg["splits"]:
        name = split["name"]
        split_dir = out_dir / name
        split_dir.mkdir(parents=True, exist_ok=True)
        corpus = load_corpus(split["corpus"])
        queries = _load_queries(split["queries"], split.get("reformulations"))
        qrels_path = split["qrels"]
        qrels = load_qrels(qrels_path)
        index = build_index(corpus, Bm25Params(cfg["k1"], cfg["b"]))
        use_ref = cfg["query_text"] == "reformulated"
        first = {
            q.query_id: retrieve_topk(index, q, cfg["candidates"], use_ref) for q in queries
        }
        write_run({q: [(c.doc_id, c.score) for c in cs] for q, cs in first.items()},
                  split_dir / "bm25.run", "bm25", header)
        provider = make_provider(cfg["provider"], qrels_path=qrels_path, script_path=cfg["script"],
                                 registry_path=cfg["providers_config"])
        for score_mode, order in settings:
            label = setting_label(score_mode, order, multi_seed)
            rc = RerankConfig(
                score_mode=score_mode, order_mode=order, topk=cfg["topk"],
                max_doc_tokens=cfg["max_doc_tokens"], template=cfg["template"],
                use_reformulated=use_ref,
            )
            batch = rerank_queries(
                queries, first, corpus, rc, provider,
                model=cfg["model"], cache_dir=cfg["cache_dir"], concurrency=cfg["concurrency"],
                temperature=cfg["temperature"], max_output_tokens=cfg["max_output_tokens"],
            )
            slug = f"{score_mode.value}.{order.label}"
            write_run(batch.run, split_dir / f"{slug}.run", rc.run_tag, header)
            write_outcomes(split_dir / f"{slug}.outcomes.jsonl", batch.outcomes, cfg["cache_dir"])
            if batch.failures:
                any_failed = True
                logger.error("split %s setting %s: %d queries failed",
                             name, label, len(batch.failures))
                cells.append(AblationCell(name, label, None))
                continue
            report = evaluate_run(batch.run, qrels, cfg["eval_k"], rc.run_tag)
            cells.append(AblationCell(name, label, report))

    table = ablation_table(cells)
    (out_dir / "ablation.tsv").write_text(table.to_tsv(header), encoding="utf-8")
    (out_dir / "ablation.txt").write_text(table.to_text(), encoding="utf-8")
    sys.stdout.write(table.to_text())
    return 1 if any_failed else 0


def cmd_hyde(args) -> int:
    provider = make_provider(args.provider, script_path=args.script,
                             registry_path=args.providers_config)
    queries = load_queries(args.queries)

    def one(q):
        text = hyde_reformulate(q, provider, model=args.model, cache_dir=args.cache_dir,
                                template=args.template, temperature=args.temperature)
        return q.query_id, " ".join(text.split())

    with ThreadPoolExecutor(max_workers=max(1, args.concurrency)) as pool:
        rows = list(pool.map(one, queries))
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for qid, text in rows:
            fh.write(f"{qid}\t{text}\n")
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="insertrank", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("index", help="build a BM25 index file from a JSONL corpus")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--k1", type=float, default=0.9)
    s.add_argument("--b", type=float, default=0.4)
    s.set_defaults(func=cmd_index)

    def query_args(s):
        s.add_argument("--queries", required=True)
        s.add_argument("--reformulations", help="TSV of query_id<TAB>reformulated text")
        s.add_argument("--query-text", choices=("reformulated", "original"),
                       default="reformulated",
                       help="text used when a reformulation exists (default: reformulated)")

    s = sub.add_parser("retrieve", help="first-stage BM25 retrieval to a TREC run")
    s.add_argument("--index", required=True)
    query_args(s)
    s.add_argument("--k", type=int, default=100)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_retrieve)

    def llm_args(s):
        s.add_argument("--provider", required=True,
                       help="openai, deepseek, gemini, a configured name, or mock-{identity,reverse,oracle,scripted}")
        s.add_argument("--model", required=True)
        s.add_argument("--providers-config", help="TOML file with [providers.<name>] tables")
        s.add_argument("--cache-dir", default=DEFAULT_CACHE_DIR)
        s.add_argument("--concurrency", type=int, default=4)
        s.add_argument("--temperature", type=float, default=0.0)
        s.add_argument("--max-output-tokens", type=int)
        s.add_argument("--script", help="JSON list of responses for mock-scripted")

    s = sub.add_parser("rerank", help="listwise LLM reranking of a first-stage run")
    s.add_argument("--index", required=True)
    query_args(s)
    s.add_argument("--run", required=True)
    llm_args(s)
    s.add_argument("--score-mode", choices=[m.value for m in ScoreMode], default="raw")
    s.add_argument("--order", choices=("bm25_desc", "shuffle"), default="bm25_desc")
    s.add_argument("--seed", type=int)
    s.add_argument("--topk", type=int, default=10)
    s.add_argument("--candidates", type=int, default=100, help="candidate pool size n")
    s.add_argument("--max-doc-tokens", type=int)
    s.add_argument("--template", choices=("bright", "r2med"), default="bright")
    s.add_argument("--qrels", help="judgments for mock-oracle")
    s.add_argument("--out", required=True)
    s.add_argument("--outcomes", help="outcome log path (default: <out>.outcomes.jsonl)")
    s.set_defaults(func=cmd_rerank)

    s = sub.add_parser("eval", help="NDCG@k of a run against qrels")
    s.add_argument("--run", required=True)
    s.add_argument("--qrels", required=True)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--gain", choices=("linear", "exponential"), default="linear")
    s.add_argument("--per-query", metavar="PATH", help="write per-query TSV ('-' for stdout)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("ablate", help="run a score-mode x order sweep and tabulate NDCG")
    s.add_argument("--config", required=True)
    s.add_argument("--output-dir")
    s.add_argument("--cache-dir")
    s.add_argument("--provider")
    s.add_argument("--model")
    s.add_argument("--concurrency", type=int)
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("hyde", help="generate HyDE reformulations as a TSV")
    s.add_argument("--queries", required=True)
    llm_args(s)
    s.add_argument("--template", default=HYDE_TEMPLATE)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_hyde)
    return p


def _validate(args, parser) -> None:
    for name in ("k", "topk", "candidates", "max_doc_tokens", "concurrency"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            parser.error(f"--{name.replace('_', '-')} must be >= 1")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    _validate(args, parser)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"insertrank: error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, IndexFormatError, DataError, LLMError, OSError, ValueError) as exc:
        print(f"insertrank: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
