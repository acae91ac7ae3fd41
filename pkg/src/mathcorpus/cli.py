"""Operator command line: ingest, search, evaluate, extract, link, serve.

Exit codes: 0 success, 1 user error (bad input, missing files), 2 internal
error. Settings resolve flag > environment (MATHCORPUS_*) > config file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import benchmark as bench_mod
from . import extract as extract_mod
from . import index as index_mod
from . import ingest as ingest_mod
from .config import ConfigError, env_key, load_config_file, resolve_setting
from .model import Corpus

SNAPSHOT_FILENAME = "index.snapshot"

USER_ERRORS = (
    ConfigError,
    ingest_mod.ConlluParseError,
    ingest_mod.ManifestError,
    ingest_mod.MathNormalizationError,
    index_mod.IndexBuildError,
    index_mod.QueryError,
    index_mod.SnapshotError,
    bench_mod.EvaluationError,
    bench_mod.RecordFormatError,
    extract_mod.ExtractionError,
    OSError,
    ValueError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mathcorpus",
        description="Corpus workbench for mathematical language",
    )
    parser.add_argument("--config", help="flat key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse sources into the corpus store")
    p_ingest.add_argument("--corpus-id", required=True)
    p_ingest.add_argument("--input", required=True, nargs="+", help="source files")
    p_ingest.add_argument("--out", required=True, help="manifest path (store directory)")
    p_ingest.add_argument("--filter-rules", help="title filter rule file")
    p_ingest.add_argument("--math-rules", help="math rewrite rule file")
    p_ingest.add_argument(
        "--raw", action="store_true", help="treat inputs as markdown/plain text"
    )

    p_search = sub.add_parser("search", help="phrase search over the index snapshot")
    p_search.add_argument("--q", required=True, help="query phrase")
    p_search.add_argument("--corpora", help="comma-separated corpus ids")
    p_search.add_argument("--snapshot", help=f"index snapshot (default {SNAPSHOT_FILENAME})")
    p_search.add_argument("--kb", help="fixture KB file for entity cards")
    p_search.add_argument("--class-graph", help="class graph for the fixture KB")

    p_eval = sub.add_parser("evaluate", help="score predictions against gold files")
    p_eval.add_argument("--task", required=True, choices=("terms", "definitions", "linking"))
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--gold", required=True, nargs="+")
    p_eval.add_argument(
        "--per-benchmark",
        action="store_true",
        help="one row per gold file plus a combined row (terms only)",
    )

    p_extract = sub.add_parser("extract", help="run terminology extraction")
    p_extract.add_argument("--method", required=True, choices=("mwe", "textrank"))
    p_extract.add_argument("--manifest", required=True)
    p_extract.add_argument("--corpus-id", required=True)
    p_extract.add_argument("--min-freq", type=int, default=2)
    p_extract.add_argument("--max-len", type=int, default=5)
    p_extract.add_argument("--window", type=int, default=2)
    p_extract.add_argument("--damping", type=float, default=0.85)
    p_extract.add_argument("--tol", type=float, default=1e-6)
    p_extract.add_argument("--max-iter", type=int, default=100)
    p_extract.add_argument("--keep-ratio", type=float, default=1.0 / 3.0)
    p_extract.add_argument("--out", help="write terms here instead of stdout")

    p_link = sub.add_parser("link", help="link concept phrases to KB entities")
    p_link.add_argument("--concepts", required=True, help="one phrase per line")
    p_link.add_argument("--mode", required=True, choices=("fixture", "live"))
    p_link.add_argument("--kb", help="fixture KB file")
    p_link.add_argument("--class-graph", help="fixture class graph file")
    p_link.add_argument("--endpoint", help="live SPARQL endpoint URL")
    p_link.add_argument("--retry-budget", type=int, default=2)
    p_link.add_argument("--out", help="write predictions here instead of stdout")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)
    p_serve.add_argument("--manifest")

    return parser


def _load_config(args) -> tuple[dict[str, str], Path | None]:
    if args.config:
        path = Path(args.config)
        return load_config_file(path), path.parent
    return {}, None


def _config_path(
    name: str,
    flag_value: str | None,
    config: dict[str, str],
    config_dir: Path | None,
    default: str | None = None,
) -> Path | None:
    """Resolve a path setting; config-file values are relative to the file."""
    if flag_value is not None:
        return Path(flag_value)
    env_value = os.environ.get(env_key(name))
    if env_value is not None:
        return Path(env_value)
    if name in config:
        value = Path(config[name])
        if not value.is_absolute() and config_dir is not None:
            return config_dir / value
        return value
    return Path(default) if default is not None else None


def _cmd_ingest(args, config, config_dir) -> int:
    manifest_path = Path(args.out)
    store_dir = manifest_path.parent
    store_dir.mkdir(parents=True, exist_ok=True)

    filter_rules = (
        ingest_mod.load_filter_rules(args.filter_rules)
        if args.filter_rules
        else ingest_mod.DEFAULT_FILTER_RULES
    )
    math_rules = (
        ingest_mod.load_math_rules(args.math_rules) if args.math_rules else None
    )

    documents = []
    annotated = True
    for input_path in args.input:
        path = Path(input_path)
        if args.raw or path.suffix.lower() in (".md", ".markdown", ".txt"):
            annotated = False
            doc = ingest_mod.document_from_markdown(
                doc_id=path.stem,
                corpus_id=args.corpus_id,
                source=path.read_text(encoding="utf-8"),
                title=path.stem,
                math_rules=math_rules,
            )
            documents.append(doc)
        else:
            with open(path, encoding="utf-8") as handle:
                try:
                    documents.extend(ingest_mod.parse_conllu(handle, args.corpus_id))
                except ingest_mod.ConlluParseError as exc:
                    raise ingest_mod.ConlluParseError(f"{path}: {exc}") from None

    kept = []
    dropped = 0
    for doc in documents:
        reason = ingest_mod.filter_document(doc, filter_rules)
        if reason is None:
            kept.append(doc)
        else:
            dropped += 1
            print(f"dropped {doc.id}: {reason}", file=sys.stderr)

    corpus_file = f"{args.corpus_id}.conllu"
    (store_dir / corpus_file).write_text(
        ingest_mod.serialize_conllu(kept), encoding="utf-8"
    )

    entries = {
        e.id: e
        for e in (
            ingest_mod.load_manifest(manifest_path) if manifest_path.exists() else []
        )
    }
    entries[args.corpus_id] = ingest_mod.ManifestEntry(
        id=args.corpus_id,
        paths=(corpus_file,),
        annotated=annotated,
        documents=len(kept),
        sentences=sum(len(d.sentences) for d in kept),
    )
    ordered = [entries[k] for k in sorted(entries)]
    ingest_mod.save_manifest(ordered, manifest_path)

    corpora = [ingest_mod.load_corpus(e, store_dir) for e in ordered]
    idx = index_mod.build_index(corpora, _display_order(config))
    index_mod.save_index(idx, store_dir / SNAPSHOT_FILENAME)

    for entry in ordered:
        marker = "annotated" if entry.annotated else "raw"
        print(
            f"{entry.id}: {entry.documents} documents, {entry.sentences} sentences ({marker})"
        )
    if dropped:
        print(f"dropped {dropped} document(s)")
    return 0


def _display_order(config: dict[str, str]) -> tuple[str, ...]:
    value = resolve_setting("display_order", None, config)
    if value:
        return tuple(part.strip() for part in value.split(",") if part.strip())
    return index_mod.DEFAULT_DISPLAY_ORDER


def render_sentence(surfaces: tuple[str, ...], spans: tuple[tuple[int, int], ...]) -> str:
    """Join surfaces with ** emphasis around each highlighted token span."""
    words = list(surfaces)
    for start, end in spans:
        words[start - 1] = "**" + words[start - 1]
        words[end - 2] = words[end - 2] + "**"
    return " ".join(words)


def _cmd_search(args, config, config_dir) -> int:
    snapshot = _config_path(
        "snapshot", args.snapshot, config, config_dir, SNAPSHOT_FILENAME
    )
    idx = index_mod.load_index(snapshot)
    requested = (
        sorted({c.strip() for c in args.corpora.split(",") if c.strip()})
        if args.corpora
        else list(idx.corpus_ids)
    )
    hits = index_mod.search(idx, args.q, requested)
    requested.sort(key=idx.corpus_order)

    lines = [f"query: {args.q}", ""]

    kb_path = _config_path("kb", args.kb, config, config_dir)
    graph_path = _config_path("class_graph", args.class_graph, config, config_dir)
    from .service import encyclopedia_cards  # deferred: pulls in fastapi

    lines.append("entities:")
    if kb_path is not None and graph_path is not None:
        from .linker import FixtureKBClient, link_concept

        client = FixtureKBClient(kb_path, graph_path)
        url_template = resolve_setting(
            "entity_url_template", None, config, "https://www.wikidata.org/wiki/{id}"
        )
        for card in link_concept(args.q, client):
            url = url_template.format(id=card.kb_id)
            lines.append(f"  [kb] {card.label} ({card.kb_id}) via {card.matched_via}  {url}")
    for enc in encyclopedia_cards(idx, args.q):
        lines.append(f"  [encyclopedia] {enc['label']} ({enc['corpus_id']})  {enc['url']}")
    if lines[-1] == "entities:":
        lines.append("  (none)")
    lines.append("")

    for corpus_id in requested:
        lines.append(f"[{corpus_id}]")
        corpus_hits = [h for h in hits if h.corpus_id == corpus_id]
        if not corpus_hits:
            lines.append("(no results)")
            lines.append("")
            continue
        current_doc = None
        for hit in corpus_hits:
            if hit.doc_id != current_doc:
                current_doc = hit.doc_id
                title = hit.doc_title or hit.doc_id
                suffix = f"  {hit.source_url}" if hit.source_url else ""
                lines.append(f"{hit.doc_id}: {title}{suffix}")
            surfaces = idx.documents[(hit.corpus_id, hit.doc_id)].sentences[hit.sentence].surfaces
            lines.append(f"  ({hit.sentence}) {render_sentence(surfaces, hit.spans)}")
        lines.append("")
    sys.stdout.write("\n".join(lines).rstrip("\n") + "\n")
    return 0


_KIND_FALLBACK = "glossary"


def _term_kind(path: Path) -> str:
    stem = path.stem.lower()
    for kind in bench_mod.TERM_BENCHMARK_KINDS:
        if kind in stem:
            return kind
    return _KIND_FALLBACK


def _cmd_evaluate(args, config, config_dir) -> int:
    rows: list[tuple[str, bench_mod.MetricsReport]] = []
    p_at_1 = args.task == "linking"
    if args.task == "terms":
        pred = bench_mod.load_term_benchmark(args.pred, _term_kind(Path(args.pred)))
        golds = [
            (Path(g).stem, bench_mod.load_term_benchmark(g, _term_kind(Path(g))))
            for g in args.gold
        ]
        if args.per_benchmark:
            for name, gold in golds:
                rows.append((name, bench_mod.eval_terms(pred, gold)))
        combined = frozenset().union(*(g.terms for _, g in golds))
        combined_set = extract_mod.TermSet(
            terms=combined, normalization=golds[0][1].normalization, kind="combined"
        )
        name = "combined" if (args.per_benchmark or len(golds) > 1) else golds[0][0]
        rows.append((name, bench_mod.eval_terms(pred, combined_set)))
    elif args.task == "definitions":
        if len(args.gold) != 1:
            raise ValueError("definitions task takes exactly one gold file")
        pred = bench_mod.load_definitions(args.pred)
        gold = bench_mod.load_definitions(args.gold[0])
        rows.append(("definitions", bench_mod.eval_definitions(pred, gold)))
    else:
        if len(args.gold) != 1:
            raise ValueError("linking task takes exactly one gold file")
        predictions = bench_mod.load_link_predictions(args.pred)
        gold = bench_mod.load_link_gold(args.gold[0])
        rows.append(("linking", bench_mod.eval_linking(predictions, gold)))
    sys.stdout.write(bench_mod.render_metrics_table(rows, p_at_1=p_at_1))
    return 0


def _cmd_extract(args, config, config_dir) -> int:
    manifest_path = Path(args.manifest)
    entries = {e.id: e for e in ingest_mod.load_manifest(manifest_path)}
    if args.corpus_id not in entries:
        raise ValueError(f"corpus {args.corpus_id!r} not in manifest {manifest_path}")
    corpus: Corpus = ingest_mod.load_corpus(entries[args.corpus_id], manifest_path.parent)
    if args.method == "mwe":
        term_set = extract_mod.extract_mwe(corpus, args.min_freq, args.max_len)
        out_lines = sorted(term_set.terms)
    else:
        ranked = extract_mod.textrank(
            corpus,
            window=args.window,
            damping=args.damping,
            tol=args.tol,
            max_iter=args.max_iter,
            keep_ratio=args.keep_ratio,
        )
        out_lines = [f"{t.phrase}\t{t.score:.6f}" for t in ranked]
    text = "\n".join(out_lines) + ("\n" if out_lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_link(args, config, config_dir) -> int:
    from . import linker as linker_mod

    concepts = [
        line.strip()
        for line in Path(args.concepts).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if args.mode == "fixture":
        kb_path = _config_path("kb", args.kb, config, config_dir)
        graph_path = _config_path("class_graph", args.class_graph, config, config_dir)
        if kb_path is None or graph_path is None:
            raise ValueError("fixture mode needs --kb and --class-graph")
        client: linker_mod.KBClient = linker_mod.FixtureKBClient(kb_path, graph_path)
    else:
        endpoint = resolve_setting(
            "endpoint", args.endpoint, config, linker_mod.DEFAULT_SPARQL_ENDPOINT
        )
        client = linker_mod.SparqlKBClient(endpoint)
    run = linker_mod.link_all(concepts, client, retry_budget=args.retry_budget)
    payload = "\n".join(
        json.dumps(
            {"concept": p.concept, "ranked_ids": list(p.ranked_ids)}, ensure_ascii=False
        )
        for p in run.predictions
    )
    payload = payload + ("\n" if payload else "")
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    print(
        f"link: {len(concepts)} concepts, {run.client_calls} client calls, "
        f"{run.cache_hits} cache hits, {run.retries} retries, "
        f"{len(run.warnings)} warnings",
        file=sys.stderr,
    )
    for warning in run.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _cmd_serve(args, config, config_dir) -> int:
    import uvicorn

    from .service import ServiceSettings, create_app

    manifest = _config_path("manifest", args.manifest, config, config_dir)
    if manifest is None:
        raise ValueError("serve needs a manifest (flag --manifest or config key)")
    kb = _config_path("kb", None, config, config_dir)
    graph = _config_path("class_graph", None, config, config_dir)
    settings = ServiceSettings(
        manifest=manifest,
        linker_mode=resolve_setting("linker_mode", None, config, "off") or "off",
        kb=kb,
        class_graph=graph,
        endpoint=resolve_setting("endpoint", None, config),
        display_order=_display_order(config),
        sentence_cap=int(resolve_setting("sentence_cap", None, config, "50") or 50),
        host=resolve_setting("host", args.host, config, "127.0.0.1") or "127.0.0.1",
        port=int(resolve_setting("port", str(args.port) if args.port else None, config, "8900") or 8900),
    )
    app = create_app(settings)
    uvicorn.run(app, host=settings.host, port=settings.port, log_level="warning")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "search": _cmd_search,
    "evaluate": _cmd_evaluate,
    "extract": _cmd_extract,
    "link": _cmd_link,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        config, config_dir = _load_config(args)
        return _COMMANDS[args.command](args, config, config_dir)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
