"""Read-only HTTP facade over the index and the linker.

GET /api/search?q=...&corpora=a,b   search with entity cards and highlights
GET /api/corpora                    indexed corpora with counts
GET /api/health                     status, index build time, linker mode

Responses are JSON with schema_version 1. There are no write endpoints; the
index is swapped atomically by reload() on the holder.
"""

from __future__ import annotations

import datetime as _dt
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import index as index_mod
from . import ingest as ingest_mod
from .index import DEFAULT_DISPLAY_ORDER, LemmaIndex, QueryError, SearchHit
from .linker import (
    DEFAULT_ENTITY_URL_TEMPLATE,
    DEFAULT_EXCLUSIONS,
    DEFAULT_SPARQL_ENDPOINT,
    ConceptLinker,
    ExclusionList,
    FixtureKBClient,
    LinkingError,
    SparqlKBClient,
)

SCHEMA_VERSION = 1

DISPLAY_NAMES = {"tac": "TAC", "nlab": "nLab", "bct": "BCT"}

DEFAULT_SENTENCE_CAP = 50


@dataclass
class ServiceSettings:
    manifest: Path
    linker_mode: str = "fixture"  # "fixture" | "live" | "off"
    kb: Path | None = None
    class_graph: Path | None = None
    endpoint: str | None = None
    display_order: tuple[str, ...] = DEFAULT_DISPLAY_ORDER
    sentence_cap: int = DEFAULT_SENTENCE_CAP
    entity_url_template: str = DEFAULT_ENTITY_URL_TEMPLATE
    exclusions: ExclusionList = field(default_factory=lambda: DEFAULT_EXCLUSIONS)
    host: str = "127.0.0.1"
    port: int = 8900


class IndexHolder:
    """Owns the live index; reload() builds a fresh one and swaps it in."""

    def __init__(self, settings: ServiceSettings):
        self.settings = settings
        self._lock = threading.Lock()
        self.index: LemmaIndex | None = None
        self.built_at = ""
        self.corpus_counts: dict[str, tuple[int, int]] = {}
        self.reload()

    def reload(self) -> None:
        entries = ingest_mod.load_manifest(self.settings.manifest)
        base = Path(self.settings.manifest).parent
        corpora = [ingest_mod.load_corpus(e, base) for e in entries]
        new_index = index_mod.build_index(corpora, self.settings.display_order)
        counts = {
            c.id: (len(c.documents), sum(len(d.sentences) for d in c.documents))
            for c in corpora
        }
        with self._lock:
            self.index = new_index
            self.corpus_counts = counts
            self.built_at = _dt.datetime.now(_dt.timezone.utc).isoformat()

    def snapshot(self) -> tuple[LemmaIndex, dict[str, tuple[int, int]], str]:
        with self._lock:
            assert self.index is not None
            return self.index, self.corpus_counts, self.built_at


def token_char_offsets(surfaces: tuple[str, ...]) -> list[tuple[int, int]]:
    """Character (start, end) of each token in " ".join(surfaces)."""
    offsets = []
    pos = 0
    for surface in surfaces:
        offsets.append((pos, pos + len(surface)))
        pos += len(surface) + 1
    return offsets


def span_to_chars(
    surfaces: tuple[str, ...], span: tuple[int, int]
) -> tuple[int, int]:
    """Convert a 1-based token span with exclusive end to character offsets."""
    offsets = token_char_offsets(surfaces)
    return (offsets[span[0] - 1][0], offsets[span[1] - 2][1])


def _hit_payload(index: LemmaIndex, hit: SearchHit) -> dict:
    surfaces = index.documents[(hit.corpus_id, hit.doc_id)].sentences[hit.sentence].surfaces
    return {
        "ordinal": hit.sentence,
        "text": hit.text,
        "highlights": [list(span_to_chars(surfaces, span)) for span in hit.spans],
    }


def group_hits(
    index: LemmaIndex,
    hits: list[SearchHit],
    requested: list[str],
    sentence_cap: int,
) -> list[dict]:
    """Per-corpus document cards; every requested corpus appears, even empty."""
    sections = []
    for corpus_id in requested:
        documents: list[dict] = []
        for hit in hits:
            if hit.corpus_id != corpus_id:
                continue
            if not documents or documents[-1]["doc_id"] != hit.doc_id:
                documents.append(
                    {
                        "doc_id": hit.doc_id,
                        "title": hit.doc_title,
                        "source_url": hit.source_url,
                        "truncated": False,
                        "sentences": [],
                    }
                )
            card = documents[-1]
            if len(card["sentences"]) < sentence_cap:
                card["sentences"].append(_hit_payload(index, hit))
            else:
                card["truncated"] = True
        sections.append({"corpus_id": corpus_id, "documents": documents})
    return sections


def encyclopedia_cards(index: LemmaIndex, phrase: str) -> list[dict]:
    """Cards for indexed documents whose title equals the query."""
    wanted = " ".join(phrase.lower().split())
    cards = []
    for (corpus_id, doc_id), doc in index.documents.items():
        if doc.title.lower() == wanted and doc.source_url:
            cards.append(
                {
                    "kind": "encyclopedia",
                    "label": doc.title,
                    "url": doc.source_url,
                    "corpus_id": corpus_id,
                    "doc_id": doc_id,
                }
            )
    cards.sort(key=lambda c: (index.corpus_order(c["corpus_id"]), c["doc_id"]))
    return cards


def build_linker(settings: ServiceSettings) -> ConceptLinker | None:
    if settings.linker_mode == "off":
        return None
    if settings.linker_mode == "fixture":
        if not settings.kb or not settings.class_graph:
            raise ValueError("fixture linker needs kb and class_graph paths")
        client = FixtureKBClient(settings.kb, settings.class_graph)
        return ConceptLinker(client, settings.exclusions)
    if settings.linker_mode == "live":
        live_client = SparqlKBClient(settings.endpoint or DEFAULT_SPARQL_ENDPOINT)
        return ConceptLinker(live_client, settings.exclusions)
    raise ValueError(f"unknown linker_mode {settings.linker_mode!r}")


def create_app(settings: ServiceSettings) -> FastAPI:
    app = FastAPI(title="mathcorpus", docs_url=None, redoc_url=None)
    holder = IndexHolder(settings)
    linker = build_linker(settings)
    app.state.holder = holder
    app.state.linker = linker
    app.state.settings = settings

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=status)

    @app.get("/api/search")
    def api_search(q: str = "", corpora: str = ""):
        if not q.strip():
            return error(400, "missing query parameter q")
        index, _counts, _built = holder.snapshot()
        requested = (
            sorted(
                {c for c in (part.strip() for part in corpora.split(",")) if c}
            )
            if corpora.strip()
            else list(index.corpus_ids)
        )
        try:
            hits = index_mod.search(index, q, requested)
        except QueryError as exc:
            return error(400, str(exc))
        requested.sort(key=index.corpus_order)  # sections come back in display order

        warnings: list[str] = []
        entities: list[dict] = []
        if linker is not None:
            try:
                entities = [
                    {
                        "kind": "kb",
                        "kb_id": c.kb_id,
                        "label": c.label,
                        "description": c.description,
                        "matched_via": c.matched_via,
                        "url": settings.entity_url_template.format(id=c.kb_id),
                    }
                    for c in linker.link(q)
                ]
            except LinkingError as exc:
                warnings.append(f"entity linking unavailable: {exc}")
        entities.extend(encyclopedia_cards(index, q))

        body = {
            "schema_version": SCHEMA_VERSION,
            "query": q,
            "entities": entities,
            "per_corpus": group_hits(index, hits, requested, settings.sentence_cap),
        }
        if warnings:
            body["warnings"] = warnings
        return JSONResponse(body)

    @app.get("/api/corpora")
    def api_corpora():
        index, counts, _built = holder.snapshot()
        return JSONResponse(
            [
                {
                    "id": corpus_id,
                    "display_name": DISPLAY_NAMES.get(corpus_id, corpus_id),
                    "documents": counts.get(corpus_id, (0, 0))[0],
                    "sentences": counts.get(corpus_id, (0, 0))[1],
                }
                for corpus_id in index.corpus_ids
            ]
        )

    @app.get("/api/health")
    def api_health():
        _index, _counts, built_at = holder.snapshot()
        return JSONResponse(
            {
                "status": "ok",
                "index_built_at": built_at,
                "linker": settings.linker_mode,
            }
        )

    return app
