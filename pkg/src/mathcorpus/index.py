"""Lemma-based inverted index and consecutive-phrase search.

Queries are lemmatized word by word through a surface->lemma map harvested at
build time, then matched against consecutive lemma runs, so "double category"
also finds "double categories". No ranking: hits come back in corpus display
order, then document id, then sentence position.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

from .model import Corpus

DEFAULT_DISPLAY_ORDER: tuple[str, ...] = ("bct", "nlab", "tac")

SNAPSHOT_MAGIC = "mathcorpus-index"
SNAPSHOT_VERSION = 1


class IndexBuildError(ValueError):
    pass


class QueryError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


class Posting(NamedTuple):
    corpus_id: str
    doc_id: str
    sentence: int  # 0-based position within the document
    token: int  # 1-based position within the sentence


@dataclass(frozen=True)
class IndexedSentence:
    surfaces: tuple[str, ...]
    lemmas: tuple[str, ...]  # lowercased

    @property
    def text(self) -> str:
        return " ".join(self.surfaces)


@dataclass(frozen=True)
class IndexedDocument:
    title: str
    source_url: str
    sentences: tuple[IndexedSentence, ...]


@dataclass(frozen=True)
class SearchHit:
    """One sentence with every (non-overlapping) phrase occurrence in it.

    Spans are (start, end) token ordinals, 1-based, end exclusive.
    """

    corpus_id: str
    doc_id: str
    doc_title: str
    source_url: str
    sentence: int
    text: str
    spans: tuple[tuple[int, int], ...]


class LemmaIndex:
    """Built once from corpora; treat as immutable afterwards."""

    def __init__(
        self,
        postings: dict[str, tuple[Posting, ...]],
        surface_to_lemma: dict[str, str],
        corpus_ids: tuple[str, ...],
        documents: dict[tuple[str, str], IndexedDocument],
    ):
        self.postings = postings
        self.surface_to_lemma = surface_to_lemma
        self.corpus_ids = corpus_ids
        self.documents = documents

    def corpus_order(self, corpus_id: str) -> int:
        return self.corpus_ids.index(corpus_id)


def build_index(
    corpora: Iterable[Corpus],
    display_order: tuple[str, ...] = DEFAULT_DISPLAY_ORDER,
) -> LemmaIndex:
    """Index corpora; duplicate (corpus_id, doc_id) pairs are an error.

    corpus_ids come out sorted by display_order (unlisted corpora after,
    alphabetically), which fixes the hit ordering for search.
    """
    corpora = list(corpora)
    ids = [c.id for c in corpora]
    if len(set(ids)) != len(ids):
        raise IndexBuildError("duplicate corpus id")

    def order_key(cid: str) -> tuple[int, str]:
        if cid in display_order:
            return (display_order.index(cid), cid)
        return (len(display_order), cid)

    corpus_ids = tuple(sorted(ids, key=order_key))

    postings: dict[str, list[Posting]] = {}
    surface_counts: dict[str, dict[str, int]] = {}
    documents: dict[tuple[str, str], IndexedDocument] = {}
    for corpus in corpora:
        for doc in corpus.documents:
            key = (corpus.id, doc.id)
            if key in documents:
                raise IndexBuildError(f"duplicate document {key!r}")
            indexed_sentences = []
            for s_pos, sentence in enumerate(doc.sentences):
                lemmas = []
                for t_pos, token in enumerate(sentence.tokens, start=1):
                    lemma = token.lemma.lower()
                    lemmas.append(lemma)
                    postings.setdefault(lemma, []).append(
                        Posting(corpus.id, doc.id, s_pos, t_pos)
                    )
                    counts = surface_counts.setdefault(token.surface.lower(), {})
                    counts[lemma] = counts.get(lemma, 0) + 1
                indexed_sentences.append(
                    IndexedSentence(
                        tuple(t.surface for t in sentence.tokens), tuple(lemmas)
                    )
                )
            documents[key] = IndexedDocument(
                doc.title, doc.source_url, tuple(indexed_sentences)
            )

    sorted_postings = {
        lemma: tuple(sorted(entries)) for lemma, entries in postings.items()
    }
    # modal lemma per surface; ties go to the lexicographically smaller lemma
    surface_to_lemma = {
        surface: min(counts, key=lambda lemma: (-counts[lemma], lemma))
        for surface, counts in surface_counts.items()
    }
    return LemmaIndex(sorted_postings, surface_to_lemma, corpus_ids, documents)


def lemmatize_query(index: LemmaIndex, phrase: str) -> tuple[str, ...]:
    """Lowercase, split on whitespace, map each word through the surface map.

    Words never seen as surfaces pass through unchanged. Empty or
    whitespace-only phrases are a QueryError.
    """
    words = phrase.lower().split()
    if not words:
        raise QueryError("empty query")
    return tuple(index.surface_to_lemma.get(w, w) for w in words)


def search(
    index: LemmaIndex, phrase: str, corpora: Iterable[str] | None = None
) -> list[SearchHit]:
    """Find sentences containing the query as a consecutive lemma run.

    Occurrences within one sentence are merged into a single hit with
    greedy left-to-right non-overlapping spans. corpora=None searches all.
    """
    if corpora is None:
        allowed = set(index.corpus_ids)
    else:
        allowed = set(corpora)
        unknown = allowed - set(index.corpus_ids)
        if unknown:
            raise QueryError(f"unknown corpus: {', '.join(sorted(unknown))}")

    lemmas = lemmatize_query(index, phrase)
    k = len(lemmas)
    starts: dict[tuple[str, str, int], list[int]] = {}
    for posting in index.postings.get(lemmas[0], ()):
        if posting.corpus_id not in allowed:
            continue
        sent = index.documents[(posting.corpus_id, posting.doc_id)].sentences[
            posting.sentence
        ]
        i = posting.token - 1
        if sent.lemmas[i : i + k] == lemmas:
            starts.setdefault(
                (posting.corpus_id, posting.doc_id, posting.sentence), []
            ).append(posting.token)

    hits = []
    for (corpus_id, doc_id, s_pos), positions in starts.items():
        spans: list[tuple[int, int]] = []
        next_free = 0
        for pos in positions:  # ascending: postings are sorted
            if pos >= next_free:
                spans.append((pos, pos + k))
                next_free = pos + k
        doc = index.documents[(corpus_id, doc_id)]
        hits.append(
            SearchHit(
                corpus_id=corpus_id,
                doc_id=doc_id,
                doc_title=doc.title,
                source_url=doc.source_url,
                sentence=s_pos,
                text=doc.sentences[s_pos].text,
                spans=tuple(spans),
            )
        )
    hits.sort(key=lambda h: (index.corpus_order(h.corpus_id), h.doc_id, h.sentence))
    return hits


def save_index(index: LemmaIndex, path: str | Path) -> None:
    """Write a deterministic two-line snapshot (magic+version, JSON payload)."""
    payload = {
        "corpus_ids": list(index.corpus_ids),
        "postings": {
            lemma: [list(p) for p in entries]
            for lemma, entries in index.postings.items()
        },
        "surface_to_lemma": index.surface_to_lemma,
        "documents": {
            corpus_id: {
                doc_id: {
                    "title": doc.title,
                    "source_url": doc.source_url,
                    "sentences": [
                        {"surfaces": list(s.surfaces), "lemmas": list(s.lemmas)}
                        for s in doc.sentences
                    ],
                }
                for (cid, doc_id), doc in index.documents.items()
                if cid == corpus_id
            }
            for corpus_id in index.corpus_ids
        },
    }
    text = f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}\n" + json.dumps(
        payload, sort_keys=True, ensure_ascii=False
    ) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_index(path: str | Path) -> LemmaIndex:
    path = Path(path)
    if not path.exists():
        raise SnapshotError(
            f"index snapshot not found at {path}; run `mathcorpus ingest` first"
        )
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2 or header[0] != SNAPSHOT_MAGIC:
            raise SnapshotError(f"{path} is not an index snapshot")
        if header[1] != str(SNAPSHOT_VERSION):
            raise SnapshotError(
                f"unsupported snapshot version {header[1]} (expected {SNAPSHOT_VERSION})"
            )
        try:
            payload = json.loads(handle.read())
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"{path}: corrupt snapshot payload: {exc}") from None
    postings = {
        lemma: tuple(Posting(c, d, s, t) for c, d, s, t in entries)
        for lemma, entries in payload["postings"].items()
    }
    documents = {
        (corpus_id, doc_id): IndexedDocument(
            record["title"],
            record["source_url"],
            tuple(
                IndexedSentence(tuple(s["surfaces"]), tuple(s["lemmas"]))
                for s in record["sentences"]
            ),
        )
        for corpus_id, docs in payload["documents"].items()
        for doc_id, record in docs.items()
    }
    return LemmaIndex(
        postings,
        dict(payload["surface_to_lemma"]),
        tuple(payload["corpus_ids"]),
        documents,
    )
