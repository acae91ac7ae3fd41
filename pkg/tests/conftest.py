"""Shared fixtures: repo paths and small corpus builders."""

from __future__ import annotations

from pathlib import Path

import pytest

from mathcorpus.model import Corpus, Document, Sentence, Token

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_DIR = REPO_ROOT / "demo"


@pytest.fixture(scope="session")
def demo_dir() -> Path:
    return DEMO_DIR


@pytest.fixture(scope="session")
def demo_manifest() -> Path:
    return DEMO_DIR / "corpora" / "manifest.json"


@pytest.fixture(scope="session")
def demo_kb() -> Path:
    return DEMO_DIR / "kb" / "entries.jsonl"


@pytest.fixture(scope="session")
def demo_class_graph() -> Path:
    return DEMO_DIR / "kb" / "class_graph.jsonl"


@pytest.fixture(scope="session")
def demo_index_lemmas() -> dict[str, str]:
    """surface -> lemma map harvested from the demo corpora."""
    from mathcorpus.index import build_index
    from mathcorpus.ingest import load_corpus, load_manifest

    manifest = DEMO_DIR / "corpora" / "manifest.json"
    corpora = [load_corpus(e, manifest.parent) for e in load_manifest(manifest)]
    return build_index(corpora).surface_to_lemma


def make_token(
    surface: str,
    lemma: str | None = None,
    upos: str = "NOUN",
    head: int = 0,
    deprel: str = "root",
    xpos: str = "NN",
) -> Token:
    return Token(
        surface=surface,
        lemma=surface.lower() if lemma is None else lemma,
        upos=upos,
        xpos=xpos,
        head=head,
        deprel=deprel,
    )


def make_sentence(words: list[tuple], doc_offset: int = 0) -> Sentence:
    """Build a valid sentence from (surface, lemma, upos) triples.

    The first token becomes the root, everything else attaches to it.
    """
    tokens = []
    for i, triple in enumerate(words):
        surface, lemma, upos = triple
        tokens.append(
            Token(
                surface=surface,
                lemma=lemma,
                upos=upos,
                xpos="NN",
                head=0 if i == 0 else 1,
                deprel="root" if i == 0 else "dep",
            )
        )
    return Sentence.from_tokens(tokens, doc_offset)


def make_document(
    doc_id: str, corpus_id: str, sentences: list[Sentence], title: str = "", url: str = ""
) -> Document:
    return Document(
        id=doc_id,
        corpus_id=corpus_id,
        title=title,
        source_url=url,
        sentences=tuple(sentences),
    )


def corpus_of_sentences(corpus_id: str, sentence_words: list[list[tuple]]) -> Corpus:
    """One-document corpus from lists of (surface, lemma, upos) triples."""
    sentences = [make_sentence(words, i) for i, words in enumerate(sentence_words)]
    return Corpus(
        id=corpus_id,
        documents=(make_document(f"{corpus_id}-doc", corpus_id, sentences),),
    )
