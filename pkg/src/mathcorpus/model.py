"""Core corpus types and sentence validation.

Everything here is immutable after construction; parsing and indexing live in
their own modules and only produce these types.
"""

from __future__ import annotations

from dataclasses import dataclass, field

ROOT_DEPREL = "root"

# upos value given to tokens of documents ingested without annotations
UNANNOTATED_POS = "X"


@dataclass(frozen=True)
class Token:
    """One token of an annotated sentence.

    head is 1-based within the sentence, 0 for the root token.
    """

    surface: str
    lemma: str
    upos: str
    xpos: str
    head: int
    deprel: str


@dataclass(frozen=True)
class Sentence:
    """A tokenized sentence; text is the surfaces joined by single spaces."""

    tokens: tuple[Token, ...]
    text: str
    doc_offset: int

    @classmethod
    def from_tokens(cls, tokens, doc_offset: int) -> "Sentence":
        toks = tuple(tokens)
        return cls(toks, " ".join(t.surface for t in toks), doc_offset)


@dataclass(frozen=True)
class Document:
    id: str
    corpus_id: str
    title: str = ""
    source_url: str = ""
    authors: tuple[str, ...] = ()
    date: str = ""  # opaque ISO-8601 text, never parsed
    keywords: tuple[str, ...] = ()
    sentences: tuple[Sentence, ...] = ()


@dataclass(frozen=True)
class Corpus:
    id: str
    documents: tuple[Document, ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        for doc in self.documents:
            if doc.id in seen:
                raise ValueError(f"duplicate document id {doc.id!r} in corpus {self.id!r}")
            seen.add(doc.id)


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0.0 when both are (near) zero."""
    if precision + recall <= 1e-12:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    p_at_1: float | None = None

    @classmethod
    def from_precision_recall(
        cls, precision: float, recall: float, p_at_1: float | None = None
    ) -> "MetricsReport":
        return cls(precision, recall, f1_score(precision, recall), p_at_1)


def validate_sentence(sentence: Sentence) -> list[str]:
    """Return human-readable invariant violations, empty when the tree is well formed.

    Checks: exactly one root (head 0, deprel "root"), heads within range,
    no self-heads, non-empty surfaces and lemmas. Cycles longer than a
    self-loop are deliberately not detected. Token indexes in messages
    are 1-based.
    """
    violations: list[str] = []
    n = len(sentence.tokens)
    if n == 0:
        return ["empty sentence"]
    roots = [i for i, t in enumerate(sentence.tokens, start=1) if t.head == 0]
    if not roots:
        violations.append("no root token")
    elif len(roots) > 1:
        violations.append("multiple roots (tokens %s)" % ", ".join(str(i) for i in roots))
    for i in roots:
        tok = sentence.tokens[i - 1]
        if tok.deprel != ROOT_DEPREL:
            violations.append(f"root token {i} has deprel {tok.deprel!r}")
    for i, tok in enumerate(sentence.tokens, start=1):
        if tok.head == i:
            violations.append(f"self-head at index {i}")
        elif tok.head < 0 or tok.head > n:
            violations.append(f"dangling head {tok.head} at index {i}")
        if not tok.surface:
            violations.append(f"empty surface at index {i}")
        if not tok.lemma:
            violations.append(f"empty lemma at index {i}")
        if tok.head != 0 and tok.deprel == ROOT_DEPREL:
            violations.append(f"non-root token {i} has deprel 'root'")
    return violations
