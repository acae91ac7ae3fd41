"""Baseline terminology extraction: POS-pattern MWEs and graph keyword ranking.

Both operate on lowercased lemmas of annotated corpora. The graph ranker
builds a co-occurrence graph over noun/adjective lemmas and scores nodes with
the damped undirected update PR(v) = (1-d) + d * sum(PR(u)/deg(u)); kept
nodes adjacent in the text merge into multi-word terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Set

from .model import Corpus, Sentence, UNANNOTATED_POS

CANDIDATE_POS = frozenset({"NOUN", "PROPN", "ADJ"})
MWE_HEAD_POS = frozenset({"NOUN", "PROPN"})


class ExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class TermSet:
    """Deduplicated extracted or gold terms plus how they were normalized."""

    terms: frozenset[str]
    normalization: str
    kind: str = ""

    def __post_init__(self) -> None:
        for term in self.terms:
            if term != term.strip() or not term:
                raise ValueError(f"badly normalized term {term!r}")


@dataclass(frozen=True)
class RankedTerm:
    phrase: str
    score: float


def _require_annotated(corpus: Corpus) -> None:
    for doc in corpus.documents:
        for sentence in doc.sentences:
            for token in sentence.tokens:
                if token.upos != UNANNOTATED_POS:
                    return
    raise ExtractionError(f"corpus {corpus.id!r} has no POS annotations")


def _candidate_runs(sentence: Sentence) -> Iterable[tuple[int, int]]:
    """Maximal runs [i, j) of candidate-POS tokens, 0-based."""
    start = None
    for i, token in enumerate(sentence.tokens):
        if token.upos in CANDIDATE_POS:
            if start is None:
                start = i
        elif start is not None:
            yield (start, i)
            start = None
    if start is not None:
        yield (start, len(sentence.tokens))


def extract_mwe(corpus: Corpus, min_freq: int = 2, max_len: int = 5) -> TermSet:
    """Count maximal ADJ/NOUN runs ending in a noun, keep the frequent ones.

    Candidates are normalized to lowercased lemma sequences; a run longer
    than max_len (after trimming trailing adjectives) does not qualify.
    """
    _require_annotated(corpus)
    counts: dict[str, int] = {}
    for doc in corpus.documents:
        for sentence in doc.sentences:
            for start, end in _candidate_runs(sentence):
                while end > start and sentence.tokens[end - 1].upos not in MWE_HEAD_POS:
                    end -= 1
                length = end - start
                if not (2 <= length <= max_len):
                    continue
                phrase = " ".join(
                    sentence.tokens[i].lemma.lower() for i in range(start, end)
                )
                counts[phrase] = counts.get(phrase, 0) + 1
    terms = frozenset(p for p, n in counts.items() if n >= min_freq)
    return TermSet(terms=terms, normalization="lowercase+lemma", kind="mwes")


def pagerank(
    adjacency: Mapping[str, Set[str]],
    damping: float = 0.85,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> tuple[dict[str, float], int]:
    """Damped undirected ranking; returns (scores, sweeps run).

    Scores start at 1.0 and iterate PR(v) = (1-d) + d * sum over neighbours u
    of PR(u)/deg(u), stopping when the max per-node change drops below tol.
    Isolated nodes settle at 1-d immediately.
    """
    nodes = sorted(adjacency)
    degree = {v: len(adjacency[v]) for v in nodes}
    scores = {v: 1.0 for v in nodes}
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        updated = {
            v: (1.0 - damping)
            + damping * sum(scores[u] / degree[u] for u in adjacency[v])
            for v in nodes
        }
        delta = max((abs(updated[v] - scores[v]) for v in nodes), default=0.0)
        scores = updated
        if delta < tol:
            break
    return scores, sweeps


def build_cooccurrence(corpus: Corpus, window: int = 2) -> dict[str, set[str]]:
    """Undirected graph over candidate lemmas co-occurring within `window`.

    Window is measured in token positions inside one sentence: with
    window=2, tokens at most two positions apart are linked. Every
    candidate lemma becomes a node even if it ends up isolated.
    """
    adjacency: dict[str, set[str]] = {}
    for doc in corpus.documents:
        for sentence in doc.sentences:
            positions = [
                (i, t.lemma.lower())
                for i, t in enumerate(sentence.tokens)
                if t.upos in CANDIDATE_POS
            ]
            for _, lemma in positions:
                adjacency.setdefault(lemma, set())
            for a in range(len(positions)):
                i, u = positions[a]
                for b in range(a + 1, len(positions)):
                    j, v = positions[b]
                    if j - i > window:
                        break
                    if u != v:
                        adjacency[u].add(v)
                        adjacency[v].add(u)
    return adjacency


def textrank(
    corpus: Corpus,
    window: int = 2,
    damping: float = 0.85,
    tol: float = 1e-6,
    max_iter: int = 100,
    keep_ratio: float = 1.0 / 3.0,
) -> list[RankedTerm]:
    """Rank keyword phrases by merged co-occurrence-graph scores.

    The top ceil(keep_ratio * |nodes|) lemmas survive; maximal runs of
    surviving candidate tokens in the text become phrases scored by the sum
    of their nodes' scores. Output is sorted by descending score, ties
    alphabetically.
    """
    _require_annotated(corpus)
    adjacency = build_cooccurrence(corpus, window)
    if not adjacency:
        return []
    scores, _ = pagerank(adjacency, damping, tol, max_iter)
    keep_n = math.ceil(keep_ratio * len(adjacency))
    kept = set(
        sorted(scores, key=lambda v: (-scores[v], v))[:keep_n]
    )

    phrases: dict[str, float] = {}
    for doc in corpus.documents:
        for sentence in doc.sentences:
            run: list[str] = []
            for token in list(sentence.tokens) + [None]:  # type: ignore[list-item]
                lemma = token.lemma.lower() if token is not None else ""
                if (
                    token is not None
                    and token.upos in CANDIDATE_POS
                    and lemma in kept
                ):
                    run.append(lemma)
                    continue
                if run:
                    phrase = " ".join(run)
                    phrases.setdefault(phrase, sum(scores[l] for l in run))
                    run = []
    return sorted(
        (RankedTerm(p, s) for p, s in phrases.items()),
        key=lambda t: (-t.score, t.phrase),
    )
