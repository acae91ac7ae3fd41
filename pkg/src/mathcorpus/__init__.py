"""Corpus workbench for mathematical language.

Ingests annotated and raw corpora, answers lemma-based collocation queries,
runs baseline terminology extraction, links concepts to a knowledge base,
and scores all of it against benchmark files.
"""

from .extract import RankedTerm, TermSet, extract_mwe, pagerank, textrank
from .index import LemmaIndex, Posting, SearchHit, build_index, lemmatize_query, search
from .ingest import parse_conllu, plaintextify_math, serialize_conllu, strip_markdown
from .linker import EntityCandidate, FixtureKBClient, link_all, link_concept
from .model import (
    Corpus,
    Document,
    MetricsReport,
    Sentence,
    Token,
    validate_sentence,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "Document",
    "EntityCandidate",
    "FixtureKBClient",
    "LemmaIndex",
    "MetricsReport",
    "Posting",
    "RankedTerm",
    "SearchHit",
    "Sentence",
    "TermSet",
    "Token",
    "__version__",
    "build_index",
    "extract_mwe",
    "lemmatize_query",
    "link_all",
    "link_concept",
    "pagerank",
    "parse_conllu",
    "plaintextify_math",
    "search",
    "serialize_conllu",
    "strip_markdown",
    "textrank",
    "validate_sentence",
]
