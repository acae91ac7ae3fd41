"""Corpus ingestion: CONLL-U parsing/serialization, markup stripping, filters.

Annotated corpora arrive as CONLL-U; encyclopedia and textbook sources arrive
as markdown with embedded TeX math, which is stripped to plain text before
tokenization. A manifest file records what was ingested and the counts a
loader should expect.
"""

from __future__ import annotations

import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

from .model import Corpus, Document, Sentence, Token, UNANNOTATED_POS


class ConlluParseError(ValueError):
    """Raised on malformed CONLL-U input; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MathNormalizationError(ValueError):
    """Raised when a math fragment cannot be plaintextified."""

    def __init__(self, message: str, fragment: str):
        self.fragment = fragment
        super().__init__(f"{message}: {fragment!r}")


class ManifestError(ValueError):
    pass


_GREEK = (
    "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu nu xi "
    "pi rho sigma tau upsilon phi chi psi omega "
    "Gamma Delta Theta Lambda Xi Pi Sigma Upsilon Phi Psi Omega"
).split()

# Ordered rewrite table; first match wins per command occurrence. Patterns are
# regexes over the raw fragment, replacements are plain text (backrefs allowed).
DEFAULT_MATH_RULES: tuple[tuple[str, str], ...] = (
    (r"\\mathbb\{([^{}]*)\}", r"\1"),
    (r"\\mathcal\{([^{}]*)\}", r"\1"),
    (r"\\mathbf\{([^{}]*)\}", r"\1"),
    (r"\\times(?![a-zA-Z])", "x"),
    (r"\\to(?![a-zA-Z])", "->"),
    (r"\\rightarrow(?![a-zA-Z])", "->"),
    (r"\\circ(?![a-zA-Z])", "o"),
    (r"\\cdot(?![a-zA-Z])", "."),
) + tuple((rf"\\{name}(?![a-zA-Z])", name) for name in _GREEK)


@dataclass(frozen=True)
class FilterRule:
    """Title-based document filter; match is "prefix" or "equals"."""

    match: str
    needle: str
    reason: str


DEFAULT_FILTER_RULES: tuple[FilterRule, ...] = (
    FilterRule("prefix", "list of", "meta-article: list"),
    FilterRule("prefix", "category:", "meta-article: category"),
    FilterRule("prefix", "book:", "book"),
    FilterRule("equals", "books", "book"),
)


@dataclass(frozen=True)
class IngestConfig:
    corpus_id: str
    filter_rules: tuple[FilterRule, ...] = DEFAULT_FILTER_RULES
    math_rules: tuple[tuple[str, str], ...] = DEFAULT_MATH_RULES


def plaintextify_math(fragment: str, rules: Iterable[tuple[str, str]] | None = None) -> str:
    """Rewrite a TeX math fragment to searchable plain text.

    Rules are applied in table order; commands left unmatched afterwards are
    dropped, keeping their arguments. Braces are removed, ^ and _ kept.
    Unbalanced braces raise MathNormalizationError. The result never
    contains a backslash or brace.
    """
    depth = 0
    for ch in fragment:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                raise MathNormalizationError("unbalanced braces", fragment)
    if depth != 0:
        raise MathNormalizationError("unbalanced braces", fragment)

    text = fragment
    for pattern, repl in (DEFAULT_MATH_RULES if rules is None else tuple(rules)):
        text = re.sub(pattern, repl, text)
    # leftover commands are unknown: drop the command, keep arguments
    text = re.sub(r"\\[a-zA-Z]+\*?", "", text)
    text = re.sub(r"\\[^a-zA-Z]", "", text)
    text = text.replace("{", "").replace("}", "")
    text = re.sub(r"[ \t]+", " ", text).strip()
    return text


_FENCE_RE = re.compile(r"^(```|~~~).*?^\1[^\S\n]*$\n?", re.DOTALL | re.MULTILINE)
_DISPLAY_MATH_RE = re.compile(r"\$\$(.+?)\$\$", re.DOTALL)
_INLINE_MATH_RE = re.compile(r"\$([^$\n]+)\$")
_WIKILINK_RE = re.compile(r"\[\[([^\[\]|]+)(?:\|([^\[\]]+))?\]\]")
_LINK_RE = re.compile(r"\[([^\[\]]*)\]\(([^()\s]*(?:\([^()]*\)[^()\s]*)*)\)")
_HEADER_RE = re.compile(r"^[ \t]{0,3}#{1,6}[ \t]+", re.MULTILINE)


def strip_markdown(source: str, math_rules: Iterable[tuple[str, str]] | None = None) -> str:
    """Reduce markdown (with embedded TeX math) to plain text.

    Best effort: malformed markup passes through literally, nothing raises.
    Applying the function twice gives the same output as applying it once.
    """

    def _math(match: re.Match) -> str:
        try:
            return plaintextify_math(match.group(1), math_rules)
        except MathNormalizationError:
            return match.group(0)

    def _pass(text: str) -> str:
        text = _FENCE_RE.sub("", text)
        text = _DISPLAY_MATH_RE.sub(_math, text)
        text = _INLINE_MATH_RE.sub(_math, text)
        text = _WIKILINK_RE.sub(lambda m: m.group(2) or m.group(1), text)
        text = _LINK_RE.sub(lambda m: m.group(1), text)
        text = _HEADER_RE.sub("", text)
        text = re.sub(r"\*\*([^*]+)\*\*", r"\1", text)
        text = re.sub(r"(?<!\w)__([^_]+)__(?!\w)", r"\1", text)
        text = re.sub(r"\*([^*\s][^*]*?)\*", r"\1", text)
        text = re.sub(r"(?<![\w])_([^_\s][^_]*?)_(?![\w])", r"\1", text)
        text = text.replace("`", "")
        text = re.sub(r"[ \t]+", " ", text)
        text = re.sub(r"\n{3,}", "\n\n", text)
        return text.strip()

    # rerun until stable so nested markup ("# # x", links inside links)
    # cannot leave half-stripped residue; every changing pass shrinks the
    # text once tabs and backticks are gone, so this terminates
    text = _pass(source)
    while True:
        again = _pass(text)
        if again == text:
            return text
        text = again


def filter_document(doc: Document, rules: Iterable[FilterRule] | None = None) -> str | None:
    """Return a drop reason for meta/bulk documents, or None to keep.

    Matching is on the lowercased title; first matching rule wins.
    """
    title = doc.title.lower()
    for rule in DEFAULT_FILTER_RULES if rules is None else rules:
        if rule.match == "prefix" and title.startswith(rule.needle):
            return rule.reason
        if rule.match == "equals" and title == rule.needle:
            return rule.reason
    return None


_METADATA_KEYS = ("title", "source_url", "authors", "date", "keywords")


def _split_csv(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def parse_conllu(source: str | TextIO, corpus_id: str) -> list[Document]:
    """Parse CONLL-U text into Documents.

    Comment lines carry document metadata ("# newdoc id = ..." starts a new
    document; title/source_url/authors/date/keywords attach to it). Token
    lines must have exactly 10 tab-separated columns; multi-word range lines
    ("1-2") are skipped; IDs must run 1..n within a sentence. Errors carry
    the offending line number.
    """
    if isinstance(source, str):
        lines: Iterable[str] = io.StringIO(source)
    else:
        lines = source

    documents: list[Document] = []
    meta: dict[str, object] = {}
    doc_sentences: list[Sentence] = []
    pending: list[tuple[int, Token]] = []
    in_doc = False
    anon_count = 0

    def flush_sentence(line_no: int) -> None:
        nonlocal in_doc, anon_count
        if not pending:
            return
        ids = [i for i, _ in pending]
        if ids != list(range(1, len(ids) + 1)):
            raise ConlluParseError(
                f"token ids not contiguous from 1 (got {ids})", line_no
            )
        if not in_doc:
            # token lines before any "# newdoc id" get a synthesized document
            anon_count += 1
            meta["id"] = f"doc-{anon_count:04d}"
            in_doc = True
        doc_sentences.append(
            Sentence.from_tokens([t for _, t in pending], len(doc_sentences))
        )
        pending.clear()

    def flush_document() -> None:
        nonlocal in_doc
        if not in_doc:
            return
        documents.append(
            Document(
                id=str(meta.get("id", "")),
                corpus_id=corpus_id,
                title=str(meta.get("title", "")),
                source_url=str(meta.get("source_url", "")),
                authors=tuple(meta.get("authors", ())),  # type: ignore[arg-type]
                date=str(meta.get("date", "")),
                keywords=tuple(meta.get("keywords", ())),  # type: ignore[arg-type]
                sentences=tuple(doc_sentences),
            )
        )
        meta.clear()
        doc_sentences.clear()
        in_doc = False

    line_no = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush_sentence(line_no)
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, sep, value = body.partition("=")
            key = key.strip()
            value = value.strip()
            if key == "newdoc id" and sep:
                flush_sentence(line_no)
                flush_document()
                meta["id"] = value
                in_doc = True
            elif key in _METADATA_KEYS and sep and in_doc:
                if key in ("authors", "keywords"):
                    meta[key] = _split_csv(value)
                else:
                    meta[key] = value
            # other comments (sent_id, text, ...) are ignored
            continue
        columns = line.split("\t")
        if len(columns) != 10:
            raise ConlluParseError(
                f"expected 10 tab-separated columns, got {len(columns)}", line_no
            )
        tok_id, form, lemma, upos, xpos, _feats, head, deprel, _deps, _misc = columns
        if re.fullmatch(r"\d+-\d+", tok_id):
            continue  # multi-word token range: surface-only, skip
        if not tok_id.isdigit():
            raise ConlluParseError(f"non-integer token id {tok_id!r}", line_no)
        if not re.fullmatch(r"\d+", head):
            raise ConlluParseError(f"non-numeric head {head!r}", line_no)
        pending.append(
            (int(tok_id), Token(form, lemma, upos, xpos, int(head), deprel))
        )
    flush_sentence(line_no + 1)
    flush_document()
    return documents


def serialize_conllu(documents: Iterable[Document]) -> str:
    """Render Documents back to CONLL-U; re-parsing yields an equal list.

    Discarded columns (FEATS, DEPS, MISC) are written as "_"; empty metadata
    fields are omitted.
    """
    out: list[str] = []
    for doc in documents:
        out.append(f"# newdoc id = {doc.id}")
        if doc.title:
            out.append(f"# title = {doc.title}")
        if doc.source_url:
            out.append(f"# source_url = {doc.source_url}")
        if doc.authors:
            out.append(f"# authors = {', '.join(doc.authors)}")
        if doc.date:
            out.append(f"# date = {doc.date}")
        if doc.keywords:
            out.append(f"# keywords = {', '.join(doc.keywords)}")
        for sentence in doc.sentences:
            for i, tok in enumerate(sentence.tokens, start=1):
                out.append(
                    "\t".join(
                        (
                            str(i),
                            tok.surface,
                            tok.lemma,
                            tok.upos,
                            tok.xpos,
                            "_",
                            str(tok.head),
                            tok.deprel,
                            "_",
                            "_",
                        )
                    )
                )
            out.append("")
    return "\n".join(out) + ("\n" if out else "")


_SENT_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


def document_from_text(
    doc_id: str,
    corpus_id: str,
    text: str,
    title: str = "",
    source_url: str = "",
) -> Document:
    """Build an unannotated Document from plain text.

    Sentences split after ./!/? followed by whitespace; tokens split on
    whitespace; lemma is the lowercased surface and upos is "X". Heads are
    synthesized (first token is the root) so validation still passes.
    """
    sentences: list[Sentence] = []
    for chunk in _SENT_SPLIT_RE.split(text.replace("\n", " ")):
        surfaces = chunk.split()
        if not surfaces:
            continue
        tokens = [
            Token(
                surface=s,
                lemma=s.lower(),
                upos=UNANNOTATED_POS,
                xpos=UNANNOTATED_POS,
                head=0 if i == 0 else 1,
                deprel="root" if i == 0 else "dep",
            )
            for i, s in enumerate(surfaces)
        ]
        sentences.append(Sentence.from_tokens(tokens, len(sentences)))
    return Document(
        id=doc_id,
        corpus_id=corpus_id,
        title=title,
        source_url=source_url,
        sentences=tuple(sentences),
    )


def document_from_markdown(
    doc_id: str,
    corpus_id: str,
    source: str,
    title: str = "",
    source_url: str = "",
    math_rules: Iterable[tuple[str, str]] | None = None,
) -> Document:
    """Strip markdown/math, then tokenize as an unannotated Document."""
    return document_from_text(
        doc_id, corpus_id, strip_markdown(source, math_rules), title, source_url
    )


MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ManifestEntry:
    """Bookkeeping for one ingested corpus; counts are what a loader must find."""

    id: str
    paths: tuple[str, ...]
    annotated: bool
    documents: int
    sentences: int


def save_manifest(entries: Iterable[ManifestEntry], path: str | Path) -> None:
    payload = {
        "version": MANIFEST_VERSION,
        "corpora": [
            {
                "id": e.id,
                "paths": list(e.paths),
                "annotated": e.annotated,
                "documents": e.documents,
                "sentences": e.sentences,
            }
            for e in entries
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from None
    if payload.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest version {payload.get('version')!r}")
    entries = []
    for record in payload.get("corpora", []):
        try:
            entries.append(
                ManifestEntry(
                    id=record["id"],
                    paths=tuple(record["paths"]),
                    annotated=bool(record["annotated"]),
                    documents=int(record["documents"]),
                    sentences=int(record["sentences"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"manifest {path}: bad corpus record: {exc}") from None
    return entries


def load_corpus(entry: ManifestEntry, base_dir: str | Path) -> Corpus:
    """Load one manifest corpus, verifying the recorded counts."""
    base = Path(base_dir)
    documents: list[Document] = []
    for rel in entry.paths:
        file_path = base / rel
        with open(file_path, encoding="utf-8") as handle:
            try:
                documents.extend(parse_conllu(handle, entry.id))
            except ConlluParseError as exc:
                raise ConlluParseError(f"{file_path}: {exc}") from None
    n_sentences = sum(len(d.sentences) for d in documents)
    if len(documents) != entry.documents or n_sentences != entry.sentences:
        raise ManifestError(
            f"corpus {entry.id!r}: manifest expects {entry.documents} documents"
            f"/{entry.sentences} sentences, found {len(documents)}/{n_sentences}"
        )
    return Corpus(id=entry.id, documents=tuple(documents))


def load_math_rules(path: str | Path) -> tuple[tuple[str, str], ...]:
    """Read a rewrite table: one tab-separated "pattern<TAB>replacement" per line."""
    rules = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{line_no}: expected pattern<TAB>replacement")
        rules.append((parts[0], parts[1]))
    return tuple(rules)


def load_filter_rules(path: str | Path) -> tuple[FilterRule, ...]:
    """Read filter rules: "match<TAB>needle<TAB>reason" per line."""
    rules = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[0] not in ("prefix", "equals"):
            raise ValueError(
                f"{path}:{line_no}: expected (prefix|equals)<TAB>needle<TAB>reason"
            )
        rules.append(FilterRule(parts[0], parts[1], parts[2]))
    return tuple(rules)
