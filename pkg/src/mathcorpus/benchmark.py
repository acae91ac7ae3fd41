"""Benchmark loading and scoring for terms, definitions, and entity linking.

Term scoring is exact set overlap after identical normalization. Definition
scoring micro-averages bag-of-words overlap over headword-aligned pairs.
Linking scores P@1 against ranked candidate lists.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter, defaultdict, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .extract import TermSet
from .index import LemmaIndex
from .model import MetricsReport, f1_score

logger = logging.getLogger(__name__)

TERM_BENCHMARK_KINDS = ("keywords", "titles", "glossary", "mwes")


class EvaluationError(ValueError):
    pass


class RecordFormatError(ValueError):
    """Bad line in a benchmark/prediction file; carries the line number."""

    def __init__(self, path: str | Path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True)
class DefinitionRecord:
    headword: str
    definition: str
    doc_id: str
    location: tuple[int, int]  # sentence ordinal range, end exclusive


@dataclass(frozen=True)
class ConceptLinkGold:
    concept: str
    accepted_ids: frozenset[str]


@dataclass(frozen=True)
class LinkPrediction:
    concept: str
    ranked_ids: tuple[str, ...]


def normalize_term(text: str, index: LemmaIndex | None = None) -> str:
    """Lowercase and collapse whitespace; with an index, also lemmatize words."""
    words = text.lower().split()
    if index is not None:
        words = [index.surface_to_lemma.get(w, w) for w in words]
    return " ".join(words)


def load_term_benchmark(
    path: str | Path, kind: str, index: LemmaIndex | None = None
) -> TermSet:
    """Load a one-term-per-line file ("#" comments and blanks skipped)."""
    if kind not in TERM_BENCHMARK_KINDS:
        raise ValueError(f"unknown benchmark kind {kind!r} (expected one of {TERM_BENCHMARK_KINDS})")
    terms = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        terms.add(normalize_term(line, index))
    if not terms:
        logger.warning("term benchmark %s (%s) is empty", path, kind)
    normalization = "lowercase+lemma" if index is not None else "lowercase"
    return TermSet(terms=frozenset(terms), normalization=normalization, kind=kind)


def eval_terms(predicted: TermSet, gold: TermSet) -> MetricsReport:
    """Exact-match precision/recall/F1 over normalized term sets."""
    if predicted.normalization != gold.normalization:
        raise EvaluationError(
            f"normalization mismatch: predicted {predicted.normalization!r} "
            f"vs gold {gold.normalization!r}"
        )
    overlap = len(predicted.terms & gold.terms)
    precision = overlap / len(predicted.terms) if predicted.terms else 0.0
    recall = overlap / len(gold.terms) if gold.terms else 0.0
    return MetricsReport.from_precision_recall(precision, recall)


def _words(text: str) -> list[str]:
    return text.lower().split()


def eval_definitions(
    predicted: Sequence[DefinitionRecord], gold: Sequence[DefinitionRecord]
) -> MetricsReport:
    """Micro-averaged bag-of-words overlap between headword-aligned definitions.

    Records pair up by normalized headword (positionally within a headword
    group). Words of unmatched predictions still count against precision;
    words of unmatched gold records still count against recall.
    """
    gold_groups: dict[str, deque[DefinitionRecord]] = defaultdict(deque)
    for record in gold:
        gold_groups[normalize_term(record.headword)].append(record)

    matched = 0
    pred_words = 0
    gold_words = sum(len(_words(r.definition)) for r in gold)
    for record in predicted:
        words = _words(record.definition)
        pred_words += len(words)
        group = gold_groups.get(normalize_term(record.headword))
        if group:
            partner = group.popleft()
            overlap = Counter(words) & Counter(_words(partner.definition))
            matched += sum(overlap.values())
    precision = matched / pred_words if pred_words else 0.0
    recall = matched / gold_words if gold_words else 0.0
    return MetricsReport.from_precision_recall(precision, recall)


def eval_linking(
    predictions: Sequence[LinkPrediction], gold: Sequence[ConceptLinkGold]
) -> MetricsReport:
    """P@1 over answered concepts, recall over all gold concepts.

    A concept counts for recall when any accepted id appears anywhere in its
    ranked list; concepts without predictions are recall misses. F1 is the
    harmonic mean of P@1 and recall, and the precision field mirrors P@1.
    Predicting an unknown or duplicate concept is an error.
    """
    accepted = {normalize_term(g.concept): g.accepted_ids for g in gold}
    seen = set()
    answered = 0
    top1_correct = 0
    found_anywhere = 0
    for prediction in predictions:
        concept = normalize_term(prediction.concept)
        if concept not in accepted:
            raise EvaluationError(f"prediction for unknown concept {prediction.concept!r}")
        if concept in seen:
            raise EvaluationError(f"duplicate prediction for concept {prediction.concept!r}")
        seen.add(concept)
        ids = prediction.ranked_ids
        if ids:
            answered += 1
            if ids[0] in accepted[concept]:
                top1_correct += 1
        if any(i in accepted[concept] for i in ids):
            found_anywhere += 1
    p_at_1 = top1_correct / answered if answered else 0.0
    recall = found_anywhere / len(gold) if gold else 0.0
    return MetricsReport(
        precision=p_at_1,
        recall=recall,
        f1=f1_score(p_at_1, recall),
        p_at_1=p_at_1,
    )


def _read_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    for line_no, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordFormatError(path, line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(record, dict):
            raise RecordFormatError(path, line_no, "expected a JSON object")
        yield line_no, record


def _field(record: dict, name: str, path: str | Path, line_no: int):
    if name not in record:
        raise RecordFormatError(path, line_no, f"missing field {name!r}")
    return record[name]


def load_definitions(path: str | Path) -> list[DefinitionRecord]:
    """Read JSONL records: headword, definition, doc_id, start, end."""
    records = []
    for line_no, record in _read_jsonl(path):
        start = _field(record, "start", path, line_no)
        end = _field(record, "end", path, line_no)
        if not isinstance(start, int) or not isinstance(end, int):
            raise RecordFormatError(path, line_no, "start/end must be integers")
        records.append(
            DefinitionRecord(
                headword=str(_field(record, "headword", path, line_no)),
                definition=str(_field(record, "definition", path, line_no)),
                doc_id=str(_field(record, "doc_id", path, line_no)),
                location=(start, end),
            )
        )
    return records


def load_link_gold(path: str | Path) -> list[ConceptLinkGold]:
    """Read JSONL records: concept, accepted_ids."""
    records = []
    for line_no, record in _read_jsonl(path):
        ids = _field(record, "accepted_ids", path, line_no)
        if not isinstance(ids, list):
            raise RecordFormatError(path, line_no, "accepted_ids must be a list")
        records.append(
            ConceptLinkGold(
                concept=str(_field(record, "concept", path, line_no)),
                accepted_ids=frozenset(str(i) for i in ids),
            )
        )
    return records


def load_link_predictions(path: str | Path) -> list[LinkPrediction]:
    """Read JSONL records: concept, ranked_ids (order is the ranking)."""
    records = []
    for line_no, record in _read_jsonl(path):
        ids = _field(record, "ranked_ids", path, line_no)
        if not isinstance(ids, list):
            raise RecordFormatError(path, line_no, "ranked_ids must be a list")
        records.append(
            LinkPrediction(
                concept=str(_field(record, "concept", path, line_no)),
                ranked_ids=tuple(str(i) for i in ids),
            )
        )
    return records


def save_link_predictions(predictions: Sequence[LinkPrediction], path: str | Path) -> None:
    lines = [
        json.dumps({"concept": p.concept, "ranked_ids": list(p.ranked_ids)}, ensure_ascii=False)
        for p in predictions
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def render_metrics_table(
    rows: Sequence[tuple[str, MetricsReport]], p_at_1: bool = False
) -> str:
    """Fixed-width table, two decimals; first column header P or P@1."""
    name_width = max([len("benchmark")] + [len(name) for name, _ in rows])
    head = "P@1" if p_at_1 else "P"
    lines = [f"{'benchmark':<{name_width}}  {head:>5} {'R':>5} {'F1':>5}"]
    for name, report in rows:
        first = report.p_at_1 if p_at_1 and report.p_at_1 is not None else report.precision
        lines.append(
            f"{name:<{name_width}}  {first:>5.2f} {report.recall:>5.2f} {report.f1:>5.2f}"
        )
    return "\n".join(lines) + "\n"


def parse_metrics_table(text: str) -> dict[str, MetricsReport]:
    """Inverse of render_metrics_table over its own output."""
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines:
        raise ValueError("empty metrics table")
    header = lines[0].split()
    p_at_1 = "P@1" in header
    out: dict[str, MetricsReport] = {}
    for line in lines[1:]:
        match = re.match(r"^(.*?)\s+([\d.]+)\s+([\d.]+)\s+([\d.]+)\s*$", line)
        if not match:
            raise ValueError(f"bad metrics row: {line!r}")
        name = match.group(1).strip()
        first, recall, f1 = (float(match.group(i)) for i in (2, 3, 4))
        out[name] = MetricsReport(
            precision=first, recall=recall, f1=f1, p_at_1=first if p_at_1 else None
        )
    return out
