"""Knowledge-base entity linking with class-based exclusion.

Candidates come from exact (case-insensitive) label or alias matches. An
entry is excluded when any of its classes, direct or one superclass level up,
sits on the exclusion list; the default list names the kinds of entries that
shadow mathematical vocabulary (rings, fields, groups as everyday things).
Label matches rank before alias matches, then lower KB ids first.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import requests

from .benchmark import LinkPrediction

logger = logging.getLogger(__name__)

DEFAULT_ENTITY_URL_TEMPLATE = "https://www.wikidata.org/wiki/{id}"
DEFAULT_SPARQL_ENDPOINT = "https://query.wikidata.org/sparql"
CLIENT_ID = "mathcorpus/0.1 (corpus workbench; batch entity linking)"


class LinkingError(RuntimeError):
    """KB lookup failure; retryable means a retry might succeed."""

    def __init__(self, message: str, retryable: bool):
        self.retryable = retryable
        super().__init__(message)


@dataclass(frozen=True)
class ExclusionList:
    """Excluded class ids with human-readable names, for logs and docs."""

    entries: tuple[tuple[str, str], ...]

    @property
    def ids(self) -> frozenset[str]:
        return frozenset(class_id for class_id, _ in self.entries)

    def name_of(self, class_id: str) -> str:
        for cid, name in self.entries:
            if cid == class_id:
                return name
        return class_id


DEFAULT_EXCLUSIONS = ExclusionList(
    entries=(
        ("Q223557", "physical object"),
        ("Q4406616", "concrete object"),
        ("Q17334923", "physical location"),
        ("Q4167836", "Wikimedia category"),
        ("Q1914636", "activity"),
        ("Q3769299", "human behavior"),
        ("Q24034552", "artistic concept"),
        ("Q186408", "point in time"),
        ("Q186081", "time interval"),
        ("Q8142", "currency"),
    )
)


@dataclass(frozen=True)
class KBEntry:
    """One KB record; classes already include direct classes and their parents."""

    kb_id: str
    label: str
    aliases: tuple[str, ...]
    description: str
    classes: frozenset[str]


@dataclass(frozen=True)
class EntityCandidate:
    kb_id: str
    label: str
    matched_via: str  # "label" | "alias"
    description: str
    classes: frozenset[str]


class KBClient(Protocol):
    def lookup(self, phrase: str) -> list[KBEntry]:
        """Entries whose label or an alias equals the phrase, case-insensitively."""
        ...


def _normalize_phrase(phrase: str) -> str:
    return " ".join(phrase.lower().split())


def _kb_id_rank(kb_id: str) -> tuple[int, str]:
    digits = "".join(ch for ch in kb_id if ch.isdigit())
    return (int(digits) if digits else 2**63, kb_id)


class FixtureKBClient:
    """Offline client over a KB snapshot plus a child->parents class graph."""

    def __init__(self, kb_path: str | Path, class_graph_path: str | Path):
        self.kb_path = Path(kb_path)
        self.class_graph_path = Path(class_graph_path)
        self.parents = self._load_class_graph(self.class_graph_path)
        self.entries = self._load_entries(self.kb_path)

    @staticmethod
    def _load_class_graph(path: Path) -> dict[str, frozenset[str]]:
        parents: dict[str, frozenset[str]] = {}
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                parents[str(record["child"])] = frozenset(
                    str(p) for p in record["parents"]
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad class-graph record: {exc}") from None
        return parents

    def _load_entries(self, path: Path) -> list[KBEntry]:
        entries = []
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                direct = frozenset(str(c) for c in record["classes"])
                entries.append(
                    KBEntry(
                        kb_id=str(record["kb_id"]),
                        label=str(record["label"]),
                        aliases=tuple(str(a) for a in record.get("aliases", [])),
                        description=str(record.get("description", "")),
                        classes=self.expand_classes(direct),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad KB record: {exc}") from None
        return entries

    def expand_classes(self, direct: frozenset[str]) -> frozenset[str]:
        expanded = set(direct)
        for class_id in direct:
            expanded |= self.parents.get(class_id, frozenset())
        return frozenset(expanded)

    def lookup(self, phrase: str) -> list[KBEntry]:
        wanted = _normalize_phrase(phrase)
        found = []
        for entry in self.entries:
            if _normalize_phrase(entry.label) == wanted or any(
                _normalize_phrase(a) == wanted for a in entry.aliases
            ):
                found.append(entry)
        return found


class RateLimiter:
    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._last = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            remaining = self._last + self.min_interval - now
            if remaining > 0:
                time.sleep(remaining)
            self._last = time.monotonic()


_SPARQL_TEMPLATE = """
SELECT DISTINCT ?item ?itemLabel ?itemDescription ?class ?matchedAlias WHERE {{
  {{
    ?item rdfs:label "{phrase}"@en .
  }} UNION {{
    ?item skos:altLabel "{phrase}"@en .
    BIND(true AS ?matchedAlias)
  }}
  OPTIONAL {{ ?item wdt:P31 ?direct . BIND(?direct AS ?class) }}
  OPTIONAL {{ ?item wdt:P31/wdt:P279 ?parent . BIND(?parent AS ?class) }}
  SERVICE wikibase:label {{ bd:serviceParameter wikibase:language "en" . }}
}}
"""


class SparqlKBClient:
    """Live client for a Wikidata-style SPARQL endpoint.

    One request per second at most, identified by a client User-Agent.
    Transport problems raise retryable LinkingError; malformed payloads a
    non-retryable one.
    """

    def __init__(
        self,
        endpoint: str = DEFAULT_SPARQL_ENDPOINT,
        min_interval: float = 1.0,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.limiter = RateLimiter(min_interval)
        self.session = session or requests.Session()
        self.session.headers["User-Agent"] = CLIENT_ID

    def lookup(self, phrase: str) -> list[KBEntry]:
        self.limiter.wait()
        query = _SPARQL_TEMPLATE.format(phrase=phrase.replace('"', '\\"'))
        try:
            response = self.session.get(
                self.endpoint,
                params={"query": query, "format": "json"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise LinkingError(f"KB request failed: {exc}", retryable=True) from exc
        if response.status_code in (429, 500, 502, 503, 504):
            raise LinkingError(
                f"KB endpoint returned {response.status_code}", retryable=True
            )
        if response.status_code != 200:
            raise LinkingError(
                f"KB endpoint returned {response.status_code}", retryable=False
            )
        try:
            bindings = response.json()["results"]["bindings"]
        except (ValueError, KeyError) as exc:
            raise LinkingError(f"malformed KB response: {exc}", retryable=False) from exc
        return self._entries_from_bindings(phrase, bindings)

    @staticmethod
    def _entries_from_bindings(phrase: str, bindings: list[dict]) -> list[KBEntry]:
        def value(binding: dict, key: str) -> str:
            return binding.get(key, {}).get("value", "")

        grouped: dict[str, dict] = {}
        try:
            for binding in bindings:
                item = value(binding, "item")
                kb_id = item.rsplit("/", 1)[-1]
                record = grouped.setdefault(
                    kb_id,
                    {"label": "", "description": "", "classes": set(), "alias": False},
                )
                if value(binding, "itemLabel"):
                    record["label"] = value(binding, "itemLabel")
                if value(binding, "itemDescription"):
                    record["description"] = value(binding, "itemDescription")
                class_uri = value(binding, "class")
                if class_uri:
                    record["classes"].add(class_uri.rsplit("/", 1)[-1])
                if value(binding, "matchedAlias"):
                    record["alias"] = True
        except AttributeError as exc:
            raise LinkingError(f"malformed KB response: {exc}", retryable=False) from exc
        entries = []
        for kb_id, record in grouped.items():
            # alias matches keep the phrase among aliases so ranking can see it
            aliases = (phrase,) if record["alias"] else ()
            entries.append(
                KBEntry(
                    kb_id=kb_id,
                    label=record["label"] or phrase,
                    aliases=aliases,
                    description=record["description"],
                    classes=frozenset(record["classes"]),
                )
            )
        return entries


def link_concept(
    phrase: str,
    client: KBClient,
    exclusions: ExclusionList = DEFAULT_EXCLUSIONS,
) -> list[EntityCandidate]:
    """Look up one phrase, drop excluded entries, rank the rest.

    Ranking: label matches before alias matches, then ascending numeric KB id.
    """
    wanted = _normalize_phrase(phrase)
    candidates = []
    for entry in client.lookup(phrase):
        if entry.classes & exclusions.ids:
            continue
        matched_via = (
            "label" if _normalize_phrase(entry.label) == wanted else "alias"
        )
        candidates.append(
            EntityCandidate(
                kb_id=entry.kb_id,
                label=entry.label,
                matched_via=matched_via,
                description=entry.description,
                classes=entry.classes,
            )
        )
    candidates.sort(
        key=lambda c: (0 if c.matched_via == "label" else 1, *_kb_id_rank(c.kb_id))
    )
    return candidates


@dataclass
class LinkRun:
    """Outcome of a batch linking run, including client traffic counters."""

    predictions: list[LinkPrediction] = field(default_factory=list)
    client_calls: int = 0
    cache_hits: int = 0
    retries: int = 0
    warnings: list[str] = field(default_factory=list)


def link_all(
    concepts: Iterable[str],
    client: KBClient,
    exclusions: ExclusionList = DEFAULT_EXCLUSIONS,
    retry_budget: int = 2,
) -> LinkRun:
    """Link many concepts with an in-memory cache keyed by normalized phrase.

    Retryable failures are retried up to retry_budget times per concept;
    when the budget runs out the concept gets an empty prediction and a
    warning, and the run carries on.
    """
    run = LinkRun()
    cache: dict[str, tuple[str, ...]] = {}
    for concept in concepts:
        key = _normalize_phrase(concept)
        if key in cache:
            run.cache_hits += 1
            run.predictions.append(LinkPrediction(concept, cache[key]))
            continue
        ranked: tuple[str, ...] = ()
        attempts = 0
        while True:
            try:
                run.client_calls += 1
                ranked = tuple(
                    c.kb_id for c in link_concept(concept, client, exclusions)
                )
                break
            except LinkingError as exc:
                if exc.retryable and attempts < retry_budget:
                    attempts += 1
                    run.retries += 1
                    logger.warning("retrying %r after: %s", concept, exc)
                    continue
                run.warnings.append(f"{concept}: {exc}")
                logger.warning("giving up on %r: %s", concept, exc)
                break
        cache[key] = ranked
        run.predictions.append(LinkPrediction(concept, ranked))
    return run


class ConceptLinker:
    """Cache-backed linker facade, safe for concurrent readers."""

    def __init__(self, client: KBClient, exclusions: ExclusionList = DEFAULT_EXCLUSIONS):
        self.client = client
        self.exclusions = exclusions
        self._cache: dict[str, list[EntityCandidate]] = {}
        self._lock = threading.Lock()

    def link(self, phrase: str) -> list[EntityCandidate]:
        key = _normalize_phrase(phrase)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        candidates = link_concept(phrase, self.client, self.exclusions)
        with self._lock:
            self._cache.setdefault(key, candidates)
        return candidates
