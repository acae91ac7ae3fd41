import json
import threading
import time

import pytest
import requests

from mathcorpus.linker import (
    CLIENT_ID,
    DEFAULT_EXCLUSIONS,
    ConceptLinker,
    EntityCandidate,
    ExclusionList,
    FixtureKBClient,
    KBEntry,
    LinkingError,
    RateLimiter,
    SparqlKBClient,
    link_all,
    link_concept,
)


@pytest.fixture(scope="module")
def fixture_client(demo_kb, demo_class_graph):
    return FixtureKBClient(demo_kb, demo_class_graph)


class CountingClient:
    def __init__(self, inner):
        self.inner = inner
        self.calls = []

    def lookup(self, phrase):
        self.calls.append(phrase)
        return self.inner.lookup(phrase)


class ScriptedClient:
    """Fails `failures` lookups, then answers with the given entries."""

    def __init__(self, entries=(), failures=0, retryable=True):
        self.entries = list(entries)
        self.remaining_failures = failures
        self.retryable = retryable
        self.calls = 0

    def lookup(self, phrase):
        self.calls += 1
        if self.remaining_failures:
            self.remaining_failures -= 1
            raise LinkingError("scripted failure", retryable=self.retryable)
        return self.entries


def entry(kb_id, label, aliases=(), classes=frozenset()):
    return KBEntry(kb_id, label, tuple(aliases), "", frozenset(classes))


class TestFixtureClient:
    def test_lookup_is_case_and_spacing_insensitive(self, fixture_client):
        ids = {e.kb_id for e in fixture_client.lookup("Double  Category")}
        assert ids == {"Q99613675", "Q105985577"}

    def test_lookup_covers_aliases(self, fixture_client):
        ids = {e.kb_id for e in fixture_client.lookup("map")}
        assert "Q1775415" in ids  # "morphism", alias "map"
        assert "Q4006" in ids

    def test_classes_include_one_parent_level(self, fixture_client, demo_class_graph):
        raw_parents = {}
        for line in demo_class_graph.read_text().splitlines():
            record = json.loads(line)
            raw_parents[record["child"]] = set(record["parents"])
        (colimit_mountain,) = [
            e for e in fixture_client.lookup("colimit") if e.kb_id == "Q25347206"
        ]
        assert "Q8502" in colimit_mountain.classes
        assert raw_parents["Q8502"] <= colimit_mountain.classes

    def test_unknown_phrase_yields_nothing(self, fixture_client):
        assert fixture_client.lookup("no such phrase") == []

    def test_bad_kb_record_names_line(self, tmp_path, demo_class_graph):
        kb = tmp_path / "kb.jsonl"
        kb.write_text('{"kb_id": "Q1", "label": "x"}\n')
        with pytest.raises(ValueError, match=r"kb\.jsonl:1: bad KB record"):
            FixtureKBClient(kb, demo_class_graph)

    def test_bad_class_graph_record_names_line(self, tmp_path, demo_kb):
        graph = tmp_path / "graph.jsonl"
        graph.write_text('{"child": "Q1"}\n')
        with pytest.raises(ValueError, match=r"graph\.jsonl:1: bad class-graph"):
            FixtureKBClient(demo_kb, graph)

    def test_blank_lines_skipped(self, tmp_path):
        kb = tmp_path / "kb.jsonl"
        kb.write_text('\n{"kb_id": "Q1", "label": "x", "classes": []}\n\n')
        graph = tmp_path / "graph.jsonl"
        graph.write_text("\n")
        client = FixtureKBClient(kb, graph)
        assert [e.kb_id for e in client.lookup("x")] == ["Q1"]


class TestLinkConcept:
    def test_label_and_alias_candidates_ranked(self, fixture_client):
        candidates = link_concept("double category", fixture_client)
        assert [(c.kb_id, c.matched_via) for c in candidates] == [
            ("Q99613675", "label"),
            ("Q105985577", "alias"),
        ]
        assert candidates[1].label == "framed bicategory"

    @pytest.mark.parametrize(
        "phrase,survivor",
        [
            ("category", "Q719395"),
            ("ring", "Q161172"),
            ("colimit", "Q5146810"),
            ("map", "Q1775415"),
        ],
    )
    def test_excluded_homonyms_are_dropped(self, fixture_client, phrase, survivor):
        candidates = link_concept(phrase, fixture_client)
        assert [c.kb_id for c in candidates] == [survivor]

    def test_exclusion_changes_the_winner(self, fixture_client):
        # the everyday "field" entry has the numerically smaller id, so
        # without exclusion it would rank first
        candidates = link_concept("field", fixture_client)
        assert [c.kb_id for c in candidates] == ["Q190109"]
        lenient = link_concept("field", fixture_client, ExclusionList(entries=()))
        assert [c.kb_id for c in lenient][0] == "Q188869"

    def test_all_candidates_excluded(self, fixture_client):
        assert link_concept("noon", fixture_client) == []

    def test_label_tier_beats_numeric_order(self):
        client = ScriptedClient(
            entries=[
                entry("Q10", "other label", aliases=("widget",)),
                entry("Q20", "widget"),
            ]
        )
        candidates = link_concept("widget", client)
        assert [(c.kb_id, c.matched_via) for c in candidates] == [
            ("Q20", "label"),
            ("Q10", "alias"),
        ]

    def test_numeric_id_order_not_lexicographic(self):
        client = ScriptedClient(
            entries=[entry("Q10", "widget"), entry("Q9", "widget")]
        )
        assert [c.kb_id for c in link_concept("widget", client)] == ["Q9", "Q10"]

    def test_ids_without_digits_rank_last(self):
        client = ScriptedClient(
            entries=[entry("LOCAL", "widget"), entry("Q7", "widget")]
        )
        assert [c.kb_id for c in link_concept("widget", client)] == ["Q7", "LOCAL"]

    def test_exclusion_matches_expanded_classes(self):
        client = ScriptedClient(
            entries=[entry("Q1", "widget", classes={"Q223557"})]
        )
        assert link_concept("widget", client) == []
        assert len(link_concept("widget", client, ExclusionList(entries=()))) == 1


class TestLinkAll:
    def test_cache_prevents_repeat_lookups(self, fixture_client):
        counting = CountingClient(fixture_client)
        run = link_all(["double category", "category", "Double  Category"], counting)
        assert len(run.predictions) == 3
        assert run.client_calls == 2
        assert run.cache_hits == 1
        assert len(counting.calls) == 2
        assert run.predictions[2].ranked_ids == run.predictions[0].ranked_ids
        assert run.predictions[2].concept == "Double  Category"

    def test_retry_then_success(self):
        client = ScriptedClient(entries=[entry("Q1", "x")], failures=1)
        run = link_all(["x"], client)
        assert run.retries == 1
        assert run.client_calls == 2
        assert run.warnings == []
        assert run.predictions[0].ranked_ids == ("Q1",)

    def test_budget_exhaustion_warns_and_continues(self):
        client = ScriptedClient(entries=[entry("Q1", "x")], failures=10)
        run = link_all(["x", "y"], client, retry_budget=2)
        assert run.predictions[0].ranked_ids == ()
        assert run.retries >= 2
        assert any(w.startswith("x:") for w in run.warnings)
        assert len(run.predictions) == 2

    def test_non_retryable_failure_never_retries(self):
        client = ScriptedClient(failures=5, retryable=False)
        run = link_all(["x"], client, retry_budget=2)
        assert run.retries == 0
        assert run.client_calls == 1
        assert run.predictions[0].ranked_ids == ()
        assert len(run.warnings) == 1

    def test_failed_concept_result_is_cached_within_run(self):
        client = ScriptedClient(failures=100, retryable=False)
        run = link_all(["x", "x"], client)
        assert run.client_calls == 1
        assert run.cache_hits == 1
        assert [p.ranked_ids for p in run.predictions] == [(), ()]


class TestConceptLinker:
    def test_duplicate_phrases_hit_cache(self, fixture_client):
        counting = CountingClient(fixture_client)
        linker = ConceptLinker(counting)
        first = linker.link("Double Category")
        second = linker.link(" double   category ")
        assert first == second
        assert len(counting.calls) == 1

    def test_concurrent_links_agree(self, fixture_client):
        linker = ConceptLinker(fixture_client)
        results = []

        def work():
            results.append(linker.link("double category"))

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(results) == 8
        assert all(r == results[0] for r in results)
        assert results[0][0].kb_id == "Q99613675"


class FakeResponse:
    def __init__(self, status_code=200, payload=None, invalid_json=False):
        self.status_code = status_code
        self.payload = payload
        self.invalid_json = invalid_json

    def json(self):
        if self.invalid_json:
            raise ValueError("not json")
        return self.payload


class FakeSession:
    def __init__(self, response=None, exception=None):
        self.headers = {}
        self.response = response
        self.exception = exception
        self.requests = []

    def get(self, url, params=None, timeout=None):
        self.requests.append((url, params, timeout))
        if self.exception is not None:
            raise self.exception
        return self.response


def sparql_binding(kb_id, label="", description="", class_id="", alias=False):
    binding = {"item": {"value": f"http://www.wikidata.org/entity/{kb_id}"}}
    if label:
        binding["itemLabel"] = {"value": label}
    if description:
        binding["itemDescription"] = {"value": description}
    if class_id:
        binding["class"] = {"value": f"http://www.wikidata.org/entity/{class_id}"}
    if alias:
        binding["matchedAlias"] = {"value": "true"}
    return binding


class TestSparqlClient:
    def make_client(self, session):
        return SparqlKBClient(
            endpoint="http://kb.test/sparql", min_interval=0.0, session=session
        )

    def payload(self, bindings):
        return {"results": {"bindings": bindings}}

    def test_groups_bindings_into_entries(self):
        bindings = [
            sparql_binding("Q99613675", "double category", "in category theory", "Q2754677"),
            sparql_binding("Q99613675", "double category", class_id="Q7184903"),
            sparql_binding("Q105985577", "framed bicategory", alias=True),
        ]
        session = FakeSession(FakeResponse(payload=self.payload(bindings)))
        entries = self.make_client(session).lookup("double category")
        by_id = {e.kb_id: e for e in entries}
        assert by_id["Q99613675"].classes == frozenset({"Q2754677", "Q7184903"})
        assert by_id["Q99613675"].aliases == ()
        assert by_id["Q99613675"].description == "in category theory"
        assert by_id["Q105985577"].aliases == ("double category",)
        ranked = link_concept("double category", self.make_client(session))
        assert [c.matched_via for c in ranked] == ["label", "alias"]

    def test_sets_user_agent_and_escapes_phrase(self):
        session = FakeSession(FakeResponse(payload=self.payload([])))
        client = self.make_client(session)
        assert session.headers["User-Agent"] == CLIENT_ID
        client.lookup('say "colimit"')
        (_, params, timeout) = session.requests[0]
        assert '\\"colimit\\"' in params["query"]
        assert params["format"] == "json"
        assert timeout == 30.0

    @pytest.mark.parametrize("status", [429, 500, 502, 503, 504])
    def test_server_pressure_is_retryable(self, status):
        session = FakeSession(FakeResponse(status_code=status))
        with pytest.raises(LinkingError) as exc_info:
            self.make_client(session).lookup("x")
        assert exc_info.value.retryable

    @pytest.mark.parametrize("status", [301, 400, 403, 404])
    def test_other_statuses_are_not_retryable(self, status):
        session = FakeSession(FakeResponse(status_code=status))
        with pytest.raises(LinkingError) as exc_info:
            self.make_client(session).lookup("x")
        assert not exc_info.value.retryable

    def test_transport_errors_are_retryable(self):
        session = FakeSession(exception=requests.ConnectionError("boom"))
        with pytest.raises(LinkingError) as exc_info:
            self.make_client(session).lookup("x")
        assert exc_info.value.retryable

    def test_invalid_json_is_not_retryable(self):
        session = FakeSession(FakeResponse(invalid_json=True))
        with pytest.raises(LinkingError, match="malformed KB response") as exc_info:
            self.make_client(session).lookup("x")
        assert not exc_info.value.retryable

    def test_missing_keys_are_not_retryable(self):
        session = FakeSession(FakeResponse(payload={"nope": True}))
        with pytest.raises(LinkingError, match="malformed KB response") as exc_info:
            self.make_client(session).lookup("x")
        assert not exc_info.value.retryable

    def test_malformed_binding_shape_is_not_retryable(self):
        payload = self.payload([{"item": "not a dict"}])
        session = FakeSession(FakeResponse(payload=payload))
        with pytest.raises(LinkingError, match="malformed KB response") as exc_info:
            self.make_client(session).lookup("x")
        assert not exc_info.value.retryable

    def test_rate_limiter_spaces_calls(self):
        limiter = RateLimiter(min_interval=0.05)
        start = time.monotonic()
        limiter.wait()
        limiter.wait()
        assert time.monotonic() - start >= 0.05


class TestExclusionList:
    def test_default_list_names_ten_classes(self):
        assert len(DEFAULT_EXCLUSIONS.entries) == 10
        assert len(DEFAULT_EXCLUSIONS.ids) == 10
        assert DEFAULT_EXCLUSIONS.name_of("Q8142") == "currency"
        assert DEFAULT_EXCLUSIONS.name_of("Q404404") == "Q404404"

    def test_candidate_shape(self, fixture_client):
        (candidate,) = link_concept("functor", fixture_client)
        assert candidate == EntityCandidate(
            kb_id="Q864475",
            label="functor",
            matched_via="label",
            description=candidate.description,
            classes=candidate.classes,
        )
