import json
import subprocess
import sys

import pytest

import mathcorpus.cli as cli
from mathcorpus.cli import main

EXPECTED_SEARCH_OUTPUT = """\
query: double category

entities:
  [kb] double category (Q99613675) via label  https://www.wikidata.org/wiki/Q99613675
  [kb] framed bicategory (Q105985577) via alias  https://www.wikidata.org/wiki/Q105985577
  [encyclopedia] double category (nlab)  https://ncatlab.org/nlab/show/double+category

[bct]
(no results)

[nlab]
nlab-double-category: double category  https://ncatlab.org/nlab/show/double+category
  (0) A **double category** is a category with two kinds of morphisms .
  (1) **Double categories** generalize 2-categories .

[tac]
tac-0001: Reflexive coequalizers and sifted colimits  http://www.tac.mta.ca/tac/volumes/38/1/38-01abs.html
  (1) We study **double categories** with sifted colimits .
tac-0002: Free double categories and state sum constructions  http://www.tac.mta.ca/tac/volumes/39/4/39-04abs.html
  (0) Every free **double category** admits a state sum construction .
  (1) The construction extends to every **double category** with finite limits .
"""


@pytest.fixture(scope="module")
def store(tmp_path_factory, demo_dir):
    """Corpus store built by running the ingest command on the demo corpora."""
    store_dir = tmp_path_factory.mktemp("store")
    manifest = store_dir / "manifest.json"
    for name in ("tac", "nlab", "bct"):
        code = main(
            [
                "ingest",
                "--corpus-id", name,
                "--input", str(demo_dir / "corpora" / f"{name}.conllu"),
                "--out", str(manifest),
            ]
        )
        assert code == 0
    return store_dir


def run_cli(capsys, *argv):
    capsys.readouterr()
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestIngest:
    def test_summary_lists_every_corpus(self, store, demo_dir, capsys):
        code, out, err = run_cli(
            capsys,
            "ingest",
            "--corpus-id", "tac",
            "--input", str(demo_dir / "corpora" / "tac.conllu"),
            "--out", str(store / "manifest.json"),
        )
        assert code == 0
        assert out.splitlines() == [
            "bct: 2 documents, 4 sentences (annotated)",
            "nlab: 3 documents, 5 sentences (annotated)",
            "tac: 2 documents, 4 sentences (annotated)",
        ]
        assert (store / "index.snapshot").exists()
        assert (store / "tac.conllu").exists()

    def test_filtered_documents_reported(self, tmp_path, capsys):
        source = tmp_path / "src.conllu"
        source.write_text(
            "# newdoc id = keep-1\n"
            "# title = double category\n"
            "1\tx\tx\tNOUN\tNN\t_\t0\troot\t_\t_\n"
            "\n"
            "# newdoc id = drop-1\n"
            "# title = List of categories\n"
            "1\ty\ty\tNOUN\tNN\t_\t0\troot\t_\t_\n"
        )
        code, out, err = run_cli(
            capsys,
            "ingest",
            "--corpus-id", "web",
            "--input", str(source),
            "--out", str(tmp_path / "manifest.json"),
        )
        assert code == 0
        assert "dropped drop-1: meta-article: list" in err
        assert "web: 1 documents, 1 sentences (annotated)" in out
        assert "dropped 1 document(s)" in out

    def test_raw_text_ingestion(self, tmp_path, capsys):
        (tmp_path / "notes.md").write_text(
            "# Rings\n\nA **ring** is an abelian group with multiplication."
        )
        code, out, err = run_cli(
            capsys,
            "ingest",
            "--corpus-id", "notes",
            "--input", str(tmp_path / "notes.md"),
            "--out", str(tmp_path / "manifest.json"),
        )
        assert code == 0
        assert "notes: 1 documents," in out
        assert "(raw)" in out

    def test_parse_error_names_file_and_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.conllu"
        bad.write_text("1\tx\tx\tNOUN\tNN\t_\t0\troot\t_\n")
        code, out, err = run_cli(
            capsys,
            "ingest",
            "--corpus-id", "bad",
            "--input", str(bad),
            "--out", str(tmp_path / "manifest.json"),
        )
        assert code == 1
        assert "error:" in err and "bad.conllu" in err and "line 1" in err


class TestSearch:
    def test_exact_output(self, store, demo_kb, demo_class_graph, capsys):
        code, out, err = run_cli(
            capsys,
            "search",
            "--q", "double category",
            "--snapshot", str(store / "index.snapshot"),
            "--kb", str(demo_kb),
            "--class-graph", str(demo_class_graph),
        )
        assert code == 0
        assert out == EXPECTED_SEARCH_OUTPUT

    def test_without_kb_prints_encyclopedia_only(self, store, capsys):
        code, out, _ = run_cli(
            capsys,
            "search",
            "--q", "double category",
            "--snapshot", str(store / "index.snapshot"),
        )
        assert code == 0
        assert "[kb]" not in out
        assert "  [encyclopedia] double category (nlab)" in out

    def test_no_entities_prints_none(self, store, capsys):
        code, out, _ = run_cli(
            capsys,
            "search",
            "--q", "functors preserve",
            "--snapshot", str(store / "index.snapshot"),
        )
        assert code == 0
        assert "entities:\n  (none)" in out

    def test_corpus_restriction(self, store, capsys):
        code, out, _ = run_cli(
            capsys,
            "search",
            "--q", "double category",
            "--corpora", "bct",
            "--snapshot", str(store / "index.snapshot"),
        )
        assert code == 0
        assert "[bct]\n(no results)" in out
        assert "[nlab]" not in out

    def test_missing_snapshot_is_actionable_user_error(self, tmp_path, capsys):
        code, out, err = run_cli(
            capsys,
            "search",
            "--q", "category",
            "--snapshot", str(tmp_path / "index.snapshot"),
        )
        assert code == 1
        assert err.startswith("error: index snapshot not found")
        assert "mathcorpus ingest" in err

    def test_unknown_corpus_is_user_error(self, store, capsys):
        code, out, err = run_cli(
            capsys,
            "search",
            "--q", "category",
            "--corpora", "web",
            "--snapshot", str(store / "index.snapshot"),
        )
        assert code == 1
        assert "error: unknown corpus: web" in err

    def test_matches_http_payload(self, store, demo_manifest, capsys):
        from fastapi.testclient import TestClient

        from mathcorpus.service import ServiceSettings, create_app

        app = create_app(ServiceSettings(manifest=demo_manifest, linker_mode="off"))
        api = TestClient(app).get("/api/search", params={"q": "sifted colimits"}).json()
        api_docs = [
            (section["corpus_id"], doc["doc_id"], [s["ordinal"] for s in doc["sentences"]])
            for section in api["per_corpus"]
            for doc in section["documents"]
        ]

        code, out, _ = run_cli(
            capsys,
            "search",
            "--q", "sifted colimits",
            "--snapshot", str(store / "index.snapshot"),
        )
        assert code == 0
        cli_docs = []
        current_corpus = None
        for line in out.splitlines():
            if line.startswith("[") and line.endswith("]"):
                current_corpus = line[1:-1]
            elif current_corpus is None:
                continue  # header and entity lines come before corpus sections
            elif line and not line.startswith(" ") and ": " in line:
                cli_docs.append((current_corpus, line.split(": ")[0], []))
            elif line.startswith("  (") and cli_docs:
                ordinal = int(line.split(")")[0].lstrip(" ("))
                cli_docs[-1][2].append(ordinal)
        assert cli_docs == api_docs


class TestEvaluate:
    def test_terms_single_gold(self, demo_dir, capsys):
        code, out, _ = run_cli(
            capsys,
            "evaluate",
            "--task", "terms",
            "--pred", str(demo_dir / "benchmarks" / "terms_pred.txt"),
            "--gold", str(demo_dir / "benchmarks" / "terms_gold.txt"),
        )
        assert code == 0
        assert out == (
            "benchmark       P     R    F1\n"
            "terms_gold   0.50  0.50  0.50\n"
        )

    def test_linking_table(self, demo_dir, capsys):
        code, out, _ = run_cli(
            capsys,
            "evaluate",
            "--task", "linking",
            "--pred", str(demo_dir / "benchmarks" / "el_pred.jsonl"),
            "--gold", str(demo_dir / "benchmarks" / "el_gold.jsonl"),
        )
        assert code == 0
        assert out == (
            "benchmark    P@1     R    F1\n"
            "linking     0.67  1.00  0.80\n"
        )

    def test_definitions_table(self, demo_dir, capsys):
        code, out, _ = run_cli(
            capsys,
            "evaluate",
            "--task", "definitions",
            "--pred", str(demo_dir / "benchmarks" / "de_pred.jsonl"),
            "--gold", str(demo_dir / "benchmarks" / "de_gold.jsonl"),
        )
        assert code == 0
        assert out == (
            "benchmark        P     R    F1\n"
            "definitions   0.71  0.59  0.65\n"
        )

    def test_per_benchmark_rows_and_combined_union(self, demo_dir, capsys):
        from mathcorpus.benchmark import (
            eval_terms,
            load_term_benchmark,
            parse_metrics_table,
        )
        from mathcorpus.extract import TermSet

        bench = demo_dir / "benchmarks"
        gold_names = ["keywords", "titles", "glossary", "mwes"]
        code, out, _ = run_cli(
            capsys,
            "evaluate",
            "--task", "terms",
            "--per-benchmark",
            "--pred", str(bench / "terms_pred.txt"),
            "--gold", *[str(bench / f"{n}.txt") for n in gold_names],
        )
        assert code == 0
        parsed = parse_metrics_table(out)
        assert list(parsed) == gold_names + ["combined"]

        pred = load_term_benchmark(bench / "terms_pred.txt", "glossary")
        golds = [load_term_benchmark(bench / f"{n}.txt", n) for n in gold_names]
        union = TermSet(
            frozenset().union(*(g.terms for g in golds)), "lowercase", "combined"
        )
        for name, gold in zip(gold_names, golds):
            expected = eval_terms(pred, gold)
            assert parsed[name].precision == float(f"{expected.precision:.2f}")
            assert parsed[name].f1 == float(f"{expected.f1:.2f}")
        combined = eval_terms(pred, union)
        assert parsed["combined"].recall == float(f"{combined.recall:.2f}")

    def test_definitions_rejects_multiple_gold_files(self, demo_dir, capsys):
        gold = str(demo_dir / "benchmarks" / "de_gold.jsonl")
        code, out, err = run_cli(
            capsys,
            "evaluate",
            "--task", "definitions",
            "--pred", str(demo_dir / "benchmarks" / "de_pred.jsonl"),
            "--gold", gold, gold,
        )
        assert code == 1
        assert "exactly one gold file" in err


class TestExtract:
    def test_mwe_terms(self, demo_dir, capsys):
        code, out, _ = run_cli(
            capsys,
            "extract",
            "--method", "mwe",
            "--manifest", str(demo_dir / "corpora" / "manifest.json"),
            "--corpus-id", "tac",
        )
        assert code == 0
        assert out == "double category\n"

    def test_textrank_scores(self, demo_dir, capsys):
        code, out, _ = run_cli(
            capsys,
            "extract",
            "--method", "textrank",
            "--manifest", str(demo_dir / "corpora" / "manifest.json"),
            "--corpus-id", "nlab",
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "finite product\t2.000000"
        scores = [float(line.split("\t")[1]) for line in lines]
        assert scores == sorted(scores, reverse=True)

    def test_out_flag_writes_file(self, demo_dir, tmp_path, capsys):
        target = tmp_path / "terms.txt"
        code, out, _ = run_cli(
            capsys,
            "extract",
            "--method", "mwe",
            "--manifest", str(demo_dir / "corpora" / "manifest.json"),
            "--corpus-id", "tac",
            "--out", str(target),
        )
        assert code == 0
        assert out == ""
        assert target.read_text() == "double category\n"

    def test_unknown_corpus_id(self, demo_dir, capsys):
        code, _, err = run_cli(
            capsys,
            "extract",
            "--method", "mwe",
            "--manifest", str(demo_dir / "corpora" / "manifest.json"),
            "--corpus-id", "web",
        )
        assert code == 1
        assert "error: corpus 'web' not in manifest" in err

    def test_raw_corpus_is_user_error(self, tmp_path, capsys):
        (tmp_path / "notes.txt").write_text("Rings are groups with more structure.")
        run_cli(
            capsys,
            "ingest",
            "--corpus-id", "notes",
            "--input", str(tmp_path / "notes.txt"),
            "--out", str(tmp_path / "manifest.json"),
        )
        code, _, err = run_cli(
            capsys,
            "extract",
            "--method", "mwe",
            "--manifest", str(tmp_path / "manifest.json"),
            "--corpus-id", "notes",
        )
        assert code == 1
        assert "error: corpus 'notes' has no POS annotations" in err


class TestLink:
    def test_fixture_run_with_cache(self, demo_dir, demo_kb, demo_class_graph, capsys):
        code, out, err = run_cli(
            capsys,
            "link",
            "--concepts", str(demo_dir / "benchmarks" / "concepts.txt"),
            "--mode", "fixture",
            "--kb", str(demo_kb),
            "--class-graph", str(demo_class_graph),
        )
        assert code == 0
        records = [json.loads(line) for line in out.splitlines()]
        assert records[0] == {
            "concept": "double category",
            "ranked_ids": ["Q99613675", "Q105985577"],
        }
        assert records[-1]["concept"] == "double category"
        assert records[-1]["ranked_ids"] == records[0]["ranked_ids"]
        assert (
            "link: 6 concepts, 5 client calls, 1 cache hits, 0 retries, 0 warnings"
            in err
        )

    def test_out_flag(self, demo_dir, demo_kb, demo_class_graph, tmp_path, capsys):
        target = tmp_path / "pred.jsonl"
        code, out, _ = run_cli(
            capsys,
            "link",
            "--concepts", str(demo_dir / "benchmarks" / "concepts.txt"),
            "--mode", "fixture",
            "--kb", str(demo_kb),
            "--class-graph", str(demo_class_graph),
            "--out", str(target),
        )
        assert code == 0
        assert out == ""
        assert len(target.read_text().splitlines()) == 6

    def test_fixture_mode_requires_kb_flags(self, demo_dir, capsys, monkeypatch):
        monkeypatch.delenv("MATHCORPUS_KB", raising=False)
        monkeypatch.delenv("MATHCORPUS_CLASS_GRAPH", raising=False)
        code, _, err = run_cli(
            capsys,
            "link",
            "--concepts", str(demo_dir / "benchmarks" / "concepts.txt"),
            "--mode", "fixture",
        )
        assert code == 1
        assert "fixture mode needs --kb and --class-graph" in err


class TestConfigPrecedence:
    def write_config(self, tmp_path, demo_dir):
        # relative paths in the file resolve against the file's directory
        config = tmp_path / "tool.config"
        config.write_text("kb = kb/entries.jsonl\nclass_graph = kb/class_graph.jsonl\n")
        (tmp_path / "kb").mkdir(exist_ok=True)
        for name in ("entries.jsonl", "class_graph.jsonl"):
            (tmp_path / "kb" / name).write_text(
                (demo_dir / "kb" / name).read_text()
            )
        return config

    def test_config_file_supplies_kb_paths(
        self, demo_dir, tmp_path, capsys, monkeypatch
    ):
        monkeypatch.delenv("MATHCORPUS_KB", raising=False)
        monkeypatch.delenv("MATHCORPUS_CLASS_GRAPH", raising=False)
        config = self.write_config(tmp_path, demo_dir)
        code, out, err = run_cli(
            capsys,
            "--config", str(config),
            "link",
            "--concepts", str(demo_dir / "benchmarks" / "concepts.txt"),
            "--mode", "fixture",
        )
        assert code == 0
        assert "5 client calls" in err

    def test_environment_overrides_config(
        self, demo_dir, tmp_path, capsys, monkeypatch
    ):
        config = self.write_config(tmp_path, demo_dir)
        monkeypatch.setenv("MATHCORPUS_KB", str(tmp_path / "missing.jsonl"))
        monkeypatch.delenv("MATHCORPUS_CLASS_GRAPH", raising=False)
        code, _, err = run_cli(
            capsys,
            "--config", str(config),
            "link",
            "--concepts", str(demo_dir / "benchmarks" / "concepts.txt"),
            "--mode", "fixture",
        )
        assert code == 1
        assert "missing.jsonl" in err

    def test_flag_overrides_environment(
        self, demo_dir, demo_kb, demo_class_graph, tmp_path, capsys, monkeypatch
    ):
        config = self.write_config(tmp_path, demo_dir)
        monkeypatch.setenv("MATHCORPUS_KB", str(tmp_path / "missing.jsonl"))
        code, _, err = run_cli(
            capsys,
            "--config", str(config),
            "link",
            "--concepts", str(demo_dir / "benchmarks" / "concepts.txt"),
            "--mode", "fixture",
            "--kb", str(demo_kb),
            "--class-graph", str(demo_class_graph),
        )
        assert code == 0
        assert "5 client calls" in err

    def test_bad_config_line_is_user_error(self, tmp_path, capsys):
        config = tmp_path / "tool.config"
        config.write_text("just a dangling line\n")
        code, _, err = run_cli(
            capsys,
            "--config", str(config),
            "search",
            "--q", "x",
        )
        assert code == 1
        assert "expected key = value" in err


class TestExitCodes:
    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        capsys.readouterr()

    def test_argparse_error_exits_one(self, capsys):
        assert main(["frobnicate"]) == 1
        capsys.readouterr()

    def test_missing_required_flag_exits_one(self, capsys):
        assert main(["search"]) == 1
        capsys.readouterr()

    def test_internal_error_exits_two(self, capsys, monkeypatch):
        def boom(args, config, config_dir):
            raise RuntimeError("wiring fault")

        monkeypatch.setitem(cli._COMMANDS, "search", boom)
        code, _, err = run_cli(capsys, "search", "--q", "x")
        assert code == 2
        assert err == "internal error: RuntimeError: wiring fault\n"


class TestByteStability:
    def run_module(self, args):
        return subprocess.run(
            [sys.executable, "-m", "mathcorpus", *args],
            capture_output=True,
            check=False,
        )

    def test_search_output_stable_across_processes(self, store):
        args = [
            "search",
            "--q", "double category",
            "--snapshot", str(store / "index.snapshot"),
        ]
        first = self.run_module(args)
        second = self.run_module(args)
        assert first.returncode == second.returncode == 0
        assert first.stdout == second.stdout
        assert first.stdout.decode().startswith("query: double category\n")

    def test_evaluate_output_stable_across_processes(self, demo_dir):
        args = [
            "evaluate",
            "--task", "linking",
            "--pred", str(demo_dir / "benchmarks" / "el_pred.jsonl"),
            "--gold", str(demo_dir / "benchmarks" / "el_gold.jsonl"),
        ]
        first = self.run_module(args)
        second = self.run_module(args)
        assert first.returncode == 0
        assert first.stdout == second.stdout
