"""Tests for the LangGraph experiment orchestrator."""

import json
from unittest.mock import MagicMock, patch

import pytest

from src.config import DecodeConfig
from src.errors import EXIT_IO
from src.models.candidates import load_candidate_table
from src.pipeline.orchestrator import (
    ExperimentInputs,
    ExperimentState,
    _route_mode,
    _route_scored,
    build_graph,
    compare_modes,
    load_inputs,
    run_experiment,
)
from tests.conftest import BUSH_DIR

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def decode_config() -> DecodeConfig:
    return DecodeConfig(alpha=0.75, k_min=1, tau=0.10)


@pytest.fixture
def replay_inputs(replay_scores, replay_gold, tmp_path) -> ExperimentInputs:
    return ExperimentInputs(
        scores=replay_scores,
        gold=replay_gold,
        out=tmp_path / "alignment.tsv",
        trace=tmp_path / "trace.tsv",
        report=tmp_path / "report.json",
    )


# ---------------------------------------------------------------------------
# Unit tests: conditional routing
# ---------------------------------------------------------------------------


class TestConditionalRouting:
    @pytest.mark.parametrize(
        ("mode", "expected"),
        [
            ("score", "score_only"),
            ("baseline", "score_only"),
            ("jea", "score_only"),
            ("ehd", "decode_ehd"),
            ("decode", "decode_ehd"),
        ],
    )
    def test_route_mode(self, mode, expected) -> None:
        state: ExperimentState = {"mode": mode, "errors": []}
        assert _route_mode(state) == expected

    def test_scored_routes_by_mode(self) -> None:
        state: ExperimentState = {"mode": "jea", "errors": []}
        assert _route_scored(state) == "decode_jea"
        state = {"mode": "score", "errors": []}
        assert _route_scored(state) == "evaluate"

    def test_failure_routes_to_report(self) -> None:
        state: ExperimentState = {
            "mode": "baseline",
            "failure": RuntimeError("boom"),
            "errors": [],
        }
        assert _route_scored(state) == "report_failure"


# ---------------------------------------------------------------------------
# Unit tests: individual node functions
# ---------------------------------------------------------------------------


class TestLoadInputs:
    def test_gold_test_sources_are_decoded(self, replay_inputs) -> None:
        state: ExperimentState = {
            "inputs": replay_inputs.model_copy(update={"train_fraction": 0.3}),
            "errors": [],
        }
        result = load_inputs(state)
        assert len(result["sources"]) == 7
        assert len(result["seeds"]) == 3
        assert set(result["sources"]).isdisjoint(result["seeds"].pairs)

    def test_dev_split_carved_from_seeds(self, replay_inputs) -> None:
        inputs = replay_inputs.model_copy(update={"train_fraction": 0.5, "dev": True})
        full = load_inputs(
            {"inputs": inputs.model_copy(update={"dev": False}), "errors": []}
        )
        result = load_inputs({"inputs": inputs, "errors": []})
        assert len(result["sources"]) == 1
        assert len(result["seeds"]) == 4
        assert set(result["sources"]) <= set(full["seeds"].pairs)
        assert set(result["seeds"].pairs) <= set(full["seeds"].pairs)

    def test_dev_without_seeds_recorded(self, replay_inputs) -> None:
        inputs = replay_inputs.model_copy(update={"dev": True})
        result = load_inputs({"inputs": inputs, "errors": []})
        assert "Loading inputs failed" in result["errors"][0]

    def test_without_gold_decodes_every_scored_source(self, replay_scores) -> None:
        state: ExperimentState = {
            "inputs": ExperimentInputs(scores=replay_scores),
            "errors": [],
        }
        result = load_inputs(state)
        assert result["sources"] == [f"s{i:02d}" for i in range(1, 11)]
        assert result["gold"] is None

    def test_missing_inputs_recorded(self) -> None:
        state: ExperimentState = {"inputs": ExperimentInputs(), "errors": []}
        result = load_inputs(state)
        assert "Loading inputs failed" in result["errors"][0]
        assert result["failure"] is not None


class TestBuildGraph:
    def test_graph_has_expected_nodes(self) -> None:
        compiled = build_graph().compile()
        node_names = set(compiled.get_graph().nodes.keys())
        for name in ("load_inputs", "decode_jea", "decode_ehd", "report_failure"):
            assert name in node_names


# ---------------------------------------------------------------------------
# Integration-style tests: replayed score file
# ---------------------------------------------------------------------------


class TestRunExperiment:
    def test_baseline(self, decode_config, replay_inputs) -> None:
        report = run_experiment("baseline", decode_config, inputs=replay_inputs)
        assert report.status == "ok"
        assert report.hits_at_1 == pytest.approx(0.6)
        assert report.many_to_one_rate == pytest.approx(0.8)
        assert report.rounds == 0

    def test_jea(self, decode_config, replay_inputs) -> None:
        report = run_experiment("jea", decode_config, inputs=replay_inputs)
        assert report.hits_at_1 == pytest.approx(0.8)
        assert report.many_to_one_rate == 0.0
        assert report.subspaces == 5
        assert report.max_subspace == 3

    def test_ehd(self, decode_config, replay_inputs) -> None:
        report = run_experiment("ehd", decode_config, inputs=replay_inputs)
        assert report.hits_at_1 == pytest.approx(0.8)
        assert report.many_to_one_rate == pytest.approx(0.4)
        assert report.rounds == 3
        assert [t.new_easy for t in report.traces] == [3, 3, 0]

    def test_decode_writes_outputs(self, decode_config, replay_inputs) -> None:
        report = run_experiment("decode", decode_config, inputs=replay_inputs)
        assert report.exit_code == 0
        assert report.hits_at_1 == pytest.approx(0.8)
        assert report.many_to_one_rate == 0.0
        assert report.aligned == 10

        rows = replay_inputs.out.read_text(encoding="utf-8").splitlines()
        assert len(rows) == 10
        assert rows[0].split("\t")[:2] == ["s01", "t01"]
        trace = replay_inputs.trace.read_text(encoding="utf-8").splitlines()
        assert trace[0] == "round\tnew_easy\tcumulative_easy\thard_remaining"
        assert trace[1:] == ["1\t3\t3\t7", "2\t3\t6\t4", "3\t0\t6\t4"]
        saved = json.loads(replay_inputs.report.read_text(encoding="utf-8"))
        assert saved["mode"] == "decode"
        assert len(saved["traces"]) == 3

    def test_score_mode_writes_normalised_table(
        self, decode_config, replay_inputs
    ) -> None:
        report = run_experiment("score", decode_config, inputs=replay_inputs)
        assert report.hits_at_1 is None
        with open(replay_inputs.out, encoding="utf-8") as f:
            table = load_candidate_table(f, k=10)
        assert table.top1("s01") == ("t01", pytest.approx(0.85))

    def test_seeds_come_from_train_split(self, decode_config, replay_inputs) -> None:
        inputs = replay_inputs.model_copy(update={"train_fraction": 0.3, "seed": 1})
        report = run_experiment("decode", decode_config, inputs=inputs)
        assert report.status == "ok"
        assert report.aligned <= 7

    def test_desk_scorer_on_graphs(self, decode_config, tmp_path) -> None:
        inputs = ExperimentInputs(
            kg1=BUSH_DIR / "kg1.tsv",
            kg2=BUSH_DIR / "kg2.tsv",
            names1=BUSH_DIR / "names1.tsv",
            names2=BUSH_DIR / "names2.tsv",
            out=tmp_path / "a.tsv",
        )
        report = run_experiment("jea", decode_config, inputs=inputs)
        assert report.status == "ok"
        assert report.aligned == 3


# ---------------------------------------------------------------------------
# Failure handling
# ---------------------------------------------------------------------------


class TestFailures:
    def test_missing_score_file(self, decode_config, tmp_path) -> None:
        inputs = ExperimentInputs(
            scores=tmp_path / "absent.tsv", out=tmp_path / "alignment.tsv"
        )
        report = run_experiment("decode", decode_config, inputs=inputs)
        assert report.status == "failed"
        assert report.exit_code == EXIT_IO
        assert "Loading inputs failed" in report.errors[0]
        assert not (tmp_path / "alignment.tsv").exists()

    def test_malformed_score_file(self, decode_config, tmp_path) -> None:
        scores = tmp_path / "scores.tsv"
        scores.write_text("s\tt\n", encoding="utf-8")
        inputs = ExperimentInputs(scores=scores)
        report = run_experiment("jea", decode_config, inputs=inputs)
        assert report.exit_code == 65

    def test_no_inputs_is_contract_violation(self, decode_config) -> None:
        report = run_experiment("baseline", decode_config)
        assert report.status == "failed"
        assert report.exit_code == 70

    def test_scorer_failure_keeps_partial_trace(
        self, decode_config, replay_inputs, replay_scores
    ) -> None:
        with open(replay_scores, encoding="utf-8") as f:
            first_round = load_candidate_table(f, k=10)
        scorer = MagicMock()
        scorer.score.side_effect = [first_round, RuntimeError("scorer down")]

        with patch("src.pipeline.orchestrator.TableScorer", return_value=scorer):
            report = run_experiment("decode", decode_config, inputs=replay_inputs)

        assert report.status == "failed"
        assert report.exit_code == 75
        assert report.rounds == 1
        assert report.traces[0].new_easy == 3
        assert not replay_inputs.out.exists()
        assert any("EHD failed" in e for e in report.errors)


# ---------------------------------------------------------------------------
# Mode comparison
# ---------------------------------------------------------------------------


class TestCompareModes:
    def test_replay_table(self, decode_config, replay_inputs) -> None:
        comparison = compare_modes(decode_config, inputs=replay_inputs)
        assert comparison.ok
        hits = {label: r.hits_at_1 for label, r in comparison.rows.items()}
        assert hits == pytest.approx(
            {"baseline": 0.6, "ehd": 0.8, "jea": 0.8, "ehd+jea": 0.8}
        )
        assert comparison.rows["ehd+jea"].rounds == 3

        table = comparison.to_table().splitlines()
        assert table[0] == "method\thits@1\tmany_to_one\trounds"
        assert table[1] == "baseline\t0.6000\t0.8000\t0"

    def test_only_report_is_written(self, decode_config, replay_inputs) -> None:
        compare_modes(decode_config, inputs=replay_inputs)
        assert not replay_inputs.out.exists()
        assert not replay_inputs.trace.exists()
        saved = json.loads(replay_inputs.report.read_text(encoding="utf-8"))
        assert set(saved["rows"]) == {"baseline", "ehd", "jea", "ehd+jea"}
