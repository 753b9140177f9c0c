"""Tests for gold loading, splits, metrics and the report format."""

import io

import pytest

from src.decoding.assignment import AlignedPair, AlignmentSet
from src.decoding.easy_hard import RoundTrace
from src.errors import ContractViolation, InputParseError
from src.eval.metrics import (
    GoldAlignments,
    MetricsReport,
    carve_dev,
    hits_at_1,
    load_gold,
    load_gold_file,
    many_to_one_rate,
    split_gold,
    write_alignments,
)


def _alignment(mapping: dict[str, str]) -> AlignmentSet:
    return AlignmentSet.from_pairs(
        [AlignedPair(source=s, target=t, probability=1.0) for s, t in mapping.items()]
    )


@pytest.fixture
def ten_pairs() -> list[tuple[str, str]]:
    return [(f"s{i:02d}", f"t{i:02d}") for i in range(10)]


# ---------------------------------------------------------------------------
# Gold loading and splitting
# ---------------------------------------------------------------------------


class TestLoadGold:
    def test_rows(self) -> None:
        assert load_gold(["a\tx\n", "\n", "b\ty\r\n"]) == [("a", "x"), ("b", "y")]

    def test_wrong_arity(self) -> None:
        with pytest.raises(InputParseError) as exc_info:
            load_gold(["a\tx\n", "b\n"])
        assert exc_info.value.line_number == 2

    def test_file(self, replay_gold) -> None:
        pairs = load_gold_file(replay_gold)
        assert len(pairs) == 10
        assert pairs[0] == ("s01", "t01")

    def test_missing_file(self, tmp_path) -> None:
        with pytest.raises(OSError):
            load_gold_file(tmp_path / "absent.tsv")


class TestGoldAlignments:
    def test_repeated_source_rejected(self) -> None:
        with pytest.raises(ValueError):
            GoldAlignments(train=[("a", "x")], test=[("a", "y")])

    def test_repeated_target_rejected(self) -> None:
        with pytest.raises(ValueError):
            GoldAlignments(test=[("a", "x"), ("b", "x")])

    def test_seeds(self) -> None:
        gold = GoldAlignments(train=[("a", "x")], test=[("b", "y")])
        assert gold.seeds().pairs == {"a": "x"}
        assert gold.test_sources == ["b"]
        assert gold.train_fraction == 0.5


class TestSplitGold:
    def test_thirty_seventy(self, ten_pairs) -> None:
        gold = split_gold(ten_pairs, train_fraction=0.3, seed=7)
        assert len(gold.train) == 3
        assert len(gold.test) == 7
        assert sorted(gold.pairs) == ten_pairs

    def test_deterministic(self, ten_pairs) -> None:
        first = split_gold(ten_pairs, 0.3, seed=7)
        second = split_gold(list(reversed(ten_pairs)), 0.3, seed=7)
        assert first == second

    def test_seed_changes_split(self) -> None:
        pairs = [(f"s{i:03d}", f"t{i:03d}") for i in range(100)]
        assert split_gold(pairs, 0.3, seed=1) != split_gold(pairs, 0.3, seed=2)

    def test_zero_fraction_is_all_test(self, ten_pairs) -> None:
        gold = split_gold(ten_pairs, 0.0)
        assert gold.train == []
        assert len(gold.test) == 10

    @pytest.mark.parametrize("fraction", [-0.1, 1.0])
    def test_invalid_fraction(self, ten_pairs, fraction) -> None:
        with pytest.raises(ContractViolation):
            split_gold(ten_pairs, fraction)

    def test_carve_dev(self, ten_pairs) -> None:
        gold = GoldAlignments(train=ten_pairs)
        dev = carve_dev(gold, fraction=0.2, seed=3)
        assert len(dev.train) == 8
        assert len(dev.test) == 2
        assert set(dev.pairs) == set(ten_pairs)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


class TestHitsAt1:
    def test_partial(self) -> None:
        gold = GoldAlignments(test=[("a", "x"), ("b", "y"), ("c", "z"), ("d", "w")])
        pred = _alignment({"a": "x", "b": "z", "c": "z"})
        assert hits_at_1(pred, gold) == 0.5

    def test_seeds_not_scored(self) -> None:
        gold = GoldAlignments(train=[("a", "x")], test=[("b", "y")])
        assert hits_at_1(_alignment({"a": "x", "b": "y"}), gold) == 1.0

    def test_empty_prediction_scores_zero(self) -> None:
        gold = GoldAlignments(test=[("a", "x")])
        assert hits_at_1(AlignmentSet(), gold) == 0.0

    def test_no_test_pairs(self) -> None:
        with pytest.raises(ContractViolation):
            hits_at_1(_alignment({"a": "x"}), GoldAlignments(train=[("a", "x")]))


class TestManyToOneRate:
    def test_one_to_one(self) -> None:
        assert many_to_one_rate(_alignment({"a": "x", "b": "y"})) == 0.0

    def test_collisions(self) -> None:
        pred = _alignment({"a": "x", "b": "x", "c": "x", "d": "y"})
        assert many_to_one_rate(pred) == 0.75

    def test_empty(self) -> None:
        with pytest.raises(ContractViolation):
            many_to_one_rate(AlignmentSet())


# ---------------------------------------------------------------------------
# Report and alignment output
# ---------------------------------------------------------------------------


class TestMetricsReport:
    def test_to_kv(self) -> None:
        report = MetricsReport(
            mode="jea",
            hits_at_1=0.8,
            many_to_one_rate=0.0,
            max_subspace=2,
            subspaces=3,
            aligned=10,
        )
        lines = report.to_kv().splitlines()
        assert lines[0] == "mode=jea"
        assert "status=ok" in lines
        assert "hits_at_1=0.800000" in lines
        assert "max_subspace=2" in lines
        assert "exit_code=0" in lines
        assert not any(line.startswith("traces") for line in lines)

    def test_missing_metrics_are_na(self) -> None:
        report = MetricsReport(
            mode="ehd", status="failed", exit_code=74, errors=["load_inputs: gone"]
        )
        text = report.to_kv()
        assert "hits_at_1=NA\n" in text
        assert "error_1=load_inputs: gone\n" in text

    def test_json_round_trip_keeps_traces(self) -> None:
        trace = RoundTrace(
            round_index=1, new_easy=2, cumulative_easy=2, hard_remaining=5
        )
        report = MetricsReport(mode="decode", rounds=1, traces=[trace])
        again = MetricsReport.model_validate_json(report.model_dump_json())
        assert again.traces == [trace]

    def test_hits_range_validated(self) -> None:
        with pytest.raises(ValueError):
            MetricsReport(hits_at_1=1.5)


class TestWriteAlignments:
    def test_rows(self) -> None:
        out = io.StringIO()
        alignment = AlignmentSet.from_pairs(
            [
                AlignedPair(source="b", target="y", probability=0.5, flag="easy"),
                AlignedPair(source="a", target="x", probability=1.0, flag="joint"),
            ]
        )
        write_alignments(alignment, out)
        assert out.getvalue() == "a\tx\t1.0\tjoint\nb\ty\t0.5\teasy\n"
