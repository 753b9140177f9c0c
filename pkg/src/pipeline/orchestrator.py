"""LangGraph experiment orchestrator.

Connects the stages of one experiment run:
    load inputs → build scorer → decode (score | baseline | jea | ehd | decode)
    → evaluate → write outputs

Any stage failure routes straight to the report: the run comes back as a
failed ``MetricsReport`` with the partial round trace and the exit code of
the error, and no output file is written.

Usage:
    from src.config import DecodeConfig
    from src.pipeline.orchestrator import ExperimentInputs, run_experiment

    inputs = ExperimentInputs(scores="scores.tsv", gold="gold.tsv", out="a.tsv")
    report = run_experiment("decode", DecodeConfig(), inputs=inputs)
    print(report.to_kv())
"""

import json
import logging
from pathlib import Path
from typing import Annotated, Optional

from langgraph.graph import END, StateGraph
from pydantic import BaseModel, Field
from typing_extensions import TypedDict

from src.config import DecodeConfig, ScorerConfig
from src.decoding.assignment import (
    AlignmentSet,
    JointSolution,
    greedy_top1,
    solve_joint,
)
from src.decoding.easy_hard import RoundTrace, run_ehd, write_trace
from src.errors import ContractViolation, ScorerFailure, exit_code_for
from src.eval.metrics import (
    GoldAlignments,
    MetricsReport,
    Mode,
    carve_dev,
    hits_at_1,
    load_gold_file,
    many_to_one_rate,
    split_gold,
    write_alignments,
)
from src.kg.graph import KnowledgeGraph, load_kg_files
from src.models.candidates import (
    CandidateTable,
    ForcedMatches,
    RawScores,
    dump_candidate_table,
    load_raw_scores,
)
from src.models.scorer import DeskScorer, Scorer, TableScorer

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Inputs
# ---------------------------------------------------------------------------


class ExperimentInputs(BaseModel):
    """File paths and split settings of one run."""

    kg1: Optional[Path] = None
    kg2: Optional[Path] = None
    names1: Optional[Path] = None
    names2: Optional[Path] = None
    scores: Optional[Path] = None
    gold: Optional[Path] = None
    out: Optional[Path] = None
    trace: Optional[Path] = None
    report: Optional[Path] = None
    train_fraction: float = Field(
        0.0, ge=0.0, lt=1.0, description="Share of gold used as seeds"
    )
    dev: bool = Field(
        False, description="Test on a dev split carved from the seed pairs"
    )
    seed: int = 0


# ---------------------------------------------------------------------------
# State schema
# ---------------------------------------------------------------------------


def _append_errors(existing: list[str], new: list[str]) -> list[str]:
    """Reducer that appends new errors to existing list."""
    return existing + new


class ExperimentState(TypedDict, total=False):
    """Data flowing through one experiment run."""

    # Inputs
    mode: Mode
    decode_config: DecodeConfig
    scorer_config: ScorerConfig
    inputs: ExperimentInputs

    # Intermediate results
    kg_s: Optional[KnowledgeGraph]
    kg_t: Optional[KnowledgeGraph]
    raw_scores: Optional[RawScores]
    gold: Optional[GoldAlignments]
    seeds: ForcedMatches
    sources: list[str]
    scorer: Scorer

    # Outputs
    table: Optional[CandidateTable]
    alignment: Optional[AlignmentSet]
    joint: Optional[JointSolution]
    traces: list[RoundTrace]
    report: MetricsReport

    # Pipeline metadata
    failure: Optional[BaseException]
    errors: Annotated[list[str], _append_errors]


def _failed(stage: str, exc: BaseException, **extra: object) -> dict:
    logger.exception("%s failed", stage)
    return {"failure": exc, "errors": [f"{stage} failed: {exc}"], **extra}


# ---------------------------------------------------------------------------
# Node functions
# ---------------------------------------------------------------------------


def load_inputs(state: ExperimentState) -> dict:
    """Load graphs, scores and gold; pick the sources to decode."""
    inputs = state["inputs"]
    try:
        if inputs.scores is None and (inputs.kg1 is None or inputs.kg2 is None):
            raise ContractViolation("need --scores or both --kg1 and --kg2")
        kg_s = kg_t = None
        if inputs.kg1 is not None and inputs.kg2 is not None:
            kg_s = load_kg_files(inputs.kg1, inputs.names1)
            kg_t = load_kg_files(inputs.kg2, inputs.names2)
        raw_scores = None
        if inputs.scores is not None:
            with open(inputs.scores, encoding="utf-8", newline="\n") as f:
                raw_scores = load_raw_scores(f)

        gold = None
        if inputs.gold is not None:
            gold = split_gold(
                load_gold_file(inputs.gold), inputs.train_fraction, inputs.seed
            )
            if inputs.dev:
                if not gold.train:
                    raise ContractViolation("--dev needs seed pairs to carve from")
                gold = carve_dev(gold, seed=inputs.seed)
        elif inputs.dev:
            raise ContractViolation("--dev needs --gold")
        seeds = gold.seeds() if gold is not None else ForcedMatches()

        if gold is not None:
            sources = gold.test_sources
        elif raw_scores is not None:
            sources = sorted(raw_scores)
        else:
            sources = sorted(kg_s.entities)
    except Exception as exc:
        return _failed("Loading inputs", exc)

    logger.info("Loaded inputs: %d sources, %d seeds", len(sources), len(seeds))
    return {
        "kg_s": kg_s,
        "kg_t": kg_t,
        "raw_scores": raw_scores,
        "gold": gold,
        "seeds": seeds,
        "sources": sources,
    }


def build_scorer(state: ExperimentState) -> dict:
    """Replay the score file when given, otherwise match the two graphs."""
    config = state["decode_config"]
    scorer_config = state["scorer_config"]
    if state.get("raw_scores") is not None:
        scorer: Scorer = TableScorer(
            state["raw_scores"],
            top_k=config.top_k,
            method=scorer_config.normalize,
            temperature=scorer_config.temperature,
            exclude_claimed=scorer_config.exclude_claimed,
        )
    else:
        scorer = DeskScorer(
            state["kg_s"],
            state["kg_t"],
            top_k=config.top_k,
            config=scorer_config,
            workers=config.workers,
        )
    logger.info("Using %s", type(scorer).__name__)
    return {"scorer": scorer}


def score_only(state: ExperimentState) -> dict:
    """Score all sources once (``score``, ``baseline`` and ``jea`` modes)."""
    try:
        table = state["scorer"].score(state["sources"], state["seeds"])
    except Exception as exc:
        return _failed("Scoring", exc)
    if len(state["seeds"]):
        table = table.without_targets(state["seeds"].targets)
    return {"table": table}


def decode_baseline(state: ExperimentState) -> dict:
    """Per-source top-1."""
    return {"alignment": greedy_top1(state["table"])}


def decode_jea(state: ExperimentState) -> dict:
    """Joint alignment of the whole table."""
    config = state["decode_config"]
    try:
        joint = solve_joint(
            state["table"],
            config.tau,
            orphan_mode=config.orphan_mode,
            solver=config.solver,
            workers=config.workers,
        )
    except Exception as exc:
        return _failed("JEA", exc)
    return {"alignment": joint.alignment, "joint": joint}


def decode_ehd(state: ExperimentState) -> dict:
    """Easy-to-Hard decoding; ``decode`` finishes with JEA, ``ehd`` with top-1."""
    config = state["decode_config"].model_copy(
        update={"use_jea_final": state["mode"] == "decode"}
    )
    try:
        result = run_ehd(state["sources"], state["scorer"], config, state["seeds"])
    except ScorerFailure as exc:
        return _failed("EHD", exc, traces=exc.traces)
    except Exception as exc:
        return _failed("EHD", exc)
    return {
        "alignment": result.alignment,
        "traces": result.traces,
        "joint": result.joint,
    }


def evaluate(state: ExperimentState) -> dict:
    """Fill the metrics report."""
    alignment = state.get("alignment")
    joint = state.get("joint")
    traces = state.get("traces", [])
    report = MetricsReport(
        mode=state["mode"],
        rounds=len(traces),
        traces=traces,
        aligned=len(alignment) if alignment is not None else 0,
    )
    if joint is not None:
        report.max_subspace = joint.decomposition.max_subspace
        report.subspaces = len(joint.decomposition.subspaces)
        report.wall_time = joint.wall_time
    try:
        gold = state.get("gold")
        if alignment is not None and len(alignment):
            report.many_to_one_rate = many_to_one_rate(alignment)
        if alignment is not None and gold is not None:
            report.hits_at_1 = hits_at_1(alignment, gold)
    except Exception as exc:
        return _failed("Evaluation", exc)
    logger.info(
        "Metrics (%s): hits@1=%s many-to-one=%s rounds=%d",
        report.mode,
        report.hits_at_1,
        report.many_to_one_rate,
        report.rounds,
    )
    return {"report": report}


def write_outputs(state: ExperimentState) -> dict:
    """Write the alignment (or table), trace and JSON report where requested."""
    inputs = state["inputs"]
    try:
        if inputs.out is not None:
            with open(inputs.out, "w", encoding="utf-8", newline="\n") as f:
                if state["mode"] == "score":
                    dump_candidate_table(state["table"], f)
                else:
                    write_alignments(state["alignment"], f)
        if inputs.trace is not None:
            with open(inputs.trace, "w", encoding="utf-8", newline="\n") as f:
                write_trace(state.get("traces", []), f)
        if inputs.report is not None:
            write_report(state["report"], inputs.report)
    except Exception as exc:
        return _failed("Writing outputs", exc)
    return {}


def report_failure(state: ExperimentState) -> dict:
    """Turn the recorded failure into a failed report."""
    failure = state["failure"]
    traces = state.get("traces", [])
    report = MetricsReport(
        mode=state["mode"],
        status="failed",
        rounds=len(traces),
        traces=traces,
        exit_code=exit_code_for(failure),
        errors=state.get("errors", []),
    )
    return {"report": report}


# ---------------------------------------------------------------------------
# Conditional routing
# ---------------------------------------------------------------------------


def _ok_or_fail(next_node: str):
    def route(state: ExperimentState) -> str:
        if state.get("failure") is not None:
            return "report_failure"
        return next_node

    return route


def _route_mode(state: ExperimentState) -> str:
    """Route to the decoder for the requested mode."""
    if state["mode"] in ("ehd", "decode"):
        return "decode_ehd"
    return "score_only"


def _route_scored(state: ExperimentState) -> str:
    if state.get("failure") is not None:
        return "report_failure"
    return {"score": "evaluate", "baseline": "decode_baseline", "jea": "decode_jea"}[
        state["mode"]
    ]


def _route_written(state: ExperimentState) -> str:
    if state.get("failure") is not None:
        return "report_failure"
    return END


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------


def build_graph() -> StateGraph:
    """Build the experiment graph."""
    graph = StateGraph(ExperimentState)

    graph.add_node("load_inputs", load_inputs)
    graph.add_node("build_scorer", build_scorer)
    graph.add_node("score_only", score_only)
    graph.add_node("decode_baseline", decode_baseline)
    graph.add_node("decode_jea", decode_jea)
    graph.add_node("decode_ehd", decode_ehd)
    graph.add_node("evaluate", evaluate)
    graph.add_node("write_outputs", write_outputs)
    graph.add_node("report_failure", report_failure)

    graph.set_entry_point("load_inputs")
    graph.add_conditional_edges(
        "load_inputs",
        _ok_or_fail("build_scorer"),
        {"build_scorer": "build_scorer", "report_failure": "report_failure"},
    )
    graph.add_conditional_edges(
        "build_scorer",
        _route_mode,
        {"score_only": "score_only", "decode_ehd": "decode_ehd"},
    )
    graph.add_conditional_edges(
        "score_only",
        _route_scored,
        {
            "evaluate": "evaluate",
            "decode_baseline": "decode_baseline",
            "decode_jea": "decode_jea",
            "report_failure": "report_failure",
        },
    )
    for node in ("decode_baseline", "decode_jea", "decode_ehd"):
        graph.add_conditional_edges(
            node,
            _ok_or_fail("evaluate"),
            {"evaluate": "evaluate", "report_failure": "report_failure"},
        )
    graph.add_conditional_edges(
        "evaluate",
        _ok_or_fail("write_outputs"),
        {"write_outputs": "write_outputs", "report_failure": "report_failure"},
    )
    graph.add_conditional_edges(
        "write_outputs",
        _route_written,
        {END: END, "report_failure": "report_failure"},
    )
    graph.add_edge("report_failure", END)

    return graph


# Module-level compiled graph (reusable)
_compiled_graph = build_graph().compile()


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def run_experiment(
    mode: Mode,
    decode_config: DecodeConfig,
    scorer_config: Optional[ScorerConfig] = None,
    inputs: Optional[ExperimentInputs] = None,
) -> MetricsReport:
    """Run one experiment end to end.

    Args:
        mode: ``score``, ``baseline``, ``jea``, ``ehd`` or ``decode``.
        decode_config: Thresholds and loop limits.
        scorer_config: Knobs of the desk scorer and of table normalisation.
        inputs: File paths; output paths left ``None`` are not written.

    Returns:
        MetricsReport; ``status == "failed"`` and a non-zero ``exit_code``
        when any stage failed.
    """
    inputs = inputs or ExperimentInputs()
    logger.info("Starting experiment (mode=%s)", mode)
    result = _compiled_graph.invoke(
        {
            "mode": mode,
            "decode_config": decode_config,
            "scorer_config": scorer_config or ScorerConfig(),
            "inputs": inputs,
            "errors": [],
        }
    )
    report: MetricsReport = result["report"]
    logger.info(
        "Experiment complete (status=%s). Errors: %d",
        report.status,
        len(result.get("errors", [])),
    )
    return report


# ---------------------------------------------------------------------------
# Mode comparison
# ---------------------------------------------------------------------------

_COMPARISON_ROWS: list[tuple[str, Mode]] = [
    ("baseline", "baseline"),
    ("ehd", "ehd"),
    ("jea", "jea"),
    ("ehd+jea", "decode"),
]


class ModeComparison(BaseModel):
    """Hits@1, many-to-one rate and rounds for each decoding mode."""

    rows: dict[str, MetricsReport] = Field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(r.status == "ok" for r in self.rows.values())

    def to_table(self) -> str:
        lines = ["method\thits@1\tmany_to_one\trounds"]
        for label, report in self.rows.items():
            hits = "NA" if report.hits_at_1 is None else f"{report.hits_at_1:.4f}"
            m2o = (
                "NA"
                if report.many_to_one_rate is None
                else f"{report.many_to_one_rate:.4f}"
            )
            lines.append(f"{label}\t{hits}\t{m2o}\t{report.rounds}")
        return "\n".join(lines) + "\n"


def compare_modes(
    decode_config: DecodeConfig,
    scorer_config: Optional[ScorerConfig] = None,
    inputs: Optional[ExperimentInputs] = None,
) -> ModeComparison:
    """Run baseline, EHD, JEA and EHD+JEA on the same inputs.

    Per-mode output files are not written; only ``inputs.report`` receives
    the comparison as JSON.
    """
    inputs = inputs or ExperimentInputs()
    quiet = inputs.model_copy(update={"out": None, "trace": None, "report": None})
    comparison = ModeComparison(
        rows={
            label: run_experiment(mode, decode_config, scorer_config, quiet)
            for label, mode in _COMPARISON_ROWS
        }
    )
    if inputs.report is not None and comparison.ok:
        with open(inputs.report, "w", encoding="utf-8", newline="\n") as f:
            json.dump(comparison.model_dump(mode="json"), f, indent=2)
            f.write("\n")
    return comparison


def write_report(report: MetricsReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report.model_dump(mode="json"), f, indent=2)
        f.write("\n")
