"""Easy-to-Hard decoding (EHD) as a LangGraph loop.

Each round scores the sources that are still hard, promotes predictions
whose top-1 probability exceeds ``alpha`` to forced matches and rescores
what is left. The loop stops once a round yields ``k_min`` or fewer new
easy alignments (or ``max_rounds`` is reached):

    score → partition ─┬─ more than k_min new easy → fold_easy → score
                       └─ otherwise → finalize → END

Promoted pairs are never revoked. The last round's table is decoded
jointly (JEA) when ``use_jea_final`` is set, otherwise per-source top-1,
after targets claimed by forced matches are dropped from its rows.

Usage:
    from src.decoding.easy_hard import ehd_decode

    alignment, traces = ehd_decode(kg_s, kg_t, sources, scorer, DecodeConfig())
    for trace in traces:
        print(trace.round_index, trace.new_easy)
"""

import logging
from typing import Annotated, Iterable, Optional, TextIO

from langgraph.graph import END, StateGraph
from pydantic import BaseModel, Field
from typing_extensions import TypedDict

from src.config import DecodeConfig
from src.decoding.assignment import (
    AlignedPair,
    AlignmentSet,
    JointSolution,
    greedy_top1,
    solve_joint,
)
from src.errors import ContractViolation, ScorerFailure
from src.kg.graph import KnowledgeGraph
from src.models.candidates import CandidateTable, ForcedMatches
from src.models.scorer import Scorer

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Data models
# ---------------------------------------------------------------------------


class RoundTrace(BaseModel):
    round_index: int = Field(..., ge=1)
    new_easy: int = Field(..., ge=0)
    cumulative_easy: int = Field(..., ge=0)
    hard_remaining: int = Field(..., ge=0)


class EhdResult(BaseModel):
    """Final alignment plus what the orchestrator reports about the run."""

    alignment: AlignmentSet
    traces: list[RoundTrace] = Field(default_factory=list)
    joint: Optional[JointSolution] = None

    @property
    def rounds(self) -> int:
        return len(self.traces)


# ---------------------------------------------------------------------------
# Partitioning
# ---------------------------------------------------------------------------


def partition_easy_hard(
    table: CandidateTable, alpha: float, claimed: Iterable[str] = ()
) -> tuple[AlignmentSet, list[str]]:
    """Split sources into easy alignments (top-1 > alpha) and hard sources.

    Two easy sources on one target keep only the higher-probability one
    (ties go to the smaller source id); the other is demoted to hard. A
    top-1 target in ``claimed`` is never easy.
    """
    claimed = set(claimed)
    best: dict[str, tuple[str, float]] = {}
    hard: list[str] = []
    for source in table.sources:
        target, p = table.top1(source)
        if p <= alpha or target in claimed:
            hard.append(source)
            continue
        holder = best.get(target)
        if holder is None or (p, holder[0]) > (holder[1], source):
            if holder is not None:
                hard.append(holder[0])
                logger.warning(
                    "Easy target %s contested by %s and %s; %s demoted",
                    target,
                    holder[0],
                    source,
                    holder[0],
                )
            best[target] = (source, p)
        else:
            hard.append(source)
            logger.warning(
                "Easy target %s contested by %s and %s; %s demoted",
                target,
                holder[0],
                source,
                source,
            )

    easy = AlignmentSet.from_pairs(
        [
            AlignedPair(source=s, target=t, probability=p, flag="easy")
            for t, (s, p) in best.items()
        ]
    )
    return easy, sorted(hard)


def remaining_sources(all_sources: list[str], easy: AlignmentSet) -> list[str]:
    """``all_sources`` minus the sources of ``easy``, order preserved."""
    taken = easy.sources
    return [s for s in all_sources if s not in taken]


# ---------------------------------------------------------------------------
# State schema
# ---------------------------------------------------------------------------


def _append(existing: list, new: list) -> list:
    """Reducer that appends new items to the existing list."""
    return existing + new


class DecodeState(TypedDict, total=False):
    """Data flowing through the EHD loop."""

    # Inputs
    scorer: Scorer
    decode_config: DecodeConfig

    # Loop state
    forced: ForcedMatches
    promoted: list[AlignedPair]
    hard: list[str]
    table: CandidateTable
    easy: AlignmentSet
    round_index: int

    # Outputs
    alignment: AlignmentSet
    joint: Optional[JointSolution]
    failure: Optional[BaseException]

    traces: Annotated[list[RoundTrace], _append]
    errors: Annotated[list[str], _append]


# ---------------------------------------------------------------------------
# Node functions
# ---------------------------------------------------------------------------


def score_round(state: DecodeState) -> dict:
    """Rescore the hard sources under the current forced matches."""
    round_index = state.get("round_index", 0) + 1
    try:
        table = state["scorer"].score(state["hard"], state["forced"])
    except Exception as exc:
        logger.exception("Scorer failed in round %d", round_index)
        return {
            "round_index": round_index,
            "failure": exc,
            "errors": [f"Scorer failed in round {round_index}: {exc}"],
        }
    return {"round_index": round_index, "table": table}


def partition_round(state: DecodeState) -> dict:
    """Split the round's predictions into easy and hard."""
    config = state["decode_config"]
    easy, _ = partition_easy_hard(
        state["table"], config.alpha, claimed=state["forced"].targets
    )
    cumulative = len(state.get("promoted", [])) + len(easy)
    trace = RoundTrace(
        round_index=state["round_index"],
        new_easy=len(easy),
        cumulative_easy=cumulative,
        hard_remaining=len(state["hard"]) - len(easy),
    )
    logger.info(
        "EHD round %d: %d new easy, %d cumulative, %d hard",
        trace.round_index,
        trace.new_easy,
        trace.cumulative_easy,
        trace.hard_remaining,
    )
    return {"easy": easy, "traces": [trace]}


def fold_easy(state: DecodeState) -> dict:
    """Promote this round's easy pairs to forced matches."""
    easy = state["easy"]
    forced = state["forced"].merged(easy.mapping)
    promoted = [p for p in easy.pairs if (p.source, p.target) in forced]
    return {
        "forced": forced,
        "promoted": state.get("promoted", []) + promoted,
        "hard": remaining_sources(state["hard"], easy),
    }


def finalize(state: DecodeState) -> dict:
    """Merge promoted pairs with the decoding of the last round's table."""
    config = state["decode_config"]
    promoted = state.get("promoted", [])
    table = state["table"]
    if len(state["forced"]):
        table = table.without_targets(state["forced"].targets)
    joint: Optional[JointSolution] = None
    if config.use_jea_final:
        joint = solve_joint(
            table,
            config.tau,
            orphan_mode=config.orphan_mode,
            solver=config.solver,
            workers=config.workers,
        )
        final = joint.alignment
    else:
        final = greedy_top1(table)
    alignment = AlignmentSet.from_pairs(promoted + final.pairs)
    return {"alignment": alignment, "joint": joint}


# ---------------------------------------------------------------------------
# Conditional routing
# ---------------------------------------------------------------------------


def _after_score(state: DecodeState) -> str:
    if state.get("failure") is not None:
        return END
    return "partition_round"


def _should_continue(state: DecodeState) -> str:
    """Continue while a round finds more than k_min new easy alignments."""
    config = state["decode_config"]
    if len(state["easy"]) > config.k_min and state["round_index"] < config.max_rounds:
        return "fold_easy"
    return "finalize"


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------


def build_graph() -> StateGraph:
    """Build the EHD loop graph."""
    graph = StateGraph(DecodeState)

    graph.add_node("score_round", score_round)
    graph.add_node("partition_round", partition_round)
    graph.add_node("fold_easy", fold_easy)
    graph.add_node("finalize", finalize)

    graph.set_entry_point("score_round")
    graph.add_conditional_edges(
        "score_round",
        _after_score,
        {"partition_round": "partition_round", END: END},
    )
    graph.add_conditional_edges(
        "partition_round",
        _should_continue,
        {"fold_easy": "fold_easy", "finalize": "finalize"},
    )
    graph.add_edge("fold_easy", "score_round")
    graph.add_edge("finalize", END)

    return graph


# Module-level compiled graph (reusable)
_compiled_graph = build_graph().compile()


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def run_ehd(
    sources: list[str],
    scorer: Scorer,
    config: DecodeConfig,
    seeds: Optional[ForcedMatches] = None,
) -> EhdResult:
    """Run the EHD loop and keep the JEA statistics of the final round.

    Seed pairs start out as forced matches; seed sources are not decoded.

    Raises:
        ContractViolation: ``sources`` is empty.
        ScorerFailure: The scorer raised; ``traces`` holds the finished rounds.
    """
    if not sources:
        raise ContractViolation("ehd_decode needs at least one source")
    seeds = seeds or ForcedMatches()
    hard = [s for s in dict.fromkeys(sources) if s not in seeds.pairs]

    logger.info(
        "Starting EHD over %d sources (%d seeds, alpha=%.2f, k_min=%d)",
        len(hard),
        len(seeds),
        config.alpha,
        config.k_min,
    )
    initial_state: DecodeState = {
        "scorer": scorer,
        "decode_config": config,
        "forced": seeds,
        "promoted": [],
        "hard": hard,
        "round_index": 0,
        "traces": [],
        "errors": [],
    }
    # each round visits at most three nodes
    result = _compiled_graph.invoke(
        initial_state, {"recursion_limit": 4 * config.max_rounds + 10}
    )

    traces = result.get("traces", [])
    failure = result.get("failure")
    if failure is not None:
        raise ScorerFailure(result["errors"][-1], traces=traces) from failure

    logger.info(
        "EHD complete: %d rounds, %d promoted",
        len(traces),
        len(result.get("promoted", [])),
    )
    return EhdResult(
        alignment=result["alignment"], traces=traces, joint=result.get("joint")
    )


def ehd_decode(
    kg_s: KnowledgeGraph,
    kg_t: KnowledgeGraph,
    sources: list[str],
    scorer: Scorer,
    config: DecodeConfig,
    seeds: Optional[ForcedMatches] = None,
) -> tuple[AlignmentSet, list[RoundTrace]]:
    """Easy-to-Hard decoding of ``sources`` from ``kg_s`` into ``kg_t``.

    Source ids must exist in ``kg_s``; the graphs themselves are read by the
    scorer.

    Raises:
        EntityLookupError: A source id is not in ``kg_s``.
    """
    for source in sources:
        kg_s.require(source)
    result = run_ehd(sources, scorer, config, seeds)
    return result.alignment, result.traces


def write_trace(traces: list[RoundTrace], out: TextIO) -> None:
    """Round trace as TSV: round, new_easy, cumulative_easy, hard_remaining."""
    out.write("round\tnew_easy\tcumulative_easy\thard_remaining\n")
    for t in traces:
        out.write(
            f"{t.round_index}\t{t.new_easy}\t{t.cumulative_easy}\t{t.hard_remaining}\n"
        )
