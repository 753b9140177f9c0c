"""Joint entity alignment (JEA).

Turns a candidate table into a one-to-one alignment by minimising the sum
of negative log-probabilities:

    1. drop candidates with probability below tau;
    2. group sources that share a surviving target (union-find) into
       independent sub-spaces; sources left without candidates are orphans;
    3. pad each sub-space to a square cost matrix and solve it with the
       Hungarian algorithm;
    4. merge the sub-space solutions. Sources that end up on a padded or
       missing cell stay unaligned, so the merged result is one-to-one;
       only orphans may fall back to their top-1 target.

Usage:
    from src.decoding.assignment import jea_solve

    alignment = jea_solve(table, tau=0.10)
    print(alignment.one_to_one, len(alignment))
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Mapping, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from src.decoding.hungarian import Solver, hungarian
from src.decoding.union_find import DisjointSet
from src.errors import ContractViolation
from src.models.candidates import CandidateTable, top1_pairs

logger = logging.getLogger(__name__)

EPSILON = 1e-12

Edge = tuple[str, str, float]
Flag = Literal["joint", "orphan", "easy", "top1"]


def to_cost(p: float) -> float:
    """Negative log-likelihood in nats, floored at ``EPSILON``.

    Raises:
        ContractViolation: ``p`` outside [0, 1] or NaN.
    """
    if not 0.0 <= p <= 1.0:
        raise ContractViolation(f"probability must be in [0, 1], got {p}")
    return -math.log(max(p, EPSILON))


PAD_COST = to_cost(0.0)


# ---------------------------------------------------------------------------
# Data models
# ---------------------------------------------------------------------------


class SubSpace(BaseModel):
    """One independent block of the decomposed assignment problem."""

    sources: list[str]
    targets: list[str]
    edges: list[Edge] = Field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.sources)


class Decomposition(BaseModel):
    subspaces: list[SubSpace] = Field(default_factory=list)
    orphans: list[str] = Field(default_factory=list)
    tau: float = 0.0

    @property
    def max_subspace(self) -> int:
        """Source count of the largest sub-space (0 when there is none)."""
        return max((s.size for s in self.subspaces), default=0)

    @property
    def edges(self) -> list[Edge]:
        return [e for s in self.subspaces for e in s.edges]


class CostMatrix(BaseModel):
    """Square cost matrix of a sub-space; indices past rows/cols are padding."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    rows: list[str]
    cols: list[str]
    cost: np.ndarray
    pad_cost: float = PAD_COST


class AlignedPair(BaseModel):
    source: str
    target: str
    probability: float = Field(..., ge=0.0, le=1.0)
    flag: Flag = "joint"


class AlignmentSet(BaseModel):
    """Predicted (source, target) pairs, ordered by source id."""

    pairs: list[AlignedPair] = Field(default_factory=list)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def one_to_one(self) -> bool:
        sources = [p.source for p in self.pairs]
        targets = [p.target for p in self.pairs]
        return len(set(sources)) == len(sources) and len(set(targets)) == len(
            targets
        )

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def sources(self) -> set[str]:
        return {p.source for p in self.pairs}

    @property
    def mapping(self) -> dict[str, str]:
        return {p.source: p.target for p in self.pairs}

    def flagged(self, flag: Flag) -> list[AlignedPair]:
        return [p for p in self.pairs if p.flag == flag]

    @classmethod
    def from_pairs(cls, pairs: list[AlignedPair]) -> "AlignmentSet":
        return cls(pairs=sorted(pairs, key=lambda p: (p.source, p.target)))


class JointSolution(BaseModel):
    alignment: AlignmentSet
    decomposition: Decomposition
    unassigned: list[str] = Field(
        default_factory=list, description="Sources with no joint assignment"
    )
    wall_time: float = Field(0.0, ge=0.0, description="Seconds spent in JEA")

    def stats(self) -> dict[str, float | int]:
        return {
            "subspaces": len(self.decomposition.subspaces),
            "max_subspace": self.decomposition.max_subspace,
            "orphans": len(self.decomposition.orphans),
            "unassigned": len(self.unassigned),
            "wall_time": self.wall_time,
        }


# ---------------------------------------------------------------------------
# Decomposition and cost matrices
# ---------------------------------------------------------------------------


def surviving_edges(table: CandidateTable, tau: float) -> list[Edge]:
    """All candidate edges with probability >= tau, ordered by (source, target)."""
    return sorted(
        (source, target, p)
        for source in table.sources
        for target, p in table.entries[source]
        if p >= tau
    )


def decompose(table: CandidateTable, tau: float) -> Decomposition:
    """Split the thresholded candidate graph into independent sub-spaces.

    Sources are connected when they share a surviving target. Sub-spaces
    come out ordered by their smallest source id.
    """
    if not 0.0 <= tau <= 1.0:
        raise ContractViolation(f"tau must be in [0, 1], got {tau}")

    edges = surviving_edges(table, tau)
    forest: DisjointSet[tuple[str, str]] = DisjointSet()
    for source, target, _ in edges:
        forest.add(("s", source))
        forest.add(("t", target))
        forest.union(("s", source), ("t", target))

    by_root: dict[tuple[str, str], list[Edge]] = {}
    for edge in edges:
        by_root.setdefault(forest.find(("s", edge[0])), []).append(edge)

    subspaces = [
        SubSpace(
            sources=sorted({s for s, _, _ in group}),
            targets=sorted({t for _, t, _ in group}),
            edges=group,
        )
        for group in by_root.values()
    ]
    subspaces.sort(key=lambda s: s.sources[0])

    connected = {s for s, _, _ in edges}
    orphans = [s for s in table.sources if s not in connected]
    return Decomposition(subspaces=subspaces, orphans=orphans, tau=tau)


def build_cost_matrix(subspace: SubSpace) -> CostMatrix:
    """Pad a sub-space to a square matrix; missing and padded cells get PAD_COST."""
    if not subspace.sources:
        raise ContractViolation("cannot build a cost matrix for an empty sub-space")
    side = max(len(subspace.sources), len(subspace.targets))
    cost = np.full((side, side), PAD_COST)
    row_of = {s: i for i, s in enumerate(subspace.sources)}
    col_of = {t: j for j, t in enumerate(subspace.targets)}
    for source, target, p in subspace.edges:
        cost[row_of[source], col_of[target]] = to_cost(p)
    return CostMatrix(rows=subspace.sources, cols=subspace.targets, cost=cost)


def solve_subspace(
    subspace: SubSpace, solver: Solver = "textbook"
) -> tuple[dict[str, str], list[str]]:
    """Optimal one-to-one pairs of a sub-space, plus the sources left over."""
    matrix = build_cost_matrix(subspace)
    assignment = hungarian(matrix.cost, solver)
    real = {(s, t) for s, t, _ in subspace.edges}
    matched: dict[str, str] = {}
    unassigned: list[str] = []
    for row, source in enumerate(matrix.rows):
        col = assignment[row]
        if col < len(matrix.cols) and (source, matrix.cols[col]) in real:
            matched[source] = matrix.cols[col]
        else:
            unassigned.append(source)
    return matched, unassigned


def solution_cost(
    table: CandidateTable, tau: float, mapping: Mapping[str, str]
) -> float:
    """Total cost of ``mapping`` over the edges surviving ``tau``.

    Every source of the table not mapped along a surviving edge is charged
    PAD_COST, the same charge the padded matrices apply.
    """
    probability = {(s, t): p for s, t, p in surviving_edges(table, tau)}
    total = 0.0
    for source in table.sources:
        target = mapping.get(source)
        if target is not None and (source, target) in probability:
            total += to_cost(probability[(source, target)])
        else:
            total += PAD_COST
    return total


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def solve_joint(
    table: CandidateTable,
    tau: float,
    orphan_mode: Literal["top1", "drop"] = "top1",
    solver: Solver = "textbook",
    workers: int = 1,
) -> JointSolution:
    """Run JEA and keep the decomposition and timing alongside the alignment."""
    start = time.perf_counter()
    decomposition = decompose(table, tau)
    subspaces = decomposition.subspaces

    if workers > 1 and len(subspaces) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: solve_subspace(s, solver), subspaces))
    else:
        results = [solve_subspace(s, solver) for s in subspaces]

    pairs: list[AlignedPair] = []
    unassigned: list[str] = []
    for matched, left_over in results:
        for source, target in matched.items():
            pairs.append(
                AlignedPair(
                    source=source,
                    target=target,
                    probability=table.probability(source, target),
                    flag="joint",
                )
            )
        unassigned.extend(left_over)

    if orphan_mode == "top1":
        for source in decomposition.orphans:
            target, p = table.top1(source)
            pairs.append(
                AlignedPair(source=source, target=target, probability=p, flag="orphan")
            )

    wall_time = time.perf_counter() - start
    logger.info(
        "JEA: %d sub-spaces (max %d sources), %d orphans, %d unassigned, %.3fs",
        len(subspaces),
        decomposition.max_subspace,
        len(decomposition.orphans),
        len(unassigned),
        wall_time,
    )
    return JointSolution(
        alignment=AlignmentSet.from_pairs(pairs),
        decomposition=decomposition,
        unassigned=sorted(unassigned),
        wall_time=wall_time,
    )


def jea_solve(
    table: CandidateTable,
    tau: float,
    orphan_mode: Literal["top1", "drop"] = "top1",
    solver: Solver = "textbook",
    workers: int = 1,
) -> AlignmentSet:
    """One-to-one alignment of every source in ``table``.

    Sources left on a padded cell are never aligned. With
    ``orphan_mode="top1"`` orphans (no candidate at or above ``tau``) fall
    back to their original best candidate (flag ``orphan``), which may
    collide with a joint pair; ``"drop"`` leaves them unaligned too.
    """
    return solve_joint(table, tau, orphan_mode, solver, workers).alignment


def greedy_top1(
    table: CandidateTable, sources: Optional[list[str]] = None
) -> AlignmentSet:
    """Plain per-source argmax decoding (the baseline)."""
    return AlignmentSet.from_pairs(
        [
            AlignedPair(source=s, target=t, probability=p, flag="top1")
            for s, (t, p) in top1_pairs(table, sources).items()
        ]
    )
