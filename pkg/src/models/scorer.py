"""Candidate scorers.

All candidate scoring goes through this module. The decoders never look
at raw scores directly; they call ``Scorer.score(sources, forced)`` and
get back a normalised ``CandidateTable``.

Two scorers are provided:
    - ``DeskScorer``: a lexical + structural topic-graph matcher. Node
      similarity is normalised edit distance between surface names; the
      graph score blends the topic-entity similarity with the mean, over
      source neighbours, of the best target-neighbour similarity.
    - ``TableScorer``: replays an external score file, dropping targets
      that forced matches have already claimed.

Forced matches feed back in two ways, mirroring the enhanced matching
layers: the source entity of a forced pair takes its target's surface
name, and the node similarity of a forced pair is pinned to 1.0. The desk
scorer keeps claimed targets in its rows unless ``renormalize_claimed`` is
set; the decoder skips them.

Usage:
    from src.models.scorer import DeskScorer

    scorer = DeskScorer(kg_zh, kg_en, top_k=10)
    table = scorer.score(["zh:乔治·布什"], ForcedMatches())
"""

import heapq
import logging
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Optional, Protocol, TypeVar

import Levenshtein

from src.config import ScorerConfig
from src.errors import EntityLookupError
from src.kg.graph import KnowledgeGraph, TopicGraph, build_topic_graph
from src.models.candidates import (
    CandidateTable,
    ForcedMatches,
    RawScores,
    normalize_topk,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


# ---------------------------------------------------------------------------
# Similarities
# ---------------------------------------------------------------------------


def _edit_similarity(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - Levenshtein.distance(a, b) / longest


@lru_cache(maxsize=1 << 18)
def name_similarity(a: str, b: str) -> float:
    """1 - normalised edit distance of the lowercased names."""
    return _edit_similarity(a.lower(), b.lower())


def _pooled(
    left: list[str], right: list[str], sim: Callable[[str, str], float]
) -> float:
    if not left or not right:
        return 0.0
    return sum(max(sim(u, v) for v in right) for u in left) / len(left)


def score_pair(
    tg_s: TopicGraph,
    tg_t: TopicGraph,
    forced: ForcedMatches,
    blend: float = 0.5,
    node_matching: str = "source",
    pin_forced: bool = True,
) -> float:
    """Similarity of a source and a target topic graph, in [0, 1].

    sim(u, v) is the name similarity of the two nodes, pinned to exactly
    1.0 when (u, v) is a forced match. The score is
    ``blend * sim(topic_s, topic_t) + (1 - blend) * neighbour term`` where
    the neighbour term averages, over source neighbours u, the best
    sim(u, v) among target neighbours. When neither graph has neighbours
    the topic similarity is returned alone.
    """

    def sim(u: str, v: str) -> float:
        if pin_forced and (u, v) in forced:
            return 1.0
        return name_similarity(tg_s.names[u], tg_t.names[v])

    topic = sim(tg_s.topic_entity, tg_t.topic_entity)
    source_nbrs, target_nbrs = tg_s.neighbors, tg_t.neighbors
    if not source_nbrs and not target_nbrs:
        return topic

    neighbour = _pooled(source_nbrs, target_nbrs, sim)
    if node_matching == "both":
        backward = _pooled(target_nbrs, source_nbrs, lambda v, u: sim(u, v))
        neighbour = (neighbour + backward) / 2.0
    return blend * topic + (1.0 - blend) * neighbour


# ---------------------------------------------------------------------------
# Enhanced input: surface substitution
# ---------------------------------------------------------------------------


def apply_surface_substitution(
    kg_s: KnowledgeGraph, forced: ForcedMatches, kg_t: KnowledgeGraph
) -> KnowledgeGraph:
    """Copy of ``kg_s`` where each forced source carries its target's name.

    Raises:
        EntityLookupError: A forced pair references a missing entity.
    """
    if not forced.pairs:
        return kg_s
    names = dict(kg_s.names)
    for source, target in forced.pairs.items():
        if source not in kg_s.names:
            raise EntityLookupError(f"forced source {source!r} not in source KG")
        if target not in kg_t.names:
            raise EntityLookupError(f"forced target {target!r} not in target KG")
        names[source] = kg_t.names[target]
    return kg_s.model_copy(update={"names": names})


# ---------------------------------------------------------------------------
# Candidate pools (blocking)
# ---------------------------------------------------------------------------


class _NameIndex:
    """Best name matches among the target entities, memoised per query."""

    def __init__(self, kg_t: KnowledgeGraph) -> None:
        self._targets = sorted((e, name.lower()) for e, name in kg_t.names.items())
        self._cache: dict[tuple[str, int], list[str]] = {}

    def best(self, name: str, n: int) -> list[str]:
        key = (name, n)
        if key not in self._cache:
            query = name.lower()
            ranked = heapq.nsmallest(
                n,
                self._targets,
                key=lambda item: (-_edit_similarity(query, item[1]), item[0]),
            )
            self._cache[key] = [entity for entity, _ in ranked]
        return self._cache[key]


def build_candidate_pool(
    kg_s: KnowledgeGraph,
    kg_t: KnowledgeGraph,
    sources: Iterable[str],
    config: ScorerConfig = ScorerConfig(),
    claimed: Optional[set[str]] = None,
    index: Optional[_NameIndex] = None,
) -> dict[str, list[str]]:
    """Targets worth scoring for each source.

    A source's pool is its ``pool_size`` best name matches plus every target
    adjacent to one of the ``neighbor_expansion`` best name matches of each
    of its neighbours. Claimed targets are left out.
    """
    index = index or _NameIndex(kg_t)
    claimed = claimed or set()
    pools: dict[str, list[str]] = {}
    for source in sources:
        kg_s.require(source)
        pool = set(index.best(kg_s.surface(source), config.pool_size))
        if config.neighbor_expansion:
            for neighbour in kg_s.neighbors(source):
                name = kg_s.surface(neighbour)
                for match in index.best(name, config.neighbor_expansion):
                    pool |= kg_t.neighbors(match)
        pools[source] = sorted(pool - claimed)
    return pools


# ---------------------------------------------------------------------------
# Candidate tables
# ---------------------------------------------------------------------------


def _parallel_map(fn: Callable[[T], R], items: list[T], workers: int) -> list[R]:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def build_candidate_table(
    kg_s: KnowledgeGraph,
    kg_t: KnowledgeGraph,
    sources: list[str],
    candidate_pool: Mapping[str, list[str]],
    forced: ForcedMatches,
    k: int,
    config: ScorerConfig = ScorerConfig(),
    workers: int = 1,
) -> CandidateTable:
    """Score every pooled target of every source and normalise the top-k.

    Sources with an empty pool are left out of the table with a warning.
    """
    if config.enhancement in ("full", "surface"):
        kg_s = apply_surface_substitution(kg_s, forced, kg_t)
    pin_forced = config.enhancement == "full"
    # built up front; score_source only reads it from worker threads
    pooled = {t for s in sources for t in candidate_pool.get(s) or []}
    target_graphs: dict[str, TopicGraph] = {
        t: build_topic_graph(kg_t, t, config.radius) for t in sorted(pooled)
    }

    def score_source(source: str) -> Optional[list[tuple[str, float]]]:
        pool = candidate_pool.get(source) or []
        if not pool:
            return None
        tg_s = build_topic_graph(kg_s, source, config.radius)
        raw = [
            (
                target,
                score_pair(
                    tg_s,
                    target_graphs[target],
                    forced,
                    blend=config.blend,
                    node_matching=config.node_matching,
                    pin_forced=pin_forced,
                ),
            )
            for target in pool
        ]
        return normalize_topk(raw, k, config.normalize, config.temperature)

    ordered = sorted(set(sources))
    rows = _parallel_map(score_source, ordered, workers)
    entries: dict[str, list[tuple[str, float]]] = {}
    for source, row in zip(ordered, rows):
        if row is None:
            logger.warning("Source %s has an empty candidate pool, skipped", source)
            continue
        entries[source] = row
    return CandidateTable(entries=entries)


# ---------------------------------------------------------------------------
# Scorer handles
# ---------------------------------------------------------------------------


class Scorer(Protocol):
    """Anything that can rescore a set of sources given forced matches."""

    def score(self, sources: list[str], forced: ForcedMatches) -> CandidateTable: ...


class DeskScorer:
    """Topic-graph matcher over two loaded knowledge graphs."""

    def __init__(
        self,
        kg_s: KnowledgeGraph,
        kg_t: KnowledgeGraph,
        top_k: int = 10,
        config: Optional[ScorerConfig] = None,
        candidate_pool: Optional[Mapping[str, list[str]]] = None,
        workers: int = 1,
    ) -> None:
        self.kg_s = kg_s
        self.kg_t = kg_t
        self.top_k = top_k
        self.config = config or ScorerConfig()
        self.candidate_pool = candidate_pool
        self.workers = workers
        self._index = _NameIndex(kg_t)

    def pools(self, sources: list[str], forced: ForcedMatches) -> dict[str, list[str]]:
        """Targets to score per source.

        Claimed targets stay in the pools, and so in the normalisation, unless
        ``renormalize_claimed`` is set. The decoder never promotes a claimed
        top-1 and drops promoted targets before its final decode.
        """
        claimed = forced.targets if self.config.renormalize_claimed else set()
        if self.candidate_pool is not None:
            return {
                s: [t for t in self.candidate_pool.get(s, []) if t not in claimed]
                for s in sources
            }
        kg_s = self.kg_s
        if self.config.enhancement != "none":
            kg_s = apply_surface_substitution(kg_s, forced, self.kg_t)
        return build_candidate_pool(
            kg_s, self.kg_t, sources, self.config, claimed, self._index
        )

    def score(self, sources: list[str], forced: ForcedMatches) -> CandidateTable:
        table = build_candidate_table(
            self.kg_s,
            self.kg_t,
            sources,
            self.pools(sources, forced),
            forced,
            self.top_k,
            self.config,
            self.workers,
        )
        logger.info("Desk scorer produced %d rows", len(table))
        return table


class TableScorer:
    """Replays externally computed scores.

    A static table cannot use forced matches as features; the knowledge it
    takes from them is which targets are already claimed. Those targets are
    removed and the surviving scores renormalised.
    """

    def __init__(
        self,
        raw: RawScores,
        top_k: int = 10,
        method: str = "sum",
        temperature: float = 0.05,
        exclude_claimed: bool = True,
    ) -> None:
        self.raw = raw
        self.top_k = top_k
        self.method = method
        self.temperature = temperature
        self.exclude_claimed = exclude_claimed

    @classmethod
    def from_table(cls, table: CandidateTable, **kwargs: object) -> "TableScorer":
        raw = {s: dict(row) for s, row in table.entries.items()}
        return cls(raw, **kwargs)  # type: ignore[arg-type]

    def score(self, sources: list[str], forced: ForcedMatches) -> CandidateTable:
        claimed = forced.targets if self.exclude_claimed else set()
        entries: dict[str, list[tuple[str, float]]] = {}
        for source in sorted(set(sources)):
            row = [
                (t, s) for t, s in self.raw.get(source, {}).items() if t not in claimed
            ]
            if not row:
                logger.warning("Source %s has no unclaimed candidates, skipped", source)
                continue
            entries[source] = normalize_topk(
                row, self.top_k, self.method, self.temperature  # type: ignore[arg-type]
            )
        return CandidateTable(entries=entries)
