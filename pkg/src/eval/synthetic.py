"""Synthetic corpora for desk-scale experiments.

``generate_adversarial_twins`` builds the hard case for entity alignment:
two target entities with near-identical names that share every neighbour
except one discriminative neighbour each. On the source side both twins
carry the same name and the discriminative neighbours carry names in a
different script, so name similarity alone cannot separate them. Each
discriminative neighbour hangs off an anchor entity whose name is the
same in both graphs; aligning the anchor first is what makes the
discriminative neighbour (and then the twin) resolvable.

``generate_clustered_table`` builds a large candidate table whose sources
fall into clusters chained together by weak cross-cluster candidates, so
that the largest JEA sub-space shrinks as tau rises.

Usage:
    from src.eval.synthetic import generate_adversarial_twins, write_corpus

    corpus = generate_adversarial_twins(n_pairs=100, n_shared_neighbors=4, seed=7)
    write_corpus(corpus, "data/twins")
"""

import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from src.eval.metrics import GoldAlignments, Pair
from src.kg.graph import KnowledgeGraph, Triple, dump_kg
from src.models.candidates import CandidateTable, table_from_raw

logger = logging.getLogger(__name__)

_LATIN = "abcdefghijklmnopqrstuvwxyz"
_CYRILLIC = "бвгдежзийклмнпрстфхцчшщэюя"


# ---------------------------------------------------------------------------
# Adversarial twins
# ---------------------------------------------------------------------------


class TwinGroup(BaseModel):
    """Source-side ids of one twin pair and their discriminative neighbours."""

    twins: tuple[str, str]
    markers: tuple[str, str]


class TwinCorpus(BaseModel):
    kg_s: KnowledgeGraph
    kg_t: KnowledgeGraph
    gold: GoldAlignments
    groups: list[TwinGroup] = Field(default_factory=list)


class _Namer:
    """Unique random ids and words from one seeded generator."""

    def __init__(self, seed: int) -> None:
        self._rng = np.random.default_rng(seed)
        self._ids: set[str] = set()
        self._words: set[str] = set()

    def entity_id(self, prefix: str) -> str:
        while True:
            candidate = f"{prefix}:{int(self._rng.integers(0, 1 << 40)):010x}"
            if candidate not in self._ids:
                self._ids.add(candidate)
                return candidate

    def word(self, alphabet: str = _LATIN, length: int = 9) -> str:
        while True:
            letters = self._rng.choice(list(alphabet), size=length)
            candidate = "".join(letters).capitalize()
            if candidate not in self._words:
                self._words.add(candidate)
                return candidate


def generate_adversarial_twins(
    n_pairs: int, n_shared_neighbors: int, seed: int
) -> TwinCorpus:
    """Build a source/target graph pair full of adversarial twins.

    Per twin pair the target graph holds twins ``<base> A`` and ``<base> B``,
    ``n_shared_neighbors`` neighbours common to both, one discriminative
    neighbour per twin and one anchor per discriminative neighbour. The
    source graph mirrors it entity for entity. All gold pairs land in the
    test split.
    """
    if n_pairs < 1 or n_shared_neighbors < 1:
        raise ValueError("n_pairs and n_shared_neighbors must be at least 1")

    namer = _Namer(seed)
    names_s: dict[str, str] = {}
    names_t: dict[str, str] = {}
    triples_s: list[Triple] = []
    triples_t: list[Triple] = []
    gold: list[Pair] = []
    groups: list[TwinGroup] = []

    def mirrored(name_s: str, name_t: str) -> tuple[str, str]:
        source, target = namer.entity_id("src"), namer.entity_id("tgt")
        names_s[source] = name_s
        names_t[target] = name_t
        gold.append((source, target))
        return source, target

    for _ in range(n_pairs):
        base = namer.word()
        twins = [mirrored(base, f"{base} {suffix}") for suffix in ("A", "B")]
        for _ in range(n_shared_neighbors):
            word = namer.word()
            shared_s, shared_t = mirrored(word, word)
            for twin_s, twin_t in twins:
                triples_s.append((twin_s, "neighbor_of", shared_s))
                triples_t.append((twin_t, "neighbor_of", shared_t))

        markers = []
        for twin_s, twin_t in twins:
            marker_s, marker_t = mirrored(namer.word(_CYRILLIC), namer.word())
            anchor_word = namer.word(length=11)
            anchor_s, anchor_t = mirrored(anchor_word, anchor_word)
            triples_s += [
                (twin_s, "marked_by", marker_s),
                (marker_s, "anchored_at", anchor_s),
            ]
            triples_t += [
                (twin_t, "marked_by", marker_t),
                (marker_t, "anchored_at", anchor_t),
            ]
            markers.append(marker_s)

        groups.append(
            TwinGroup(
                twins=(twins[0][0], twins[1][0]), markers=(markers[0], markers[1])
            )
        )

    corpus = TwinCorpus(
        kg_s=KnowledgeGraph(names=names_s, triples=triples_s),
        kg_t=KnowledgeGraph(names=names_t, triples=triples_t),
        gold=GoldAlignments(test=sorted(gold)),
        groups=groups,
    )
    logger.info(
        "Generated twin corpus: %d twin pairs, %d entities per side",
        n_pairs,
        len(names_s),
    )
    return corpus


def write_corpus(corpus: TwinCorpus, out_dir: str | Path) -> None:
    """Write kg1.tsv, names1.tsv, kg2.tsv, names2.tsv and gold.tsv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for kg, suffix in ((corpus.kg_s, "1"), (corpus.kg_t, "2")):
        with (
            open(out / f"kg{suffix}.tsv", "w", encoding="utf-8", newline="\n") as t,
            open(out / f"names{suffix}.tsv", "w", encoding="utf-8", newline="\n") as n,
        ):
            dump_kg(kg, t, n)
    with open(out / "gold.tsv", "w", encoding="utf-8", newline="\n") as f:
        for source, target in corpus.gold.pairs:
            f.write(f"{source}\t{target}\n")
    logger.info("Wrote synthetic corpus to %s", out)


# ---------------------------------------------------------------------------
# Clustered candidate tables
# ---------------------------------------------------------------------------


def generate_clustered_table(
    n_sources: int = 5000, cluster_size: int = 10, chain: int = 20, seed: int = 0
) -> CandidateTable:
    """Candidate table of small clusters strung together into chains.

    Source i scores its own target ``t<i>`` high and three other targets of
    its cluster moderately. Consecutive clusters within a chain of ``chain``
    clusters are linked by one weak candidate per source, whose probability
    spreads over roughly 0.02 to 0.3, so raising tau cuts chains apart.
    """
    rng = np.random.default_rng(seed)
    raw: dict[str, dict[str, float]] = {}
    for index in range(n_sources):
        cluster = index // cluster_size
        start = cluster * cluster_size
        members = range(start, min(start + cluster_size, n_sources))
        row = {f"t{index:06d}": float(rng.uniform(3.0, 6.0))}
        others = [m for m in members if m != index]
        if others:
            picks = rng.choice(others, size=min(3, len(others)), replace=False)
            for m in picks:
                row[f"t{int(m):06d}"] = float(rng.uniform(0.5, 2.0))

        next_start = start + cluster_size
        same_chain = (cluster + 1) % chain != 0
        if same_chain and next_start < n_sources:
            hi = min(next_start + cluster_size, n_sources)
            m = int(rng.integers(next_start, hi))
            row[f"t{m:06d}"] = float(rng.uniform(0.1, 2.0))
        raw[f"s{index:06d}"] = row

    table = table_from_raw(raw, k=10)
    logger.info(
        "Generated clustered table: %d sources, clusters of %d, chains of %d",
        n_sources,
        cluster_size,
        chain,
    )
    return table
