"""Knowledge graphs and topic graphs.

A knowledge graph is loaded from a triples file (head TAB relation TAB
tail) and an optional names file (entity id TAB surface name). Entity ids
are opaque keys and never change; surface names live beside them because
the enhanced input layer rewrites names between decoding rounds.

Usage:
    from src.kg.graph import build_topic_graph, load_kg_files

    kg = load_kg_files("zh_triples.tsv", "zh_names.tsv")
    tg = build_topic_graph(kg, "http://zh.dbpedia.org/resource/乔治·布什")
    print(len(tg.nodes), len(tg.edges))
"""

import logging
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Optional, TextIO

from pydantic import BaseModel, Field, PrivateAttr, model_validator

from src.errors import EmptyGraphError, EntityLookupError, InputParseError

logger = logging.getLogger(__name__)

Triple = tuple[str, str, str]


# ---------------------------------------------------------------------------
# Data models
# ---------------------------------------------------------------------------


class KnowledgeGraph(BaseModel):
    """Entities with surface names, relation labels and directed triples."""

    names: dict[str, str] = Field(
        default_factory=dict, description="Entity id -> surface name"
    )
    relations: set[str] = Field(default_factory=set)
    triples: list[Triple] = Field(default_factory=list)

    _adjacency: dict[str, set[str]] = PrivateAttr(default_factory=dict)
    _incident: dict[str, list[Triple]] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_invariants(self) -> "KnowledgeGraph":
        seen: set[Triple] = set()
        unique: list[Triple] = []
        for triple in self.triples:
            if triple in seen:
                continue
            seen.add(triple)
            unique.append(triple)
            head, relation, tail = triple
            for entity in (head, tail):
                if entity not in self.names:
                    raise ValueError(f"triple endpoint {entity!r} is not an entity")
            self.relations.add(relation)
        self.triples = unique
        return self

    def model_post_init(self, __context: object) -> None:
        adjacency: dict[str, set[str]] = defaultdict(set)
        incident: dict[str, list[Triple]] = defaultdict(list)
        for triple in self.triples:
            head, _, tail = triple
            incident[head].append(triple)
            if head != tail:
                adjacency[head].add(tail)
                adjacency[tail].add(head)
                incident[tail].append(triple)
        self._adjacency = dict(adjacency)
        self._incident = dict(incident)

    @property
    def entities(self) -> set[str]:
        return set(self.names)

    def surface(self, entity: str) -> str:
        return self.names[entity]

    def neighbors(self, entity: str) -> set[str]:
        """Undirected one-hop neighbours (triples are followed both ways)."""
        return self._adjacency.get(entity, set())

    def incident(self, entity: str) -> list[Triple]:
        """Triples with ``entity`` as head or tail."""
        return self._incident.get(entity, [])

    def require(self, entity: str) -> None:
        if entity not in self.names:
            raise EntityLookupError(f"unknown entity id {entity!r}")


class TopicGraph(BaseModel):
    """Neighbourhood of a topic entity, with the surface names of its nodes."""

    topic_entity: str
    nodes: set[str]
    edges: list[Triple] = Field(default_factory=list)
    names: dict[str, str] = Field(default_factory=dict)

    @property
    def neighbors(self) -> list[str]:
        """Nodes other than the topic entity, in id order."""
        return sorted(n for n in self.nodes if n != self.topic_entity)


# ---------------------------------------------------------------------------
# Loading and serialization
# ---------------------------------------------------------------------------


def _split_rows(source: Iterable[str], arity: int, what: str):
    for line_number, line in enumerate(source, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != arity:
            raise InputParseError(
                f"{what} row needs {arity} tab-separated fields, got {len(fields)}",
                line_number=line_number,
            )
        yield line_number, fields


def load_kg(
    triples_source: Iterable[str], names_source: Optional[Iterable[str]] = None
) -> KnowledgeGraph:
    """Parse a triples stream (and optional names stream) into a graph.

    Raises:
        InputParseError: A row does not have the expected number of fields.
        EmptyGraphError: The triples stream holds no triples.
    """
    names: dict[str, str] = {}
    triples: list[Triple] = []
    for _, (head, relation, tail) in _split_rows(triples_source, 3, "triple"):
        triples.append((head, relation, tail))
        names.setdefault(head, head)
        names.setdefault(tail, tail)

    if not triples:
        raise EmptyGraphError("triples stream is empty")

    if names_source is not None:
        for _, (entity, surface) in _split_rows(names_source, 2, "name"):
            names[entity] = surface

    kg = KnowledgeGraph(names=names, triples=triples)
    logger.info(
        "Loaded KG: %d entities, %d relations, %d triples",
        len(kg.names),
        len(kg.relations),
        len(kg.triples),
    )
    return kg


def load_kg_files(
    triples_path: str | Path, names_path: Optional[str | Path] = None
) -> KnowledgeGraph:
    """Load a graph from UTF-8 TSV files on disk."""
    with open(triples_path, encoding="utf-8", newline="\n") as triples_file:
        if names_path is None:
            return load_kg(triples_file)
        with open(names_path, encoding="utf-8", newline="\n") as names_file:
            return load_kg(triples_file, names_file)


def dump_kg(kg: KnowledgeGraph, triples_out: TextIO, names_out: TextIO) -> None:
    """Write triples and names as sorted TSV so equal graphs give equal bytes."""
    for head, relation, tail in sorted(kg.triples):
        triples_out.write(f"{head}\t{relation}\t{tail}\n")
    for entity in sorted(kg.names):
        names_out.write(f"{entity}\t{kg.names[entity]}\n")


# ---------------------------------------------------------------------------
# Topic graphs
# ---------------------------------------------------------------------------


def build_topic_graph(kg: KnowledgeGraph, entity: str, radius: int = 1) -> TopicGraph:
    """Extract the topic graph around ``entity``.

    Nodes are the entity plus everything within ``radius`` undirected hops;
    edges are all triples with both endpoints among the nodes.

    Raises:
        EntityLookupError: ``entity`` is not in the graph.
    """
    kg.require(entity)
    nodes = {entity}
    frontier = {entity}
    for _ in range(radius):
        reached: set[str] = set()
        for node in frontier:
            reached |= kg.neighbors(node)
        frontier = reached - nodes
        if not frontier:
            break
        nodes |= frontier

    edges = sorted(
        {
            t
            for node in nodes
            for t in kg.incident(node)
            if t[0] in nodes and t[2] in nodes
        }
    )
    return TopicGraph(
        topic_entity=entity,
        nodes=nodes,
        edges=edges,
        names={n: kg.names[n] for n in nodes},
    )
