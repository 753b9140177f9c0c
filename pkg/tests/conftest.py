"""Project-wide test fixtures.

Paths to the on-disk fixtures under data/fixtures/ and small hand-built
knowledge graphs and candidate tables shared across test packages.
"""

from pathlib import Path

import pytest

from src.kg.graph import KnowledgeGraph, load_kg, load_kg_files
from src.models.candidates import CandidateTable, table_from_raw

FIXTURES_DIR = Path(__file__).resolve().parents[1] / "data" / "fixtures"
REPLAY_DIR = FIXTURES_DIR / "replay"
BUSH_DIR = FIXTURES_DIR / "bush"

ZH = "http://zh.dbpedia.org/resource/"
EN = "http://dbpedia.org/resource/"


# ---------------------------------------------------------------------------
# Fixture files
# ---------------------------------------------------------------------------


@pytest.fixture
def replay_scores() -> Path:
    return REPLAY_DIR / "scores.tsv"


@pytest.fixture
def replay_gold() -> Path:
    return REPLAY_DIR / "gold.tsv"


@pytest.fixture
def bush_kgs() -> tuple[KnowledgeGraph, KnowledgeGraph]:
    kg_zh = load_kg_files(BUSH_DIR / "kg1.tsv", BUSH_DIR / "names1.tsv")
    kg_en = load_kg_files(BUSH_DIR / "kg2.tsv", BUSH_DIR / "names2.tsv")
    return kg_zh, kg_en


# ---------------------------------------------------------------------------
# Small in-memory inputs
# ---------------------------------------------------------------------------


@pytest.fixture
def chain_kg() -> KnowledgeGraph:
    """a -r-> b -r-> c"""
    return load_kg(["a\tr\tb\n", "b\tr\tc\n"])


@pytest.fixture
def conflict_table() -> CandidateTable:
    """Two sources share a top-1 target but have distinct second choices."""
    return table_from_raw(
        {"s1": {"t": 0.6, "u": 0.4}, "s2": {"t": 0.7, "v": 0.3}}, k=10
    )


@pytest.fixture
def weak_link_table() -> CandidateTable:
    """A-1, B-1, B-2 (weak), C-2, C-3: two sub-spaces at tau = 0.10."""
    return CandidateTable(
        entries={
            "A": [("1", 1.0)],
            "B": [("1", 0.95), ("2", 0.05)],
            "C": [("2", 0.6), ("3", 0.4)],
        }
    )
