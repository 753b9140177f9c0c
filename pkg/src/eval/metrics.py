"""Gold alignments, Hits@1, many-to-one rate and the metrics report.

Usage:
    from src.eval.metrics import hits_at_1, load_gold_file, split_gold

    gold = split_gold(load_gold_file("gold.tsv"), train_fraction=0.3, seed=7)
    print(hits_at_1(alignment, gold))
"""

import logging
import random
from collections import Counter
from pathlib import Path
from typing import Iterable, Literal, Optional, TextIO

from pydantic import BaseModel, Field, model_validator

from src.decoding.assignment import AlignmentSet
from src.decoding.easy_hard import RoundTrace
from src.errors import ContractViolation, InputParseError
from src.models.candidates import ForcedMatches

logger = logging.getLogger(__name__)

Pair = tuple[str, str]


# ---------------------------------------------------------------------------
# Gold alignments
# ---------------------------------------------------------------------------


class GoldAlignments(BaseModel):
    """One-to-one reference alignments split into seeds (train) and test."""

    train: list[Pair] = Field(default_factory=list)
    test: list[Pair] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self) -> "GoldAlignments":
        pairs = self.train + self.test
        if len({s for s, _ in pairs}) != len(pairs):
            raise ValueError("gold alignments repeat a source")
        if len({t for _, t in pairs}) != len(pairs):
            raise ValueError("gold alignments repeat a target")
        return self

    @property
    def pairs(self) -> list[Pair]:
        return self.train + self.test

    @property
    def train_fraction(self) -> float:
        total = len(self.train) + len(self.test)
        return len(self.train) / total if total else 0.0

    @property
    def test_sources(self) -> list[str]:
        return [s for s, _ in self.test]

    def seeds(self) -> ForcedMatches:
        return ForcedMatches(pairs=dict(self.train))


def load_gold(gold_source: Iterable[str]) -> list[Pair]:
    """Parse source TAB target rows.

    Raises:
        InputParseError: A row does not have exactly two fields.
    """
    pairs: list[Pair] = []
    for line_number, line in enumerate(gold_source, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise InputParseError(
                f"gold row needs 2 tab-separated fields, got {len(fields)}",
                line_number=line_number,
            )
        pairs.append((fields[0], fields[1]))
    logger.info("Loaded %d gold alignments", len(pairs))
    return pairs


def load_gold_file(path: str | Path) -> list[Pair]:
    with open(path, encoding="utf-8", newline="\n") as f:
        return load_gold(f)


def split_gold(
    pairs: list[Pair], train_fraction: float = 0.30, seed: int = 0
) -> GoldAlignments:
    """Deterministic shuffle-and-cut; the train part has round(n * fraction) pairs."""
    if not 0.0 <= train_fraction < 1.0:
        raise ContractViolation(
            f"train_fraction must be in [0, 1), got {train_fraction}"
        )
    ordered = sorted(pairs)
    random.Random(seed).shuffle(ordered)
    n_train = round(len(ordered) * train_fraction)
    return GoldAlignments(
        train=sorted(ordered[:n_train]), test=sorted(ordered[n_train:])
    )


def carve_dev(
    gold: GoldAlignments, fraction: float = 0.20, seed: int = 0
) -> GoldAlignments:
    """Hold out ``fraction`` of the train pairs as a dev test set.

    The returned split keeps the rest of the train pairs as seeds and uses
    the held-out pairs as its test set.
    """
    return split_gold(gold.train, train_fraction=1.0 - fraction, seed=seed)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def hits_at_1(pred: AlignmentSet, gold: GoldAlignments) -> float:
    """Share of gold test pairs predicted exactly; unaligned sources count as misses.

    Raises:
        ContractViolation: ``gold`` has no test pairs.
    """
    if not gold.test:
        raise ContractViolation("hits_at_1 needs at least one gold test pair")
    predicted = {(p.source, p.target) for p in pred.pairs}
    correct = sum(1 for pair in gold.test if pair in predicted)
    return correct / len(gold.test)


def many_to_one_rate(pred: AlignmentSet) -> float:
    """Fraction of predicted pairs whose target is claimed by two or more sources.

    Raises:
        ContractViolation: ``pred`` is empty.
    """
    if not pred.pairs:
        raise ContractViolation("many_to_one_rate needs at least one predicted pair")
    claims = Counter(p.target for p in pred.pairs)
    contested = sum(1 for p in pred.pairs if claims[p.target] >= 2)
    return contested / len(pred.pairs)


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

Mode = Literal["score", "baseline", "jea", "ehd", "decode"]


class MetricsReport(BaseModel):
    """Outcome of one experiment run."""

    mode: Mode = "decode"
    status: Literal["ok", "failed"] = "ok"
    hits_at_1: Optional[float] = Field(None, ge=0.0, le=1.0)
    many_to_one_rate: Optional[float] = Field(None, ge=0.0, le=1.0)
    rounds: int = Field(0, ge=0)
    max_subspace: int = Field(0, ge=0)
    subspaces: int = Field(0, ge=0)
    wall_time: float = Field(0.0, ge=0.0, description="JEA seconds")
    aligned: int = Field(0, ge=0)
    exit_code: int = 0
    errors: list[str] = Field(default_factory=list)
    traces: list[RoundTrace] = Field(default_factory=list)

    def to_kv(self) -> str:
        """Flat ``key=value`` block, one line per scalar field."""
        lines = []
        for key, value in self.model_dump(exclude={"traces", "errors"}).items():
            if isinstance(value, float):
                value = f"{value:.6f}"
            elif value is None:
                value = "NA"
            lines.append(f"{key}={value}")
        for i, error in enumerate(self.errors, start=1):
            lines.append(f"error_{i}={error}")
        return "\n".join(lines) + "\n"


def write_alignments(alignment: AlignmentSet, out: TextIO) -> None:
    """source TAB target TAB probability TAB flag, one pair per line."""
    for pair in alignment.pairs:
        out.write(
            f"{pair.source}\t{pair.target}\t{pair.probability!r}\t{pair.flag}\n"
        )
