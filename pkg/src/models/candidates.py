"""Candidate probability tables and forced matches.

A candidate table maps every source entity to its top-k target
candidates with normalised probabilities p(e_t | e_s). Tables come either
from an external score file (source TAB target TAB raw-score) or from the
built-in scorer in ``src.models.scorer``.

Usage:
    from src.models.candidates import load_candidate_table

    with open("scores.tsv", encoding="utf-8") as f:
        table = load_candidate_table(f, k=10)
    print(table.top1("s1"))
"""

import logging
import math
from typing import Iterable, Literal, Mapping, Optional, TextIO

from pydantic import BaseModel, Field, model_validator

from src.errors import ContractViolation, InputParseError

logger = logging.getLogger(__name__)

Candidate = tuple[str, float]
RawScores = dict[str, dict[str, float]]

_SUM_TOLERANCE = 1e-9


# ---------------------------------------------------------------------------
# Data models
# ---------------------------------------------------------------------------


class CandidateTable(BaseModel):
    """Per-source ranked candidate lists with probabilities summing to one."""

    entries: dict[str, list[Candidate]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_rows(self) -> "CandidateTable":
        for source, row in self.entries.items():
            if not row:
                raise ValueError(f"source {source!r} has no candidates")
            targets = [t for t, _ in row]
            if len(set(targets)) != len(targets):
                raise ValueError(f"source {source!r} lists a target twice")
            probs = [p for _, p in row]
            if any(p < 0.0 or p > 1.0 for p in probs):
                raise ValueError(f"source {source!r} has a probability outside [0,1]")
            if abs(sum(probs) - 1.0) > _SUM_TOLERANCE:
                raise ValueError(f"probabilities of {source!r} do not sum to 1")
            if any(a < b for a, b in zip(probs, probs[1:])):
                raise ValueError(f"candidates of {source!r} are not sorted")
        return self

    @property
    def sources(self) -> list[str]:
        return sorted(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, source: object) -> bool:
        return source in self.entries

    def top1(self, source: str) -> Candidate:
        return self.entries[source][0]

    def probability(self, source: str, target: str) -> float:
        for candidate, prob in self.entries.get(source, []):
            if candidate == target:
                return prob
        return 0.0

    def without_targets(self, targets: Iterable[str]) -> "CandidateTable":
        """Drop ``targets`` from every row and renormalise what is left.

        Rows left empty are skipped with a warning.
        """
        targets = set(targets)
        entries: dict[str, list[Candidate]] = {}
        for source, row in self.entries.items():
            kept = [(t, p) for t, p in row if t not in targets]
            if not kept:
                logger.warning("Source %s has no unclaimed candidates, skipped", source)
                continue
            total = sum(p for _, p in kept)
            if total <= 0.0:
                entries[source] = _ranked((t, 1.0 / len(kept)) for t, _ in kept)
            else:
                entries[source] = _ranked((t, p / total) for t, p in kept)
        return CandidateTable(entries=entries)


class ForcedMatches(BaseModel):
    """Alignments treated as established knowledge (seeds and easy pairs)."""

    pairs: dict[str, str] = Field(
        default_factory=dict, description="Source id -> target id"
    )

    @model_validator(mode="after")
    def _check_one_to_one(self) -> "ForcedMatches":
        if len(set(self.pairs.values())) != len(self.pairs):
            raise ValueError("forced matches must be one-to-one")
        return self

    @property
    def targets(self) -> set[str]:
        return set(self.pairs.values())

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair: object) -> bool:
        if not isinstance(pair, tuple) or len(pair) != 2:
            return False
        return self.pairs.get(pair[0]) == pair[1]

    def merged(self, new_pairs: Mapping[str, str]) -> "ForcedMatches":
        """Return a copy extended with ``new_pairs``; existing pairs never move.

        New pairs touching an already-forced source or target are skipped.
        """
        pairs = dict(self.pairs)
        claimed = set(pairs.values())
        for source, target in sorted(new_pairs.items()):
            if source in pairs or target in claimed:
                logger.warning(
                    "Skipping forced pair (%s, %s): already claimed", source, target
                )
                continue
            pairs[source] = target
            claimed.add(target)
        return ForcedMatches(pairs=pairs)


# ---------------------------------------------------------------------------
# Normalisation
# ---------------------------------------------------------------------------


def _ranked(raw: Iterable[Candidate]) -> list[Candidate]:
    return sorted(raw, key=lambda c: (-c[1], c[0]))


def normalize_topk(
    raw: list[Candidate],
    k: int,
    method: Literal["sum", "softmax"] = "sum",
    temperature: float = 0.05,
) -> list[Candidate]:
    """Keep the top-k candidates and turn their scores into probabilities.

    ``sum`` shifts every kept score by the minimum when any is negative and
    divides by the total (uniform when the total is zero). ``softmax``
    exponentiates ``score / temperature``. Ties rank by target id.

    Raises:
        ContractViolation: Empty input, non-finite score or k < 1.
    """
    if not raw:
        raise ContractViolation("normalize_topk needs at least one candidate")
    if k < 1:
        raise ContractViolation(f"k must be positive, got {k}")
    deduped: dict[str, float] = {}
    for target, score in raw:
        if not math.isfinite(score):
            raise ContractViolation(f"non-finite score for {target!r}: {score}")
        deduped[target] = float(score)

    kept = _ranked(deduped.items())[:k]
    scores = [s for _, s in kept]

    if method == "softmax":
        top = scores[0]
        weights = [math.exp((s - top) / temperature) for s in scores]
    else:
        # scaled to [-1, 1] first so huge finite scores cannot overflow
        scale = max(abs(s) for s in scores) or 1.0
        scaled = [s / scale for s in scores]
        low = min(scaled)
        weights = [s - low for s in scaled] if low < 0 else scaled

    total = sum(weights)
    if total <= 0.0:
        probs = [1.0 / len(kept)] * len(kept)
    else:
        probs = [w / total for w in weights]
    return _ranked((t, p) for (t, _), p in zip(kept, probs))


def table_from_raw(
    raw: Mapping[str, Mapping[str, float]],
    k: int,
    method: Literal["sum", "softmax"] = "sum",
    temperature: float = 0.05,
) -> CandidateTable:
    """Normalise every non-empty row of a raw score mapping."""
    entries = {
        source: normalize_topk(list(row.items()), k, method, temperature)
        for source, row in sorted(raw.items())
        if row
    }
    return CandidateTable(entries=entries)


# ---------------------------------------------------------------------------
# Loading and serialization
# ---------------------------------------------------------------------------


def load_raw_scores(score_source: Iterable[str]) -> RawScores:
    """Parse source TAB target TAB raw-score rows.

    Duplicate (source, target) rows keep the last score and log a warning.

    Raises:
        InputParseError: Wrong field count, unparsable or non-finite score,
            or an empty stream.
    """
    raw: RawScores = {}
    for line_number, line in enumerate(score_source, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise InputParseError(
                f"score row needs 3 tab-separated fields, got {len(fields)}",
                line_number=line_number,
            )
        source, target, value = fields
        try:
            score = float(value)
        except ValueError as exc:
            raise InputParseError(
                f"unparsable score {value!r}", line_number=line_number
            ) from exc
        if not math.isfinite(score):
            raise InputParseError(
                f"non-finite score {value!r}", line_number=line_number
            )
        row = raw.setdefault(source, {})
        if target in row:
            logger.warning(
                "Duplicate score row (%s, %s) at line %d, keeping the last",
                source,
                target,
                line_number,
            )
        row[target] = score

    if not raw:
        raise InputParseError("score stream is empty")
    return raw


def load_candidate_table(
    score_source: Iterable[str],
    k: int,
    method: Literal["sum", "softmax"] = "sum",
    temperature: float = 0.05,
) -> CandidateTable:
    """Load an external score file and normalise each source's top-k."""
    table = table_from_raw(load_raw_scores(score_source), k, method, temperature)
    logger.info("Loaded candidate table for %d sources (k=%d)", len(table), k)
    return table


def dump_candidate_table(table: CandidateTable, out: TextIO) -> None:
    """Write the table in the score-file format with normalised probabilities."""
    for source in table.sources:
        for target, prob in table.entries[source]:
            out.write(f"{source}\t{target}\t{prob!r}\n")


def top1_pairs(
    table: CandidateTable, sources: Optional[Iterable[str]] = None
) -> dict[str, Candidate]:
    """Greedy per-source argmax: the plain baseline decoding."""
    chosen = table.sources if sources is None else sources
    return {s: table.top1(s) for s in chosen if s in table}
