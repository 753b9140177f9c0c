"""Decoding and scoring configuration.

Defaults: top-10 candidates, easy threshold alpha = 0.75, keep iterating
while a round finds more than K = 20 new easy alignments, and drop
candidates below tau = 0.10 before joint assignment.

Environment variables (loaded from ``.env`` when present) override the
built-in defaults; explicit CLI flags override the environment.

Usage:
    from src.config import DecodeConfig, ScorerConfig

    config = DecodeConfig.from_env()
    strict = config.model_copy(update={"orphan_mode": "drop"})
"""

import logging
import os
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()

logger = logging.getLogger(__name__)

_ENV_FIELDS: dict[str, tuple[str, type]] = {
    "EA_ALPHA": ("alpha", float),
    "EA_K_MIN": ("k_min", int),
    "EA_TAU": ("tau", float),
    "EA_TOP_K": ("top_k", int),
    "EA_MAX_ROUNDS": ("max_rounds", int),
    "EA_WORKERS": ("workers", int),
}

_LOG_FORMAT = "%(asctime)s [%(name)s] %(levelname)s: %(message)s"


class DecodeConfig(BaseModel):
    """Thresholds and loop limits for EHD and JEA decoding."""

    alpha: float = Field(0.75, gt=0.0, le=1.0, description="Easy threshold")
    k_min: int = Field(
        20, ge=1, description="Continue only if more than k_min new easy pairs"
    )
    tau: float = Field(0.10, ge=0.0, le=1.0, description="JEA drop threshold")
    top_k: int = Field(10, ge=1, description="Candidate list length")
    max_rounds: int = Field(50, ge=1, description="Safety cap on EHD rounds")
    use_jea_final: bool = Field(
        True, description="Resolve the final hard set jointly instead of top-1"
    )
    orphan_mode: Literal["top1", "drop"] = "top1"
    solver: Literal["textbook", "augmenting"] = "textbook"
    workers: int = Field(1, ge=1)

    @classmethod
    def from_env(cls, **overrides: object) -> "DecodeConfig":
        """Build a config from ``EA_*`` environment variables plus overrides."""
        values: dict[str, object] = {}
        for env_name, (field, cast) in _ENV_FIELDS.items():
            raw = os.environ.get(env_name)
            if raw:
                values[field] = cast(raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class ScorerConfig(BaseModel):
    """Knobs of the built-in topic-graph matcher."""

    blend: float = Field(
        0.5, ge=0.0, le=1.0, description="Weight of the topic-entity similarity"
    )
    radius: int = Field(1, ge=1, description="Topic graph hop radius")
    normalize: Literal["sum", "softmax"] = "sum"
    temperature: float = Field(0.05, gt=0.0, description="Softmax temperature")
    enhancement: Literal["full", "surface", "none"] = "full"
    pool_size: int = Field(10, ge=1, description="Name-blocked candidates per source")
    neighbor_expansion: int = Field(
        3, ge=0, description="Best name matches per neighbour used for blocking"
    )
    node_matching: Literal["source", "both"] = "source"
    exclude_claimed: bool = Field(
        True, description="Replay scorer drops claimed targets and renormalises"
    )
    renormalize_claimed: bool = Field(
        False, description="Desk scorer drops claimed targets before normalising"
    )


def configure_logging(level: Optional[str] = None) -> None:
    """Send diagnostics to stderr at the requested (or ``EA_LOG_LEVEL``) level."""
    name = (level or os.environ.get("EA_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO), format=_LOG_FORMAT)
