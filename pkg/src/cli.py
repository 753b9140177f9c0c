"""Command-line front door.

Subcommands:
    score   normalise a score file (or run the desk scorer) into a table
    jea     joint alignment only
    ehd     Easy-to-Hard decoding, final round top-1
    decode  Easy-to-Hard decoding, final round solved jointly
    synth   write an adversarial-twin corpus
    eval    compare baseline / EHD / JEA / EHD+JEA on one input

Results go to the files named by the flags and to standard output;
diagnostics go to standard error.

Usage:
    python -m src decode --scores s.tsv --gold g.tsv --out a.tsv
    python -m src synth --pairs 100 --shared 4 --seed 7 --out data/twins
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Literal, NoReturn, Optional

from pydantic import BaseModel, Field, ValidationError

from src.config import DecodeConfig, ScorerConfig, configure_logging
from src.errors import EXIT_CONFIG, EXIT_OK, EXIT_USAGE, exit_code_for
from src.eval.synthetic import generate_adversarial_twins, write_corpus
from src.pipeline.orchestrator import ExperimentInputs, compare_modes, run_experiment

logger = logging.getLogger(__name__)

Subcommand = Literal["score", "jea", "ehd", "decode", "synth", "eval"]

_DECODE_COMMANDS = ("score", "jea", "ehd", "decode", "eval")


# ---------------------------------------------------------------------------
# Data models
# ---------------------------------------------------------------------------


class SynthOptions(BaseModel):
    pairs: int = Field(..., ge=1)
    shared: int = Field(4, ge=1)
    seed: int = 0
    out_dir: Path


class CliInvocation(BaseModel):
    """One parsed command line."""

    subcommand: Subcommand
    decode: DecodeConfig = Field(default_factory=DecodeConfig)
    scorer: ScorerConfig = Field(default_factory=ScorerConfig)
    inputs: ExperimentInputs = Field(default_factory=ExperimentInputs)
    synth: Optional[SynthOptions] = None
    log_level: Optional[str] = None


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _add_decode_flags(parser: argparse.ArgumentParser, subcommand: str) -> None:
    files = parser.add_argument_group("files")
    files.add_argument("--kg1", type=Path, help="Source triples TSV")
    files.add_argument("--kg2", type=Path, help="Target triples TSV")
    files.add_argument("--names1", type=Path, help="Source names TSV")
    files.add_argument("--names2", type=Path, help="Target names TSV")
    files.add_argument("--scores", type=Path, help="External score TSV")
    files.add_argument(
        "--gold", type=Path, required=subcommand == "eval", help="Gold TSV"
    )
    files.add_argument(
        "--out",
        type=Path,
        required=subcommand == "score",
        help="Alignment (or candidate table) output",
    )
    files.add_argument("--trace", type=Path, help="Round trace output")
    files.add_argument("--report", type=Path, help="JSON metrics report output")

    decoding = parser.add_argument_group("decoding")
    decoding.add_argument("--alpha", type=float, help="Easy threshold (0.75)")
    decoding.add_argument("--k-min", type=int, help="New easy pairs to continue (20)")
    decoding.add_argument("--tau", type=float, help="JEA drop threshold (0.10)")
    decoding.add_argument("--top-k", type=int, help="Candidates per source (10)")
    decoding.add_argument("--max-rounds", type=int, help="EHD round cap (50)")
    decoding.add_argument("--orphan-mode", choices=["top1", "drop"])
    decoding.add_argument("--solver", choices=["textbook", "augmenting"])
    decoding.add_argument("--workers", type=int)
    decoding.add_argument("--seed", type=int, default=0, help="Gold split seed")
    decoding.add_argument(
        "--train-fraction",
        type=float,
        default=0.0,
        help="Share of gold used as seeds (0 = all gold is test)",
    )
    decoding.add_argument(
        "--dev",
        action="store_true",
        help="Evaluate on a dev split carved from the seeds",
    )

    scoring = parser.add_argument_group("scoring")
    scoring.add_argument("--normalize", choices=["sum", "softmax"], default="sum")
    scoring.add_argument("--temperature", type=float, default=0.05)
    scoring.add_argument("--lambda", dest="blend", type=float, default=0.5)
    scoring.add_argument("--radius", type=int, default=1)
    scoring.add_argument(
        "--enhance", choices=["full", "surface", "none"], default="full"
    )
    scoring.add_argument("--pool-size", type=int, default=10)


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits with the usage exit code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ea-decode",
        description="Entity alignment decoding: JEA and Easy-to-Hard decoding.",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    for name in _DECODE_COMMANDS:
        sub = subparsers.add_parser(name)
        _add_decode_flags(sub, name)

    synth = subparsers.add_parser("synth")
    synth.add_argument("--pairs", type=int, required=True)
    synth.add_argument("--shared", type=int, default=4)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", type=Path, required=True)
    return parser


def parse_args(argv: list[str]) -> CliInvocation:
    """Parse a command line.

    Raises:
        SystemExit: Usage error, with ``EXIT_USAGE``.
        ValidationError: A value is out of range.
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.subcommand == "synth":
        return CliInvocation(
            subcommand="synth",
            synth=SynthOptions(
                pairs=args.pairs, shared=args.shared, seed=args.seed, out_dir=args.out
            ),
            log_level=args.log_level,
        )

    if args.scores is None and (args.kg1 is None or args.kg2 is None):
        parser.error("one of --scores or both --kg1 and --kg2 is required")

    decode = DecodeConfig.from_env(
        alpha=args.alpha,
        k_min=args.k_min,
        tau=args.tau,
        top_k=args.top_k,
        max_rounds=args.max_rounds,
        orphan_mode=args.orphan_mode,
        solver=args.solver,
        workers=args.workers,
        use_jea_final=args.subcommand != "ehd",
    )
    scorer = ScorerConfig(
        blend=args.blend,
        radius=args.radius,
        normalize=args.normalize,
        temperature=args.temperature,
        enhancement=args.enhance,
        pool_size=args.pool_size,
    )
    inputs = ExperimentInputs(
        kg1=args.kg1,
        kg2=args.kg2,
        names1=args.names1,
        names2=args.names2,
        scores=args.scores,
        gold=args.gold,
        out=args.out,
        trace=args.trace,
        report=args.report,
        train_fraction=args.train_fraction,
        dev=args.dev,
        seed=args.seed,
    )
    return CliInvocation(
        subcommand=args.subcommand,
        decode=decode,
        scorer=scorer,
        inputs=inputs,
        log_level=args.log_level,
    )


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def _synth(options: SynthOptions) -> int:
    corpus = generate_adversarial_twins(options.pairs, options.shared, options.seed)
    write_corpus(corpus, options.out_dir)
    print(f"wrote {len(corpus.gold.pairs)} gold pairs to {options.out_dir}")
    return EXIT_OK


def main(invocation: CliInvocation) -> int:
    """Run a parsed invocation and return the process exit status."""
    configure_logging(invocation.log_level)
    try:
        if invocation.subcommand == "synth":
            return _synth(invocation.synth)
        if invocation.subcommand == "eval":
            comparison = compare_modes(
                invocation.decode, invocation.scorer, invocation.inputs
            )
            sys.stdout.write(comparison.to_table())
            for report in comparison.rows.values():
                if report.status != "ok":
                    return report.exit_code
            return EXIT_OK

        report = run_experiment(
            invocation.subcommand,
            invocation.decode,
            invocation.scorer,
            invocation.inputs,
        )
        sys.stdout.write(report.to_kv())
        return report.exit_code
    except Exception as exc:
        logger.exception("Command %s failed", invocation.subcommand)
        return exit_code_for(exc)


def run(argv: Optional[list[str]] = None) -> None:
    """Console-script entry point."""
    try:
        invocation = parse_args(sys.argv[1:] if argv is None else argv)
    except ValidationError as exc:
        configure_logging()
        logger.error("Invalid configuration: %s", exc)
        sys.exit(EXIT_CONFIG)
    sys.exit(main(invocation))
