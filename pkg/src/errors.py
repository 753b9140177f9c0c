"""Exception hierarchy and exit-code mapping.

Every failure the decoding engine raises on purpose derives from
``AlignmentError`` and carries the process exit code the CLI should use.
"""

from typing import Optional

from pydantic import ValidationError

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_CONFIG = 64
EXIT_IO = 74


class AlignmentError(Exception):
    """Base class for all decoding-engine errors."""

    exit_code: int = EXIT_UNEXPECTED


class ContractViolation(AlignmentError, ValueError):
    """An operation was called outside its precondition."""

    exit_code = 70


class InputParseError(AlignmentError, ValueError):
    """A tabular input row could not be parsed."""

    exit_code = 65

    def __init__(self, message: str, line_number: Optional[int] = None) -> None:
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class EmptyGraphError(InputParseError):
    """A triples stream contained no triples."""


class EntityLookupError(AlignmentError, KeyError):
    """An entity id is not present in the knowledge graph."""

    exit_code = 66

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the message readable
        return str(self.args[0]) if self.args else ""


class ScorerFailure(AlignmentError, RuntimeError):
    """The scorer failed mid-decode; the round trace so far is preserved."""

    exit_code = 75

    def __init__(self, message: str, traces: Optional[list] = None) -> None:
        super().__init__(message)
        self.traces = list(traces or [])


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit status."""
    if isinstance(exc, AlignmentError):
        return exc.exit_code
    if isinstance(exc, ValidationError):
        return EXIT_CONFIG
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_UNEXPECTED
