"""Exceptions raised by oodmetric."""

from typing import Optional


class InputError(ValueError):
    """Invalid input: a malformed record, an invalid box, an out-of-range score or threshold.

    Attributes:
        line: The 1-based line number of the offending record, when the input came from a stream.
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class TrainingError(RuntimeError):
    """Training of a toy model diverged.

    Attributes:
        epoch: The epoch at which a non-finite loss was observed.
    """

    def __init__(self, message: str, epoch: int):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")


class InvariantError(RuntimeError):
    """An internal consistency check failed."""
