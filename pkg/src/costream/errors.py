"""Exception hierarchy shared across the package.

``FormatError`` marks malformed input files and maps to CLI exit code 2;
every other ``CostreamError`` is a domain error and maps to exit code 1.
"""


class CostreamError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(CostreamError):
    """An object failed validation at construction time."""


class ArityMismatch(InvariantViolation):
    """The same operation symbol was used with two different arities."""


class UnboundVariable(CostreamError):
    """Substitution hit a variable that is missing from the assignment."""

    def __init__(self, name):
        super().__init__(f"unbound variable: {name!r}")
        self.name = name


class TheoryMismatch(CostreamError):
    """Two systems were combined whose effect theories disagree."""


class AlphabetMismatch(CostreamError):
    """Two systems were combined whose alphabets disagree."""


class StateCapExceeded(CostreamError):
    """On-demand state materialization hit its configured cap."""


class UnsoundModulus(CostreamError):
    """A continuity modulus claimed an output was determined when it was not."""


class FormatError(CostreamError):
    """An input file could not be parsed or violated a declared invariant."""
