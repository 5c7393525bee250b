"""Exception types shared across the package.

Everything derives from :class:`RBFDeformError` (itself a ``ValueError``) so
callers can catch the whole family or stay generic.
"""


class RBFDeformError(ValueError):
    """Base class for all errors raised by this package."""


class DuplicateNodesError(RBFDeformError):
    """Two kernel centers coincide, making the RBF matrix singular."""


class NotPositiveDefiniteError(RBFDeformError):
    """A Cholesky pivot came out non-positive (coincident or near-coincident
    support nodes, or a matrix that is not SPD)."""


class DimensionMismatchError(RBFDeformError):
    """Right-hand side length does not match the factored system order."""


class EmptySupportSetError(RBFDeformError):
    """An operation that needs at least one support node got none."""


class InvalidGroupCountError(RBFDeformError):
    """Group count m outside [1, number of boundary nodes]."""


class UnknownIndexError(RBFDeformError):
    """A boundary-node index that is not part of the boundary set."""


class EmptyGroupError(RBFDeformError):
    """Arg-max requested over an empty group."""


class TooFewBoundaryNodesError(RBFDeformError):
    """Selection needs at least 3 boundary nodes to seed."""


class SelectionStalledError(RBFDeformError):
    """Errors still exceed the tolerance but no group holds an addable
    candidate (all over-tolerance nodes were rejected as near-singular)."""


class InvalidCountError(RBFDeformError):
    """Requested support count outside [3, number of boundary nodes]."""


class DegenerateCellError(RBFDeformError):
    """A surface cell has coincident vertices."""


class ParseError(RBFDeformError):
    """Malformed input text. Carries the 1-based line number."""

    def __init__(self, line, message):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class InvariantViolationError(ParseError):
    """Input parsed but violates a structural invariant (index ranges,
    arity limits, ...). Carries the offending line number."""


class MissingNodeError(RBFDeformError):
    """A displacement file lacks an entry for a boundary node."""


class DuplicateNodeError(RBFDeformError):
    """A displacement file lists the same boundary node twice."""


class SourceMismatchError(RBFDeformError):
    """A prescribed-displacement source does not match the boundary set."""
