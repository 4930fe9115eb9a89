"""Exception types shared across the workbench.

Every error that callers are expected to catch has its own class; all of them
derive from RelogError so a CLI can map any of them to a usage/input failure.
Violation *reports* (tree-decomposition checks) are data, not exceptions.
"""


class RelogError(Exception):
    """Base class for all workbench errors."""


class ParseError(RelogError):
    """Syntax or arity error in a text input, with line/column info."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


# --- structures and algebra ---------------------------------------------------

class NotCompatible(RelogError):
    """Composition failed: the named constant differs between the operands."""

    def __init__(self, symbol):
        self.symbol = symbol
        super().__init__(f"constant {symbol!r} differs between operands")


class NotLocallyDisjoint(RelogError):
    """Composition failed: the named relation's interpretations overlap."""

    def __init__(self, symbol):
        self.symbol = symbol
        super().__init__(f"relation {symbol!r} interpretations overlap")


class UnknownConstant(RelogError):
    """A constant name is not part of the signature in scope."""


class PortClash(RelogError):
    """A port value is already inside the guard denotation."""


class MissingGuard(RelogError):
    """The operation needs a distinguished guard relation and none is declared."""


class SupportTooLarge(RelogError):
    """The structure's support exceeds the configured bound for this operation."""


# --- second-order checking ----------------------------------------------------

class CarrierTooLarge(RelogError):
    """The evaluation carrier exceeds the configured bound for this formula class."""


class HintArityMismatch(RelogError):
    """A hinted second-order binding has the wrong arity for its variable."""


# --- types --------------------------------------------------------------------

class RankTooLarge(RelogError):
    """The requested type rank exceeds the supported bound."""


class UnregisteredType(RelogError):
    """No representative structure is registered for this type."""


class RankMismatch(RelogError):
    """A sentence's quantifier rank exceeds the type's rank."""


class TypeBlowup(RelogError):
    """The reachable-type closure exceeded the configured cutoff."""


# --- tree decompositions ------------------------------------------------------

class WidthExceeded(RelogError):
    """The input decomposition is wider than the requested bound."""


class GuardViolation(RelogError):
    """A parameter value lies inside the guard denotation where it must not."""


class NotReduced(RelogError):
    """The input decomposition violates a reduced-form condition."""


class GuardMismatch(RelogError):
    """The guard denotation does not match the decomposition's interior elements."""


# --- inductive definitions ----------------------------------------------------

class NotNormalized(RelogError):
    """The definition system still contains an equality between distinct variables."""


class UnknownPredicate(RelogError):
    """An atom refers to a predicate that is neither declared nor defined."""


# --- enumeration --------------------------------------------------------------

class BoundsTooLarge(RelogError):
    """Exhaustive enumeration was requested beyond the configured bounds."""
