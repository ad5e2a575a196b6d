"""Exception types shared across the package."""


class MarginBoundError(Exception):
    """Base class for all package-specific failures."""


class NoEligibleMarginError(MarginBoundError):
    """No declared margin contains every variable a query references."""


class RegimeOutsideMarginError(MarginBoundError):
    """A regime intervenes on variables outside the margin at hand."""


class UnsupportedArityError(MarginBoundError):
    """A response-function space is too large to enumerate."""


class TooLargeError(MarginBoundError):
    """A parameter block or full parameterization exceeds the tractable size."""


class RegimeNotInDataError(MarginBoundError):
    """A weak-confounding constraint needs a data regime that was not provided.

    Without that regime the conditional term is a function of the decision
    variables and the constraint stops being linear; we reject instead of
    solving a polynomial program.
    """


class ScopeMismatchError(MarginBoundError):
    """Two margins paired for coherence declare different scope variables."""


class QueryScopeError(MarginBoundError):
    """A query landed on a margin with a nonempty conditional scope."""


class IterationLimitError(MarginBoundError):
    """The simplex pivot budget was exhausted before reaching a verdict."""


class StrengthUndefinedError(MarginBoundError):
    """Edge-strength measurement produced no constraint instances."""
