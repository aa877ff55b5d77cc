"""Exception types raised by the analyses and the front ends."""

from __future__ import annotations


class SdlocalError(Exception):
    """Base class for every error raised by this package."""


class InvalidScenario(SdlocalError):
    """A scenario failed structural validation before an analysis ran."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class BudgetExceeded(SdlocalError):
    """An enumerated set would grow past the configured combinatorial budget.

    Raised instead of silently truncating, because a truncated set could turn
    a violation into a false "holds" verdict.
    """

    def __init__(self, what: str, budget: int):
        self.what = what
        self.budget = budget
        super().__init__(f"combinatorial budget exceeded: more than {budget} {what}")


class ParseError(SdlocalError):
    """One or more errors found while reading scenario text."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(str(e) for e in self.errors))


class XmiImportError(SdlocalError):
    """The XMI document is malformed or outside the supported UML subset."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


class XmiImportWarning(UserWarning):
    """An XMI element was ignored during import."""


class PlacementError(SdlocalError):
    """A coordination message cannot be inserted at the requested anchors."""


class AnchorNotFound(PlacementError):
    pass


class CycleIntroduced(PlacementError):
    pass


class AnchorsInDifferentOperands(PlacementError):
    pass


class NoAdjacentPosition(PlacementError):
    """No single diagram position puts the send right after its anchor and
    the receive right before its anchor."""
