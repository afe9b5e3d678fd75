"""Exception hierarchy.

Every error raised on bad input derives from :class:`QuotemarkError`, which the
CLI maps to exit status 1.
"""

from __future__ import annotations


class QuotemarkError(Exception):
    """Base class for validation and data errors."""


class MissingFile(QuotemarkError):
    pass


class MalformedRow(QuotemarkError):
    def __init__(self, path: str, row: int, reason: str):
        self.path = path
        self.row = row
        self.reason = reason
        super().__init__(f"{path}: row {row}: {reason}")


class DanglingReference(QuotemarkError):
    def __init__(self, name: str, where: str = ""):
        self.name = name
        loc = f" ({where})" if where else ""
        super().__init__(f"annotation refers to unknown character {name!r}{loc}")


class EmptyInput(QuotemarkError):
    pass


class EmptyCharacterList(QuotemarkError):
    pass


class ConflictingGold(QuotemarkError):
    """Two gold mentions overlap with different entities.

    Curation reports these instead of raising; the class exists so callers can
    promote them to hard errors.
    """


class UnbalancedQuote(QuotemarkError):
    pass


class EmptyDataset(QuotemarkError):
    pass


class DivergenceDetected(QuotemarkError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ShapeMismatch(QuotemarkError):
    pass


class EmptyGold(QuotemarkError):
    pass


class MissingPrediction(QuotemarkError):
    def __init__(self, missing: list):
        self.missing = list(missing)
        preview = ", ".join(map(str, self.missing[:10]))
        more = "" if len(self.missing) <= 10 else f" (+{len(self.missing) - 10} more)"
        super().__init__(f"no attribution for quotations: {preview}{more}")


class TooFewNovels(QuotemarkError):
    pass
