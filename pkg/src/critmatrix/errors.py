"""Exception hierarchy shared across the workbench."""

from __future__ import annotations


class CritmatrixError(Exception):
    """Base class for all workbench errors."""

    code = "Error"

    def payload(self) -> dict:
        """Error body used by the CLI and the HTTP service."""
        body = {"code": self.code, "message": str(self)}
        locus = getattr(self, "locus", None)
        if locus is not None:
            body["locus"] = locus
        return body


class ParseError(CritmatrixError):
    """Malformed input file; carries a line/field locus when known."""

    code = "ParseError"

    def __init__(self, message: str, locus: str | None = None):
        super().__init__(message if locus is None else f"{locus}: {message}")
        self.locus = locus


class ValidationError(CritmatrixError):
    """One or more invariant violations; lists every violation found."""

    code = "ValidationError"

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "\n".join(f"  {d}" for d in self.diagnostics)
        super().__init__(f"{len(self.diagnostics)} validation error(s):\n{lines}")


class GrammarError(CritmatrixError):
    """Qualified-id text does not match the grammar."""

    code = "GrammarError"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position
        self.locus = f"pos {position}"


class MissingProbability(CritmatrixError):
    code = "MissingProbability"


class DomainError(CritmatrixError):
    code = "DomainError"


class UnknownFault(CritmatrixError):
    code = "UnknownFault"


class EndpointNotFound(CritmatrixError):
    code = "EndpointNotFound"


class DuplicateRelation(CritmatrixError):
    code = "DuplicateRelation"


class KindMismatch(CritmatrixError):
    code = "KindMismatch"


class SelfLoop(CritmatrixError):
    code = "SelfLoop"


class GuardNotApplicable(CritmatrixError):
    code = "GuardNotApplicable"


class GuardAlreadyApplied(CritmatrixError):
    code = "GuardAlreadyApplied"


class GuardNotApplied(CritmatrixError):
    code = "GuardNotApplied"


class GuardNotInRow(CritmatrixError):
    code = "GuardNotInRow"


class EmptyHistory(CritmatrixError):
    code = "EmptyHistory"


class ConfigError(CritmatrixError):
    code = "ConfigError"


class StaleRevision(CritmatrixError):
    code = "StaleRevision"
