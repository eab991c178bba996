"""Exact-decimal parsing and formatting.

Probabilities and criticalities are decimal values, never binary floats:
0.02 + 0.3 - 0.32 must be exactly 0 so that ranking is deterministic.
Values enter the system as decimal literal strings and keep at most nine
fractional digits.
"""

from __future__ import annotations

import re
from decimal import Decimal

from .errors import ParseError

MAX_SCALE = 9

_DECIMAL_RE = re.compile(r"^-?(0|[1-9][0-9]*)(\.[0-9]+)?$")


def dec(text: str | Decimal, locus: str | None = None) -> Decimal:
    """Parse a decimal literal string ("0.02", "-0.22", "1")."""
    if isinstance(text, Decimal):
        return text
    if not isinstance(text, str) or not _DECIMAL_RE.match(text):
        raise ParseError(f"not a decimal literal: {text!r}", locus)
    value = Decimal(text)
    if -value.as_tuple().exponent > MAX_SCALE:
        raise ParseError(f"more than {MAX_SCALE} fractional digits: {text!r}", locus)
    return value


def fmt(value: Decimal) -> str:
    """Canonical plain-text form: no exponent, no trailing zeros, -0 -> 0."""
    if value == 0:
        return "0"
    return format(value.normalize(), "f")


TENTH = Decimal("0.1")
ZERO = Decimal(0)
ONE = Decimal(1)
