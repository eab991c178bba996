"""Qualified fault identifiers and their textual grammar.

A qualified id names a fault by its source artifact, e.g.

    Detection Failure.[Autonomous Car Platooning.FMEA_0]
    Car Collision.[Autonomous Car Platooning.ETA_0]#2

Grammar (bit-exact):

    <fault_name> "." "[" <system_name> "." <KIND> "_" <index> "]" ["#" <n>]

with KIND one of FTA | FMEA | ETA and index / n base-10 integers without
leading zeros. Ids are the primary keys of the fault criticality matrix;
duplicate fault names inside one artifact are disambiguated with "#2",
"#3", ... in extraction order.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .errors import GrammarError


class ArtifactKind(enum.Enum):
    FTA = "FTA"
    FMEA = "FMEA"
    ETA = "ETA"


_INT_RE = re.compile(r"^(0|[1-9][0-9]*)$")
_POS_INT_RE = re.compile(r"^[1-9][0-9]*$")


@dataclass(frozen=True)
class QualifiedFaultId:
    fault_name: str
    system_name: str
    artifact_kind: ArtifactKind
    artifact_index: int
    disambiguator: int | None = None

    def __str__(self) -> str:
        return format_qualified_id(self)

    def sort_key(self) -> tuple[str, str]:
        # Case-insensitive primary key reproduces the conventional matrix
        # ordering; exact text breaks ties deterministically.
        text = format_qualified_id(self)
        return (text.casefold(), text)


def format_qualified_id(fid: QualifiedFaultId) -> str:
    """Render a qualified id in the textual grammar."""
    base = (
        f"{fid.fault_name}.[{fid.system_name}."
        f"{fid.artifact_kind.value}_{fid.artifact_index}]"
    )
    if fid.disambiguator is not None:
        return f"{base}#{fid.disambiguator}"
    return base


def parse_qualified_id(text: str) -> QualifiedFaultId:
    """Parse the textual grammar; raises GrammarError with a position."""
    body = text
    disambiguator: int | None = None

    hash_pos = text.rfind("#")
    close_pos = text.rfind("]")
    if hash_pos > close_pos:
        suffix = text[hash_pos + 1 :]
        if not _POS_INT_RE.match(suffix):
            raise GrammarError(f"bad disambiguator {suffix!r}", hash_pos + 1)
        disambiguator = int(suffix)
        body = text[:hash_pos]

    if not body.endswith("]"):
        raise GrammarError("expected ']'", len(body))
    open_pos = body.rfind(".[")
    if open_pos < 0:
        raise GrammarError("expected '.['", 0)
    fault_name = body[:open_pos]
    if not fault_name:
        raise GrammarError("empty fault name", 0)

    inner = body[open_pos + 2 : -1]
    sep = inner.rfind(".")
    if sep < 0:
        raise GrammarError("expected '.' before artifact kind", open_pos + 2)
    system_name = inner[:sep]
    if not system_name:
        raise GrammarError("empty system name", open_pos + 2)

    tail = inner[sep + 1 :]
    tail_pos = open_pos + 2 + sep + 1
    under = tail.rfind("_")
    if under < 0:
        raise GrammarError("expected '<KIND>_<index>'", tail_pos)
    kind_text, index_text = tail[:under], tail[under + 1 :]
    try:
        kind = ArtifactKind(kind_text)
    except ValueError:
        raise GrammarError(f"unknown artifact kind {kind_text!r}", tail_pos) from None
    if not _INT_RE.match(index_text):
        raise GrammarError(f"bad artifact index {index_text!r}", tail_pos + under + 1)

    return QualifiedFaultId(
        fault_name=fault_name,
        system_name=system_name,
        artifact_kind=kind,
        artifact_index=int(index_text),
        disambiguator=disambiguator,
    )
