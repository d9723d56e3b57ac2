"""Machine-readable API constraints carried inside generated test programs.

The first line of every test program is a stanza naming the API paths a
candidate solution must and must not use, so graders can score API usage
without running anything.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .errors import ParseFailure
from .model import ApiIdentity

_STANZA_RE = re.compile(r"^// EVO-CHECK require=(?P<require>[^ ]*) forbid=(?P<forbid>[^ ]*)$")


@dataclass(frozen=True, slots=True)
class CheckStanza:
    require: tuple[str, ...]
    forbid: tuple[str, ...]


def render_stanza(require: Sequence[str], forbid: Sequence[str] = ()) -> str:
    return f"// EVO-CHECK require={','.join(require)} forbid={','.join(forbid)}"


def parse_stanza(program: str) -> CheckStanza:
    """Read the constraint header off the first line of a test program."""
    first_line = program.split("\n", 1)[0]
    m = _STANZA_RE.match(first_line)
    if m is None:
        raise ParseFailure(f"missing or malformed EVO-CHECK stanza: {first_line!r}")
    require = tuple(p for p in m.group("require").split(",") if p)
    forbid = tuple(p for p in m.group("forbid").split(",") if p)
    if not require:
        raise ParseFailure("EVO-CHECK stanza requires at least one required path")
    return CheckStanza(require, forbid)


def _boundary_pattern(text: str) -> re.Pattern:
    return re.compile(rf"(?<![A-Za-z0-9_]){re.escape(text)}(?![A-Za-z0-9_])")


def token_present(source: str, path: str) -> bool:
    """Whether a path occurs in the source, by full path or final segment.

    Matches are token-bounded, so `frob_runs_fast` never counts as
    `frob_runs`. Occurrences inside comments or strings do count; the
    constraint is over the text a model produced, not its semantics.
    """
    if _boundary_pattern(path).search(source):
        return True
    final = path.rsplit("::", 1)[-1]
    return _boundary_pattern(final).search(source) is not None


def static_check(source: str, program_or_stanza: str | CheckStanza) -> bool:
    """Candidate source against the program's required/forbidden paths."""
    if isinstance(program_or_stanza, CheckStanza):
        stanza = program_or_stanza
    else:
        stanza = parse_stanza(program_or_stanza)
    if not all(token_present(source, p) for p in stanza.require):
        return False
    return not any(token_present(source, p) for p in stanza.forbid)


def scan_query_for_api(query: str, api: ApiIdentity) -> bool:
    """Whether a task query leaks the API it is meant to exercise.

    True when the canonical path appears anywhere, or the final segment
    appears as a standalone token.
    """
    full = f"{api.crate_name}::{api.canonical_path}"
    if api.canonical_path in query or full in query:
        return True
    return _boundary_pattern(api.final_segment).search(query) is not None
