"""Mine stabilization and deprecation signals out of release notes.

Release notes are the cheapest of the three evidence sources: one markdown
file per release, scanned line by line. A line yields a signal only when it
names an action (stabilize/deprecate, in past or imperative form) and quotes
an item path in backticks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .model import (
    OFFICIAL_CRATES,
    ApiIdentity,
    ChangeKind,
    Diagnostics,
    VersionId,
    infer_item_kind,
)

# Literal verb stems that mark a line as an evolution announcement.
_STABILIZE_STEMS = ("Stabilize", "stabilized")
_DEPRECATE_STEMS = ("Deprecate", "deprecated")

_BACKTICK_RE = re.compile(r"`([^`]+)`")
_PATH_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(::[A-Za-z_][A-Za-z0-9_]*)*$")


@dataclass(frozen=True, slots=True)
class ChangelogSignal:
    """One announcement line, resolved to an API and a kind candidate."""

    api: ApiIdentity
    kind_candidate: ChangeKind
    version: VersionId
    note: str


def notes_filename(version: VersionId) -> str:
    return f"RELEASES-{version}.md"


def _line_kind(line: str) -> ChangeKind | None:
    """The kind announced by a line, decided by the earliest verb stem."""
    hits: list[tuple[int, ChangeKind]] = []
    for stem in _STABILIZE_STEMS:
        pos = line.find(stem)
        if pos != -1:
            hits.append((pos, ChangeKind.STABILIZATION))
    for stem in _DEPRECATE_STEMS:
        pos = line.find(stem)
        if pos != -1:
            hits.append((pos, ChangeKind.DEPRECATION))
    if not hits:
        return None
    return min(hits)[1]


def _first_backtick_path(line: str) -> tuple[str, ...] | None:
    for quoted in _BACKTICK_RE.findall(line):
        if _PATH_RE.match(quoted):
            return tuple(quoted.split("::"))
    return None


def parse_release_notes(
    notes_text: str,
    version: VersionId,
    diagnostics: Diagnostics | None = None,
) -> list[ChangelogSignal]:
    """Extract announcement signals from one release's notes.

    Lines that carry neither a verb stem nor a parseable backtick path are
    skipped; non-blank skipped lines are tallied under "unmatched_line".
    Duplicate (api, kind) announcements collapse to the first occurrence.
    """
    signals: list[ChangelogSignal] = []
    seen: set[tuple[str, str, ChangeKind]] = set()
    for raw_line in notes_text.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        kind = _line_kind(line)
        path = _first_backtick_path(line) if kind is not None else None
        if kind is None or path is None:
            if diagnostics is not None:
                diagnostics.bump("unmatched_line")
            continue
        crate = "std"
        if len(path) > 1 and path[0] in OFFICIAL_CRATES:
            crate = path[0]
            path = path[1:]
        api = ApiIdentity(crate, path, infer_item_kind(path))
        key = (api.crate_name, api.canonical_path, kind)
        if key in seen:
            if diagnostics is not None:
                diagnostics.bump("duplicate_announcement")
            continue
        seen.add(key)
        signals.append(ChangelogSignal(api, kind, version, line))
    return signals


def parse_release_notes_file(
    path: Path | str,
    version: VersionId,
    diagnostics: Diagnostics | None = None,
) -> list[ChangelogSignal]:
    return parse_release_notes(
        Path(path).read_text(encoding="utf-8"), version, diagnostics
    )
