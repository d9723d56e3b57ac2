"""Scan source snapshots for stability attributes and body-level edits.

This is deliberately not a full parser. Snapshot fixtures are well-formed
item declarations nested under mod/impl blocks, so a regex-plus-brace
scanner recovers identity, header, attributes, and body reliably. Nested
functions inside bodies and braces inside string literals are out of scope
for this dialect.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from .errors import ParseFailure
from .model import (
    ApiIdentity,
    ChangeKind,
    ItemKind,
    VersionId,
    parse_version,
)

_SCOPE_RE = re.compile(
    r"^[ \t]*(?:pub(?:\([^)]*\))?[ \t]+)?"
    r"(?:mod[ \t]+(?P<mod>[A-Za-z_][A-Za-z0-9_]*)"
    r"|impl(?:<[^>]*>)?[ \t]+(?:[^{\n]*\bfor[ \t]+)?(?P<impl>[A-Za-z_][A-Za-z0-9_]*)[^{\n]*)"
    r"[ \t]*\{",
    re.MULTILINE,
)

_ITEM_RE = re.compile(
    r"^[ \t]*(?:pub(?:\([^)]*\))?[ \t]+)?"
    r"(?P<kw>fn|struct|enum|trait|type|const|macro_rules!)[ \t]+"
    r"(?P<name>[A-Za-z_][A-Za-z0-9_]*)",
    re.MULTILINE,
)

_ATTR_LINE_RE = re.compile(r"^[ \t]*#\[[^\n]*\][ \t]*$")
_STABLE_ATTR_RE = re.compile(r"#\[\s*stable\s*\(([^)]*)\)\s*\]")
_DEPRECATED_ATTR_RE = re.compile(r"#\[\s*deprecated\s*(?:\(([^)]*)\))?\s*\]")
_SINCE_RE = re.compile(r'since\s*=\s*"([^"]+)"')
_NOTE_RE = re.compile(r'note\s*=\s*"([^"]*)"')
_BACKTICK_PATH_RE = re.compile(r"`([A-Za-z_][A-Za-z0-9_]*(?:::[A-Za-z_][A-Za-z0-9_]*)*)`")
_USE_PHRASE_RE = re.compile(r"\buse\s+([A-Za-z_][A-Za-z0-9_]*(?:::[A-Za-z_][A-Za-z0-9_]*)*)")

_KIND_BY_KEYWORD = {
    "struct": ItemKind.TYPE,
    "enum": ItemKind.TYPE,
    "type": ItemKind.TYPE,
    "trait": ItemKind.TRAIT,
    "const": ItemKind.CONST,
    "macro_rules!": ItemKind.MACRO,
}


@dataclass(frozen=True, slots=True)
class SourceSignal:
    """One kind candidate recovered from source-level evidence."""

    api: ApiIdentity
    kind_candidate: ChangeKind
    version: VersionId
    replacement_hint: str | None = None
    body_hash_old: str | None = None
    body_hash_new: str | None = None


@dataclass(frozen=True, slots=True)
class SourceItem:
    path: tuple[str, ...]
    item_kind: ItemKind
    header: str
    body: str
    attributes: tuple[str, ...]


def _matching_brace(text: str, open_idx: int) -> int:
    depth = 0
    for i in range(open_idx, len(text)):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i
    return len(text)


def _attribute_block(text: str, item_start: int) -> tuple[str, ...]:
    """Attribute lines sitting directly above the item's own line."""
    attrs: list[str] = []
    line_start = text.rfind("\n", 0, item_start) + 1
    cursor = line_start
    while cursor > 0:
        prev_start = text.rfind("\n", 0, cursor - 1) + 1
        line = text[prev_start : cursor - 1]
        if _ATTR_LINE_RE.match(line):
            attrs.append(line.strip())
        elif line.strip().startswith("//"):
            pass  # doc comments may sit between attributes and the item
        else:
            break
        cursor = prev_start
    attrs.reverse()
    return tuple(attrs)


def scan_items(text: str) -> list[SourceItem]:
    """All declared items with their scope-qualified paths."""
    scopes: list[tuple[int, int, str, bool]] = []
    for m in _SCOPE_RE.finditer(text):
        open_idx = text.find("{", m.start())
        close_idx = _matching_brace(text, open_idx)
        segment = m.group("mod") or m.group("impl")
        scopes.append((open_idx, close_idx, segment, m.group("impl") is not None))
    items: list[SourceItem] = []
    for m in _ITEM_RE.finditer(text):
        start = m.start()
        enclosing = [s for s in scopes if s[0] < start < s[1]]
        enclosing.sort(key=lambda s: s[0])
        keyword = m.group("kw")
        name = m.group("name")
        semi = text.find(";", m.end())
        brace = text.find("{", m.end())
        if brace != -1 and (semi == -1 or brace < semi):
            close = _matching_brace(text, brace)
            header = text[start:brace]
            body = text[brace + 1 : close]
        else:
            end = semi if semi != -1 else len(text)
            header = text[start:end]
            body = ""
        if keyword == "fn":
            in_impl = any(s[3] for s in enclosing)
            kind = ItemKind.METHOD if in_impl else ItemKind.FUNCTION
        else:
            kind = _KIND_BY_KEYWORD[keyword]
        items.append(
            SourceItem(
                path=tuple(s[2] for s in enclosing) + (name,),
                item_kind=kind,
                header=header,
                body=body,
                attributes=_attribute_block(text, start),
            )
        )
    return items


def normalize_header(header: str) -> str:
    return " ".join(header.split())


def body_hash(body: str) -> str:
    """Hash of the body's token stream, blind to whitespace layout."""
    tokens = re.findall(r"[A-Za-z0-9_]+|[^\sA-Za-z0-9_]", body)
    joined = " ".join(tokens)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()[:16]


def replacement_hint_from_note(note: str) -> str | None:
    m = _BACKTICK_PATH_RE.search(note)
    if m:
        return m.group(1)
    m = _USE_PHRASE_RE.search(note)
    if m:
        return m.group(1)
    return None


def scan_attributes(
    source_text: str,
    version: VersionId,
    *,
    crate_name: str = "std",
) -> list[SourceSignal]:
    """Stability and deprecation candidates declared by attributes.

    A stability attribute counts only when its since-version equals the
    scanned release (older attributes are settled history). Deprecation
    attributes carry their own since-version when one parses, so the fuser
    can window them.
    """
    signals: list[SourceSignal] = []
    for item in scan_items(source_text):
        api = ApiIdentity(crate_name, item.path, item.item_kind)
        for attr in item.attributes:
            stable = _STABLE_ATTR_RE.search(attr)
            if stable:
                since = _SINCE_RE.search(stable.group(1))
                if since and since.group(1) == str(version):
                    signals.append(
                        SourceSignal(api, ChangeKind.STABILIZATION, version)
                    )
                continue
            deprecated = _DEPRECATED_ATTR_RE.search(attr)
            if deprecated:
                args = deprecated.group(1) or ""
                since = _SINCE_RE.search(args)
                note = _NOTE_RE.search(args)
                try:
                    dep_version = parse_version(since.group(1)) if since else version
                except Exception:
                    dep_version = version
                signals.append(
                    SourceSignal(
                        api,
                        ChangeKind.DEPRECATION,
                        dep_version,
                        replacement_hint=replacement_hint_from_note(note.group(1)) if note else None,
                    )
                )
    signals.sort(key=lambda s: (s.api.crate_name, s.api.canonical_path))
    return signals


def diff_item_bodies(
    old_source: str,
    new_source: str,
    version: VersionId,
    *,
    crate_name: str = "std",
) -> list[SourceSignal]:
    """Behavioral candidates: same header, different body token stream.

    An item whose header changed is never reported here; that is the doc
    differ's signature territory.
    """
    old_items = {item.path: item for item in scan_items(old_source)}
    new_items = {item.path: item for item in scan_items(new_source)}
    if not old_items or not new_items:
        raise ParseFailure("a source snapshot yielded zero items")
    signals: list[SourceSignal] = []
    for path in sorted(old_items.keys() & new_items.keys()):
        old_item = old_items[path]
        new_item = new_items[path]
        if normalize_header(old_item.header) != normalize_header(new_item.header):
            continue
        old_hash = body_hash(old_item.body)
        new_hash = body_hash(new_item.body)
        if old_hash == new_hash:
            continue
        signals.append(
            SourceSignal(
                ApiIdentity(crate_name, path, new_item.item_kind),
                ChangeKind.BEHAVIORAL_CHANGE,
                version,
                body_hash_old=old_hash,
                body_hash_new=new_hash,
            )
        )
    return signals
