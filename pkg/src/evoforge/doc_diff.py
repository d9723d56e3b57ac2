"""Parse per-release documentation trees and diff adjacent releases.

The fixture dialect is deliberately tiny: one HTML file per item under
<root>/<crate>/<path__with__double_underscores>.html, carrying a title, one
signature block, one stability banner, and an optional doc block. Identity
comes from the file path, not the markup.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path

from .errors import EmptyTree, MalformedDocFile, MalformedVersion, VersionOrderError
from .model import (
    ApiIdentity,
    ApiSignature,
    ChangeKind,
    Diagnostics,
    VersionId,
    infer_item_kind,
    parse_signature,
    parse_version,
)

_STABLE_RE = re.compile(r"^stable since (\S+)$")
_DEPRECATED_RE = re.compile(r"^deprecated since (\S+?)(?::\s*(.*))?$")
_BANNER_LINE_RE = re.compile(r"^\s*(stable since|deprecated since|unstable)\b.*$")


@dataclass(frozen=True, slots=True)
class Stability:
    """Stability banner state: stable_since, unstable, or deprecated_since."""

    state: str
    since: VersionId | None = None
    note: str | None = None

    @classmethod
    def stable_since(cls, version: VersionId) -> "Stability":
        return cls("stable_since", since=version)

    @classmethod
    def unstable(cls) -> "Stability":
        return cls("unstable")

    @classmethod
    def deprecated_since(cls, version: VersionId, note: str | None = None) -> "Stability":
        return cls("deprecated_since", since=version, note=note)


def parse_stability(banner: str) -> Stability:
    text = " ".join(banner.split())
    if text == "unstable":
        return Stability.unstable()
    m = _STABLE_RE.match(text)
    if m:
        try:
            return Stability.stable_since(parse_version(m.group(1)))
        except MalformedVersion as exc:
            raise MalformedDocFile(f"bad stability version: {text!r}") from exc
    m = _DEPRECATED_RE.match(text)
    if m:
        try:
            since = parse_version(m.group(1))
        except MalformedVersion as exc:
            raise MalformedDocFile(f"bad stability version: {text!r}") from exc
        return Stability.deprecated_since(since, m.group(2) or None)
    raise MalformedDocFile(f"unrecognized stability banner: {text!r}")


@dataclass(frozen=True, slots=True)
class DocItem:
    api: ApiIdentity
    signature: ApiSignature
    doc_body: str
    stability: Stability


@dataclass(frozen=True)
class DocTree:
    """All documented items of one release, keyed by identity."""

    version: VersionId
    items: dict[ApiIdentity, DocItem]


@dataclass(frozen=True, slots=True)
class DocDiffSignal:
    """One kind candidate produced by diffing two documentation trees."""

    api: ApiIdentity
    kind_candidate: ChangeKind
    old_item: DocItem | None
    new_item: DocItem


class _DocPageParser(HTMLParser):
    """Collect the three content regions of one fixture page."""

    _CAPTURE = {
        ("pre", "signature"): "signature",
        ("div", "stability"): "stability",
        ("div", "docblock"): "doc_body",
    }

    def __init__(self) -> None:
        super().__init__()
        self.regions: dict[str, list[str]] = {}
        self._active: str | None = None
        self._active_tag: str | None = None

    def handle_starttag(self, tag, attrs):
        css = dict(attrs).get("class", "")
        region = self._CAPTURE.get((tag, css))
        if region is not None:
            self._active = region
            self._active_tag = tag
            self.regions.setdefault(region, [])

    def handle_endtag(self, tag):
        if self._active is not None and tag == self._active_tag:
            self._active = None
            self._active_tag = None

    def handle_data(self, data):
        if self._active is not None:
            self.regions[self._active].append(data)

    def region_text(self, name: str) -> str | None:
        parts = self.regions.get(name)
        if parts is None:
            return None
        return "".join(parts).strip()


def parse_doc_file(path: Path, crate: str) -> DocItem:
    """Parse one fixture page; identity comes from the file name."""
    segments = tuple(path.stem.split("__"))
    if not segments or any(not s for s in segments):
        raise MalformedDocFile(f"bad item file name: {path.name}")
    parser = _DocPageParser()
    parser.feed(path.read_text(encoding="utf-8"))
    signature_text = parser.region_text("signature")
    stability_text = parser.region_text("stability")
    if not signature_text:
        raise MalformedDocFile(f"{path.name}: missing signature block")
    if not stability_text:
        raise MalformedDocFile(f"{path.name}: missing stability banner")
    return DocItem(
        api=ApiIdentity(crate, segments, infer_item_kind(segments)),
        signature=parse_signature(signature_text),
        doc_body=parser.region_text("doc_body") or "",
        stability=parse_stability(stability_text),
    )


def parse_doc_tree(
    root_dir: Path | str,
    version: VersionId,
    diagnostics: Diagnostics | None = None,
) -> DocTree:
    """Parse every crate page under one release's doc root.

    Malformed pages are skipped and tallied; a tree with zero parseable
    items is an error.
    """
    root = Path(root_dir)
    items: dict[ApiIdentity, DocItem] = {}
    for page in sorted(root.glob("*/*.html")):
        crate = page.parent.name
        try:
            item = parse_doc_file(page, crate)
        except MalformedDocFile:
            if diagnostics is not None:
                diagnostics.bump("malformed_doc_file")
            continue
        items[item.api] = item
    if not items:
        raise EmptyTree(f"no parseable doc items under {root}")
    return DocTree(version, items)


def normalize_signature_text(raw: str) -> str:
    return " ".join(raw.split())


def normalize_doc_body(text: str) -> str:
    """Collapse whitespace and drop stability-banner echoes before comparing."""
    kept = [
        line for line in text.splitlines() if not _BANNER_LINE_RE.match(line)
    ]
    return " ".join(" ".join(kept).split())


def _newly_deprecated(old: DocItem, new: DocItem) -> bool:
    return (
        new.stability.state == "deprecated_since"
        and old.stability.state != "deprecated_since"
    )


def _newly_stabilized(old: DocItem, new: DocItem) -> bool:
    return (
        old.stability.state == "unstable"
        and new.stability.state == "stable_since"
    )


def diff_doc_trees(old: DocTree, new: DocTree) -> list[DocDiffSignal]:
    """Kind candidates for every item that changed between two releases.

    At most one candidate per item, decided in priority order: deprecation,
    stabilization, signature inequality, doc-body inequality. Signature and
    behavioral candidates are therefore mutually exclusive by construction.
    Items present only in the new tree count as stabilizations when their
    banner says they stabilized in exactly the new release.
    """
    if not old.version < new.version:
        raise VersionOrderError(
            f"doc trees out of order: {old.version} !< {new.version}"
        )
    signals: list[DocDiffSignal] = []
    every_api = set(old.items) | set(new.items)
    for api in sorted(every_api, key=lambda a: (a.crate_name, a.canonical_path)):
        new_item = new.items.get(api)
        if new_item is None:
            continue
        old_item = old.items.get(api)
        if old_item is None:
            st = new_item.stability
            if st.state == "stable_since" and st.since == new.version:
                signals.append(
                    DocDiffSignal(api, ChangeKind.STABILIZATION, None, new_item)
                )
            continue
        if _newly_deprecated(old_item, new_item):
            kind = ChangeKind.DEPRECATION
        elif _newly_stabilized(old_item, new_item):
            kind = ChangeKind.STABILIZATION
        elif normalize_signature_text(old_item.signature.raw_text) != normalize_signature_text(
            new_item.signature.raw_text
        ):
            kind = ChangeKind.SIGNATURE_CHANGE
        elif normalize_doc_body(old_item.doc_body) != normalize_doc_body(new_item.doc_body):
            kind = ChangeKind.BEHAVIORAL_CHANGE
        else:
            continue
        signals.append(DocDiffSignal(api, kind, old_item, new_item))
    return signals
