"""Fuse per-source signals into one deduplicated change catalog.

Each evidence source sees a different slice of an evolution event; the
fuser groups their signals by API, resolves disagreements by a fixed kind
precedence, and emits at most one record per API per release hop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .doc_diff import DocDiffSignal, DocTree, normalize_doc_body, normalize_signature_text
from .errors import InsufficientCandidates
from .model import (
    OFFICIAL_CRATES,
    ApiIdentity,
    ApiSignature,
    ChangeKind,
    ChangeRecord,
    Diagnostics,
    VersionId,
    parse_api_path,
)
from .release_notes import ChangelogSignal
from .source_scan import SourceSignal, replacement_hint_from_note

# When sources disagree about what happened to one API, the rarer and more
# consequential reading wins.
_KIND_PRECEDENCE = {
    ChangeKind.DEPRECATION: 4,
    ChangeKind.SIGNATURE_CHANGE: 3,
    ChangeKind.STABILIZATION: 2,
    ChangeKind.BEHAVIORAL_CHANGE: 1,
}


@dataclass
class FuseResult:
    records: list[ChangeRecord]
    low_confidence: list[ChangeRecord]
    warnings: list[str] = field(default_factory=list)


@dataclass
class _Group:
    api: ApiIdentity
    kinds: set[ChangeKind] = field(default_factory=set)
    provenance: set[str] = field(default_factory=set)
    docdiff: DocDiffSignal | None = None
    note: str | None = None
    replacement_hints: list[str] = field(default_factory=list)


def _in_window(version: VersionId, from_version: VersionId, to_version: VersionId) -> bool:
    return from_version < version <= to_version


def _resolve_replacement(hint: str, crate_name: str) -> ApiIdentity:
    segments = hint.split("::")
    if len(segments) > 1 and segments[0] in OFFICIAL_CRATES:
        return parse_api_path("::".join(segments[1:]), crate_name=segments[0])
    return parse_api_path(hint, crate_name=crate_name)


def fuse(
    changelog_signals: list[ChangelogSignal],
    docdiff_signals: list[DocDiffSignal],
    srcdiff_signals: list[SourceSignal],
    from_version: VersionId,
    to_version: VersionId,
    diagnostics: Diagnostics | None = None,
) -> FuseResult:
    """Merge three signal streams for one release hop into records.

    Provenance is the union of sources that said anything about the API.
    Behavioral findings backed only by source-body evidence land on the
    low-confidence side; stabilization claims with no signature evidence
    anywhere are dropped with a warning, since a record without the new
    signature cannot support task generation.
    """
    groups: dict[tuple[str, tuple[str, ...]], _Group] = {}

    def group_for(api: ApiIdentity) -> _Group:
        key = (api.crate_name, api.path)
        if key not in groups:
            groups[key] = _Group(api=api)
        return groups[key]

    for signal in changelog_signals:
        if not _in_window(signal.version, from_version, to_version):
            if diagnostics is not None:
                diagnostics.bump("changelog_out_of_window")
            continue
        g = group_for(signal.api)
        g.kinds.add(signal.kind_candidate)
        g.provenance.add("changelog")
        if g.note is None:
            g.note = signal.note

    for signal in docdiff_signals:
        g = group_for(signal.api)
        g.kinds.add(signal.kind_candidate)
        g.provenance.add("docdiff")
        g.docdiff = signal
        g.api = signal.api  # doc identity carries the best kind inference
        if signal.kind_candidate is ChangeKind.DEPRECATION:
            note = signal.new_item.stability.note
            if note:
                hint = replacement_hint_from_note(note)
                if hint:
                    g.replacement_hints.append(hint)

    for signal in srcdiff_signals:
        if not _in_window(signal.version, from_version, to_version):
            if diagnostics is not None:
                diagnostics.bump("srcdiff_out_of_window")
            continue
        g = group_for(signal.api)
        g.kinds.add(signal.kind_candidate)
        g.provenance.add("srcdiff")
        if signal.replacement_hint:
            g.replacement_hints.append(signal.replacement_hint)

    result = FuseResult(records=[], low_confidence=[])
    for key in sorted(groups):
        g = groups[key]
        kind = max(g.kinds, key=lambda k: _KIND_PRECEDENCE[k])

        old_signature = new_signature = None
        old_doc = new_doc = None
        if g.docdiff is not None:
            if g.docdiff.old_item is not None:
                old_signature = g.docdiff.old_item.signature
                old_doc = g.docdiff.old_item.doc_body
            new_signature = g.docdiff.new_item.signature
            new_doc = g.docdiff.new_item.doc_body

        if kind is ChangeKind.BEHAVIORAL_CHANGE:
            # The record type wants identical signatures here; tolerate doc
            # trees that only drifted in whitespace.
            if (
                old_signature is not None
                and new_signature is not None
                and old_signature.raw_text != new_signature.raw_text
            ):
                old_signature = new_signature

        replacement = None
        if kind is ChangeKind.DEPRECATION:
            distinct = sorted(set(g.replacement_hints))
            if len(distinct) == 1:
                replacement = _resolve_replacement(distinct[0], g.api.crate_name)
            elif len(distinct) > 1:
                result.warnings.append(
                    f"{g.api.canonical_path}: conflicting replacements {distinct}; leaving unset"
                )
                if diagnostics is not None:
                    diagnostics.bump("conflicting_replacement")

        if kind is ChangeKind.STABILIZATION and new_signature is None:
            result.warnings.append(
                f"{g.api.canonical_path}: stabilization without signature evidence; dropped"
            )
            if diagnostics is not None:
                diagnostics.bump("unconfirmed_stabilization")
            continue

        record = ChangeRecord.create(
            g.api,
            kind,
            to_version,
            from_version=from_version,
            old_signature=old_signature,
            new_signature=new_signature,
            old_doc=old_doc,
            new_doc=new_doc,
            changelog_note=g.note,
            replacement=replacement,
            provenance=g.provenance,
        )
        if kind is ChangeKind.BEHAVIORAL_CHANGE and g.provenance == {"srcdiff"}:
            result.low_confidence.append(record)
        else:
            result.records.append(record)

    return result


def select_stable_controls(
    catalog: list[DocTree],
    cutoff: VersionId,
    n: int,
) -> list[ApiIdentity]:
    """APIs that provably did not move across every covered release.

    A control must exist in every tree, have stabilized strictly before the
    cutoff, and show byte-stable signature and doc body (up to whitespace)
    throughout. The first n in path order are returned.
    """
    if n == 0:
        return []
    if not catalog:
        raise InsufficientCandidates("no doc trees to select controls from")
    trees = sorted(catalog, key=lambda t: t.version)
    base = trees[0]
    candidates: list[ApiIdentity] = []
    for api in sorted(base.items, key=lambda a: (a.crate_name, a.canonical_path)):
        items = [tree.items.get(api) for tree in trees]
        if any(item is None for item in items):
            continue
        stable = all(
            item.stability.state == "stable_since"
            and item.stability.since is not None
            and item.stability.since < cutoff
            for item in items
        )
        if not stable:
            continue
        sig0 = normalize_signature_text(items[0].signature.raw_text)
        body0 = normalize_doc_body(items[0].doc_body)
        if all(
            normalize_signature_text(item.signature.raw_text) == sig0
            and normalize_doc_body(item.doc_body) == body0
            for item in items[1:]
        ):
            candidates.append(api)
    if len(candidates) < n:
        raise InsufficientCandidates(
            f"wanted {n} stable controls, only {len(candidates)} qualify"
        )
    return candidates[:n]
