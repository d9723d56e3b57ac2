"""Shared builders for the test suite.

Each helper fills in sane defaults so a test only spells out the fields it
actually cares about.
"""

from __future__ import annotations

from datetime import date

import pytest

from evoforge.doc_diff import DocDiffSignal, DocItem, DocTree, Stability
from evoforge.model import (
    ApiIdentity,
    ApiSignature,
    ChangeKind,
    ChangeRecord,
    Condition,
    EvalOutcome,
    ItemKind,
    TaskSpec,
    UsageExample,
    VerificationTier,
    VersionId,
    parse_signature,
    parse_version,
)


def make_api(path: str = "alpha::frob_runs", *, crate: str = "std",
             kind: ItemKind | None = None) -> ApiIdentity:
    segments = tuple(path.split("::"))
    if kind is None:
        kind = ItemKind.FUNCTION
    return ApiIdentity(crate, segments, kind)


def make_sig(raw: str = "fn frob_runs(x: i64) -> i64") -> ApiSignature:
    return parse_signature(raw)


def make_change(
    *,
    path: str = "alpha::frob_runs",
    crate: str = "std",
    kind: ChangeKind = ChangeKind.STABILIZATION,
    from_version: str | None = "1.76.0",
    to_version: str = "1.77.0",
    old_sig: str | None = None,
    new_sig: str | None = "fn frob_runs(x: i64) -> i64",
    old_doc: str | None = None,
    new_doc: str | None = "Doubles and offsets the input.",
    note: str | None = None,
    replacement: str | None = None,
    provenance: tuple[str, ...] = ("docdiff",),
) -> ChangeRecord:
    def _v(text: str | None) -> VersionId | None:
        if text is None:
            return None
        major, minor, patch = (int(p) for p in text.split("."))
        return VersionId(major, minor, patch)

    return ChangeRecord.create(
        make_api(path, crate=crate),
        kind,
        _v(to_version),
        from_version=_v(from_version),
        old_signature=make_sig(old_sig) if old_sig else None,
        new_signature=make_sig(new_sig) if new_sig else None,
        old_doc=old_doc,
        new_doc=new_doc,
        changelog_note=note,
        replacement=make_api(replacement, crate=crate) if replacement else None,
        provenance=provenance,
    )


def make_task(
    *,
    task_id: str = "abc123-00",
    change_id: str = "abc123",
    n_cases: int = 4,
    target: str = "1.77.0",
    query: str = "Write a routine that doubles a reading and adds a fixed offset.",
    solution: str = "pub fn frob_runs(x: i64) -> i64 { x * 2 }",
) -> TaskSpec:
    major, minor, patch = (int(p) for p in target.split("."))
    cases = tuple(f"assert_eq!(frob_runs({i}), {i * 2});" for i in range(n_cases))
    program = "// EVO-CHECK require=alpha::frob_runs forbid=\n// SOLUTION-UNDER-TEST\nfn main() {}\n"
    return TaskSpec(
        task_id, change_id, query,
        "fn frob_runs(x: i64) -> i64", solution, program, cases,
        VersionId(major, minor, patch),
    )


def make_outcome(
    *,
    task_id: str = "abc123-00",
    model_id: str = "mock",
    condition: Condition = Condition.NO_INFO,
    sample_index: int = 0,
    compiled: bool = True,
    static_ok: bool = True,
    passed: int = 4,
    total: int = 4,
) -> EvalOutcome:
    return EvalOutcome(
        task_id, model_id, condition, sample_index,
        compiled, static_ok, passed, total,
    )


def make_usage(
    *,
    path: str = "alpha::frob_runs",
    repo_url: str = "https://example.org/acme/widget",
    file_path: str = "src/lib.rs",
    hit_line: int = 5,
    snippet: str = "let y = frob_runs(3);",
    resolved: str = "1.77.0",
    tier: VerificationTier = VerificationTier.STATIC,
    updated_on: date = date(2024, 6, 1),
) -> UsageExample:
    major, minor, patch = (int(p) for p in resolved.split("."))
    return UsageExample.create(
        make_api(path), repo_url, file_path, hit_line, snippet,
        VersionId(major, minor, patch), tier, updated_on,
    )


def make_doc_item(
    path: str = "alpha::frob_runs",
    *,
    crate: str = "std",
    sig: str = "fn frob_runs(x: i64) -> i64",
    body: str = "Does a thing.",
    stability: Stability | None = None,
) -> DocItem:
    return DocItem(
        api=make_api(path, crate=crate),
        signature=parse_signature(sig),
        doc_body=body,
        stability=stability or Stability.stable_since(parse_version("1.50.0")),
    )


def make_doc_tree(version: str, *items: DocItem) -> DocTree:
    return DocTree(parse_version(version), {item.api: item for item in items})


def make_docdiff_signal(
    kind: ChangeKind,
    *,
    path: str = "alpha::frob_runs",
    old_item: DocItem | None = None,
    new_item: DocItem | None = None,
) -> DocDiffSignal:
    if new_item is None:
        new_item = make_doc_item(path)
    return DocDiffSignal(new_item.api, kind, old_item, new_item)


@pytest.fixture
def api():
    return make_api()
