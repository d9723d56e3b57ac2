"""Core type behavior: versions, identities, stats arithmetic, JSONL."""

from __future__ import annotations

import json
from datetime import date

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_api, make_change, make_outcome, make_sig, make_task, make_usage
from evoforge.errors import EmptyDataset, MalformedVersion
from evoforge.model import (
    ApiIdentity,
    ApiSignature,
    ChangeKind,
    ChangeRecord,
    EvalOutcome,
    ItemKind,
    SourceClass,
    TaskSpec,
    UsageExample,
    VersionId,
    avg_cases_per_task,
    compute_change_id,
    dataset_stats,
    infer_item_kind,
    load_version_dates,
    parse_signature,
    parse_version,
    percent,
    read_jsonl,
    round_half_up,
    write_jsonl,
)


def test_parse_version_round_trips():
    v = parse_version("1.77.0")
    assert (v.major, v.minor, v.patch) == (1, 77, 0)
    assert str(v) == "1.77.0"


@pytest.mark.parametrize("bad", ["1.84", "1", "", "1.2.3.4", "v1.2.3", "1.2.x", "1..3"])
def test_parse_version_rejects_non_triples(bad):
    with pytest.raises(MalformedVersion):
        parse_version(bad)


def test_version_ordering_is_lexicographic():
    assert parse_version("1.9.0") < parse_version("1.77.0")
    assert parse_version("1.77.0") < parse_version("1.77.1")
    assert parse_version("1.77.1") < parse_version("2.0.0")


@given(st.tuples(st.integers(0, 99), st.integers(0, 999), st.integers(0, 999)))
def test_version_format_parse_identity(parts):
    v = VersionId(*parts)
    assert parse_version(str(v)) == v


def test_item_kind_inference_from_path_shape():
    assert infer_item_kind(("slice", "first_chunk_mut")) is ItemKind.METHOD
    assert infer_item_kind(("BTreeMap", "entry")) is ItemKind.METHOD
    assert infer_item_kind(("mem", "take")) is ItemKind.FUNCTION
    assert infer_item_kind(("lone_fn",)) is ItemKind.FUNCTION


def test_canonical_path_joins_segments():
    api = make_api("slice::first_chunk_mut")
    assert api.canonical_path == "slice::first_chunk_mut"
    assert api.final_segment == "first_chunk_mut"


def test_source_class_follows_crate():
    official = make_change(crate="std")
    third = make_change(crate="serde_like", path="de::from_reader")
    assert official.source_class is SourceClass.OFFICIAL
    assert third.source_class is SourceClass.THIRD_PARTY


def test_signature_decomposition():
    sig = parse_signature(
        "fn first_chunk_mut<const N: usize>(&mut self) -> Option<&mut [T; N]>"
    )
    assert sig.param_count == 1
    assert sig.param_types == ("&mut self",)
    assert sig.return_type == "Option<&mut [T; N]>"


def test_signature_param_count_matches_types():
    sig = parse_signature("fn merge(a: &str, b: Vec<(u8, u8)>, n: usize) -> String")
    assert sig.param_count == 3
    assert sig.param_types[1] == "Vec<(u8, u8)>"
    with pytest.raises(ValueError):
        ApiSignature("fn x()", 2, ("i64",), None)


# ---------------------------------------------------------------------------
# change_id


def test_change_id_is_16_lower_hex():
    record = make_change()
    assert len(record.change_id) == 16
    assert all(c in "0123456789abcdef" for c in record.change_id)


def test_change_id_ignores_provenance_order():
    a = make_change(provenance=("changelog", "docdiff"))
    b = make_change(provenance=("docdiff", "changelog"))
    assert a.change_id == b.change_id


def test_change_id_distinguishes_kind_and_versions():
    base = make_change(kind=ChangeKind.STABILIZATION)
    other_kind = make_change(kind=ChangeKind.BEHAVIORAL_CHANGE)
    other_version = make_change(to_version="1.78.0")
    assert base.change_id != other_kind.change_id
    assert base.change_id != other_version.change_id


# ---------------------------------------------------------------------------
# record invariants


def test_stabilization_requires_new_signature():
    with pytest.raises(ValueError):
        make_change(kind=ChangeKind.STABILIZATION, new_sig=None)


def test_signature_change_requires_differing_raw_text():
    ok = make_change(
        kind=ChangeKind.SIGNATURE_CHANGE,
        old_sig="fn frob_runs(x: i64) -> i64",
        new_sig="fn frob_runs(x: i64, scale: i64) -> i64",
    )
    assert ok.kind is ChangeKind.SIGNATURE_CHANGE
    with pytest.raises(ValueError):
        make_change(
            kind=ChangeKind.SIGNATURE_CHANGE,
            old_sig="fn frob_runs(x: i64) -> i64",
            new_sig="fn frob_runs(x: i64) -> i64",
        )


def test_behavioral_change_keeps_signatures_identical():
    with pytest.raises(ValueError):
        make_change(
            kind=ChangeKind.BEHAVIORAL_CHANGE,
            old_sig="fn frob_runs(x: i64) -> i64",
            new_sig="fn frob_runs(x: u64) -> u64",
        )


def test_replacement_only_on_deprecations():
    dep = make_change(kind=ChangeKind.DEPRECATION, replacement="alpha::weave_links")
    assert dep.replacement is not None
    with pytest.raises(ValueError):
        make_change(kind=ChangeKind.STABILIZATION, replacement="alpha::weave_links")


def test_provenance_must_be_known_and_non_empty():
    with pytest.raises(ValueError):
        make_change(provenance=())
    with pytest.raises(ValueError):
        make_change(provenance=("hearsay",))


def test_outcome_that_did_not_compile_passes_nothing():
    with pytest.raises(ValueError):
        make_outcome(compiled=False, passed=1)
    ok = make_outcome(compiled=False, passed=0)
    assert ok.cases_passed == 0


def test_usage_snippet_must_mention_final_segment():
    with pytest.raises(ValueError):
        make_usage(snippet="let y = unrelated(3);")


def test_task_needs_at_least_one_case():
    with pytest.raises(ValueError):
        make_task(n_cases=0)


# ---------------------------------------------------------------------------
# rounding and dataset statistics


def test_round_half_up_breaks_ties_upward():
    assert round_half_up(0.25, 1) == 0.3
    assert round_half_up(4.375, 2) == 4.38
    assert round_half_up(31.25, 1) == 31.3


def test_percent_of_zero_whole_is_zero():
    assert percent(5, 0) == 0.0


def test_dataset_stats_matches_published_composition():
    # 184 + 185 + 195 + 24 = 588 records, 380 official / 208 third-party.
    records = (
        [make_change(path=f"s::stab_{i}", kind=ChangeKind.STABILIZATION) for i in range(184)]
        + [
            make_change(
                path=f"s::sig_{i}",
                kind=ChangeKind.SIGNATURE_CHANGE,
                old_sig="fn f(x: i64) -> i64",
                new_sig="fn f(x: i64, y: i64) -> i64",
            )
            for i in range(185)
        ]
        + [make_change(path=f"s::beh_{i}", kind=ChangeKind.BEHAVIORAL_CHANGE, new_sig=None) for i in range(195)]
        + [make_change(path=f"s::dep_{i}", kind=ChangeKind.DEPRECATION, new_sig=None) for i in range(24)]
    )
    # Flip 208 of them to a third-party crate, keeping kind counts intact.
    relabeled = []
    flipped = 0
    for record in records:
        if flipped < 208:
            relabeled.append(
                make_change(
                    path=record.api.canonical_path,
                    crate="chrono_like",
                    kind=record.kind,
                    old_sig=record.old_signature.raw_text if record.old_signature else None,
                    new_sig=record.new_signature.raw_text if record.new_signature else None,
                )
            )
            flipped += 1
        else:
            relabeled.append(record)
    stats = dataset_stats(relabeled)

    assert stats.total == 588
    assert stats.kind_counts[ChangeKind.STABILIZATION] == 184
    assert stats.kind_percents[ChangeKind.STABILIZATION] == 31.3
    assert stats.kind_percents[ChangeKind.SIGNATURE_CHANGE] == 31.5
    assert stats.kind_percents[ChangeKind.BEHAVIORAL_CHANGE] == 33.2
    assert stats.kind_percents[ChangeKind.DEPRECATION] == 4.1
    assert stats.source_counts[SourceClass.OFFICIAL] == 380
    assert stats.source_percents[SourceClass.OFFICIAL] == 64.6
    assert stats.source_percents[SourceClass.THIRD_PARTY] == 35.4
    assert sum(stats.kind_percents.values()) == pytest.approx(100.0, abs=0.2)
    assert sum(stats.source_percents.values()) == pytest.approx(100.0, abs=0.2)


def test_dataset_stats_on_empty_catalog_is_all_zeros():
    stats = dataset_stats([])
    assert stats.total == 0
    assert all(v == 0 for v in stats.kind_counts.values())
    assert all(v == 0.0 for v in stats.kind_percents.values())


def test_avg_cases_per_task_matches_published_mean():
    # 588 tasks spreading 2574 cases: 222 tasks with 5 cases, 366 with 4.
    tasks = [make_task(task_id=f"t-{i}", n_cases=5 if i < 222 else 4) for i in range(588)]
    assert sum(len(t.test_cases) for t in tasks) == 2574
    assert avg_cases_per_task(tasks) == 4.38


def test_avg_cases_per_task_rejects_empty_input():
    with pytest.raises(EmptyDataset):
        avg_cases_per_task([])


# ---------------------------------------------------------------------------
# JSONL round trips


def _change_records() -> st.SearchStrategy[ChangeRecord]:
    segment = st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True)

    @st.composite
    def record(draw):
        kind = draw(st.sampled_from(list(ChangeKind)))
        path = "::".join(draw(st.lists(segment, min_size=1, max_size=3)))
        crate = draw(st.sampled_from(["std", "core", "rand_like"]))
        old_raw = "fn f(a: i64) -> i64"
        new_raw = "fn f(a: i64, b: i64) -> i64"
        old_sig = new_sig = None
        if kind is ChangeKind.STABILIZATION:
            new_sig = old_raw
        elif kind is ChangeKind.SIGNATURE_CHANGE:
            old_sig, new_sig = old_raw, new_raw
        elif kind is ChangeKind.BEHAVIORAL_CHANGE and draw(st.booleans()):
            old_sig = new_sig = old_raw
        replacement = None
        if kind is ChangeKind.DEPRECATION and draw(st.booleans()):
            replacement = "swap::target_fn"
        provenance = draw(
            st.sets(st.sampled_from(["changelog", "docdiff", "srcdiff"]), min_size=1)
        )
        return make_change(
            path=path,
            crate=crate,
            kind=kind,
            from_version=draw(st.sampled_from([None, "1.76.0"])),
            old_sig=old_sig,
            new_sig=new_sig,
            old_doc=draw(st.none() | st.text(max_size=40)),
            new_doc=draw(st.none() | st.text(max_size=40)),
            note=draw(st.none() | st.text(max_size=40)),
            replacement=replacement,
            provenance=tuple(provenance),
        )

    return record()


@given(_change_records())
def test_change_record_round_trips_field_for_field(record):
    assert ChangeRecord.from_json_dict(record.to_json_dict()) == record


@given(st.integers(1, 6), st.integers(0, 3))
def test_task_and_outcome_round_trip(n_cases, sample_index):
    task = make_task(n_cases=n_cases)
    assert TaskSpec.from_json_dict(task.to_json_dict()) == task
    outcome = make_outcome(sample_index=sample_index, passed=2, total=4)
    assert EvalOutcome.from_json_dict(outcome.to_json_dict()) == outcome


def test_usage_example_round_trips():
    usage = make_usage()
    assert UsageExample.from_json_dict(usage.to_json_dict()) == usage


def test_jsonl_files_are_stable_and_typed(tmp_path):
    records = [make_change(path=f"m::fn_{i}") for i in range(3)]
    out = tmp_path / "changes.jsonl"
    assert write_jsonl(out, records) == 3
    back = list(read_jsonl(out, ChangeRecord))
    assert back == records
    # One compact JSON object per line, snake_case keys.
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert set(first) >= {"change_id", "api", "kind", "to_version", "provenance"}


# ---------------------------------------------------------------------------
# release-date table


def test_version_date_table_covers_subject_range():
    table = load_version_dates()
    assert table[parse_version("1.71.0")] == date(2023, 7, 13)
    assert table[parse_version("1.77.0")] == date(2024, 3, 21)
    assert table[parse_version("1.84.0")] == date(2025, 1, 9)
    assert len(table) == 14


def test_version_dates_strictly_increase():
    table = load_version_dates()
    ordered = sorted(table)
    dates = [table[v] for v in ordered]
    assert dates == sorted(dates)
    assert len(set(dates)) == len(dates)
