import shutil
from datetime import date

import pytest
from hypothesis import given, strategies as st

from evoforge.clients import MockModelClient
from evoforge.errors import EmptyDataset, InsufficientSamples, UnknownVersionDate
from evoforge.evaluation import (
    api_usage_accuracy,
    build_report,
    is_full_pass,
    pass_at_k,
    run_sample,
    split_by_cutoff,
    test_coverage,
)
from evoforge.generation import generate_task
from evoforge.model import ChangeKind, Condition, load_version_dates, percent
from evoforge.sandbox import ToolchainSandbox
from evoforge.synthetic import StubSandbox

from conftest import make_change, make_outcome, make_task

needs_rustc = pytest.mark.skipif(
    shutil.which("rustc") is None, reason="no rustc on PATH"
)


def mock_task(path="alpha::frob_runs"):
    task = generate_task(make_change(path=path), (), MockModelClient())
    assert task is not None
    return task


def test_run_sample_without_sandbox_is_static_only():
    task = mock_task()
    outcome = run_sample(
        task, task.reference_solution, None,
        model_id="mock", condition=Condition.NO_INFO,
    )
    assert outcome.static_check_passed
    assert not outcome.compiled
    assert outcome.cases_passed == 0
    assert outcome.cases_total == len(task.test_cases)

    stray = run_sample(
        task, "pub fn solve(x: i64) -> i64 { x }", None,
        model_id="mock", condition=Condition.NO_INFO,
    )
    assert not stray.static_check_passed


def test_run_sample_with_stub_sandbox_full_pass():
    task = mock_task()
    outcome = run_sample(
        task, task.reference_solution, StubSandbox(),
        model_id="mock", condition=Condition.ORACLE_INFO,
    )
    assert is_full_pass(outcome)


@needs_rustc
def test_run_sample_real_toolchain_self_consistency():
    task = mock_task()
    sandbox = ToolchainSandbox.locate()
    outcome = run_sample(
        task, task.reference_solution, sandbox,
        model_id="mock", condition=Condition.NO_INFO,
    )
    assert is_full_pass(outcome)
    # a wrong-constant candidate compiles but fails every case
    wrong = task.reference_solution.replace("wrapping_add", "wrapping_sub")
    bad = run_sample(
        task, wrong, sandbox, model_id="mock", condition=Condition.NO_INFO,
    )
    assert bad.compiled and bad.static_check_passed
    assert bad.cases_passed == 0


def _outcome_set(task_flags):
    outcomes = []
    for i, full in enumerate(task_flags):
        outcomes.append(make_outcome(
            task_id=f"t{i:03d}",
            compiled=True, static_ok=True,
            passed=4 if full else 2, total=4,
        ))
    return outcomes


def test_pass_at_1_fraction():
    outcomes = _outcome_set([True] * 6 + [False] * 4)
    assert pass_at_k(outcomes, 1) == 0.6


def test_pass_at_k_rescues_later_samples():
    samples = [
        make_outcome(task_id="t0", sample_index=0, passed=1, total=4),
        make_outcome(task_id="t0", sample_index=1, passed=4, total=4),
        make_outcome(task_id="t0", sample_index=2, passed=0, total=4),
    ]
    assert pass_at_k(samples, 3) == 1.0
    assert pass_at_k(samples, 1) == 0.0


def test_pass_at_k_is_monotone_in_k():
    samples = []
    for t in range(8):
        for s in range(3):
            samples.append(make_outcome(
                task_id=f"t{t}", sample_index=s,
                passed=4 if (t + s) % 3 == 0 else 1, total=4,
            ))
    values = [pass_at_k(samples, k) for k in (1, 2, 3)]
    assert values == sorted(values)


def test_pass_at_k_demands_enough_samples():
    with pytest.raises(InsufficientSamples):
        pass_at_k([make_outcome(task_id="t0")], 2)
    with pytest.raises(EmptyDataset):
        pass_at_k([], 1)


def test_paper_scale_pass_rate_arithmetic():
    outcomes = _outcome_set([True] * 384 + [False] * 204)
    assert len(outcomes) == 588
    assert percent(384, 588) == 65.3
    assert round(pass_at_k(outcomes, 1) * 588) == 384


def test_aua_counts_static_only():
    outcomes = [
        make_outcome(task_id="t0", static_ok=True),
        make_outcome(task_id="t1", static_ok=True),
        make_outcome(task_id="t2", static_ok=True, compiled=False, passed=0),
        make_outcome(task_id="t3", static_ok=False),
    ]
    overall, by_kind = api_usage_accuracy(outcomes)
    assert overall == 0.75
    assert by_kind == {}


def test_aua_kind_breakdown():
    outcomes = [
        make_outcome(task_id="t0", static_ok=True),
        make_outcome(task_id="t1", static_ok=False),
        make_outcome(task_id="t2", static_ok=True),
    ]
    kinds = {
        "t0": ChangeKind.STABILIZATION,
        "t1": ChangeKind.STABILIZATION,
        "t2": ChangeKind.DEPRECATION,
    }
    overall, by_kind = api_usage_accuracy(outcomes, kinds)
    assert overall == pytest.approx(2 / 3)
    assert by_kind[ChangeKind.STABILIZATION] == 0.5
    assert by_kind[ChangeKind.DEPRECATION] == 1.0


def test_coverage_over_first_samples():
    outcomes = [
        make_outcome(task_id="t0", passed=3, total=4),
        make_outcome(task_id="t1", passed=4, total=4),
        make_outcome(task_id="t1", sample_index=1, passed=0, total=4),
    ]
    assert test_coverage(outcomes) == 7 / 8


def test_coverage_raises_without_cases():
    with pytest.raises(ZeroDivisionError):
        test_coverage([make_outcome(task_id="t0", passed=0, total=0)])


def test_cutoff_partition_on_shipped_table():
    dates = load_version_dates()
    cutoff = date(2024, 7, 1)
    tasks = [
        make_task(task_id="a-00", target="1.77.0"),
        make_task(task_id="b-00", target="1.71.0"),
        make_task(task_id="c-00", target="1.82.0"),
        make_task(task_id="d-00", target="1.84.0"),
    ]
    halves = split_by_cutoff(tasks, dates, cutoff)
    assert {t.task_id for t in halves["before"]} == {"a-00", "b-00"}
    assert {t.task_id for t in halves["after"]} == {"c-00", "d-00"}

    far_future = split_by_cutoff(tasks, dates, date(2030, 1, 1))
    assert far_future["after"] == []
    assert len(far_future["before"]) == 4

    with pytest.raises(UnknownVersionDate):
        split_by_cutoff([make_task(task_id="e-00", target="9.9.9")], dates, cutoff)


@given(st.lists(
    st.tuples(st.booleans(), st.booleans(), st.integers(0, 4)),
    min_size=1, max_size=30,
))
def test_pass1_never_exceeds_aua(flags):
    outcomes = []
    for i, (compiled, static_ok, passed) in enumerate(flags):
        outcomes.append(make_outcome(
            task_id=f"t{i:03d}", compiled=compiled, static_ok=static_ok,
            passed=passed if compiled else 0, total=4,
        ))
    overall, _ = api_usage_accuracy(outcomes)
    assert pass_at_k(outcomes, 1) <= overall


def test_build_report_shape():
    outcomes = [
        make_outcome(task_id="a-00"),
        make_outcome(task_id="b-00", static_ok=False, passed=2),
        make_outcome(task_id="c-00"),
        make_outcome(task_id="d-00", compiled=False, passed=0),
    ]
    tasks = [
        make_task(task_id="a-00", target="1.77.0"),
        make_task(task_id="b-00", target="1.71.0"),
        make_task(task_id="c-00", target="1.82.0"),
        make_task(task_id="d-00", target="1.84.0"),
    ]
    kinds = {
        "a-00": ChangeKind.STABILIZATION,
        "b-00": ChangeKind.SIGNATURE_CHANGE,
        "c-00": ChangeKind.BEHAVIORAL_CHANGE,
        "d-00": ChangeKind.DEPRECATION,
    }
    report = build_report(
        tasks, outcomes, kinds_by_task=kinds,
        version_dates=load_version_dates(), cutoff=date(2024, 7, 1),
    )
    assert report.pass_at_k[1] == 0.5
    assert report.aua == 0.75
    assert report.coverage == (4 + 2 + 4 + 0) / 16
    assert set(report.by_kind) == set(ChangeKind)
    assert report.by_cutoff["before"] == 0.5
    assert report.by_cutoff["after"] == 0.5
    payload = report.to_json_dict()
    assert payload["pass_at_k"] == {"1": 0.5}