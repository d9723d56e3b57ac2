"""Candidate scoring and the three aggregate metrics.

A sample's correctness folds the static API check into it: full pass means
the candidate compiled, satisfied the required/forbidden path constraints,
and ran every case green. That makes Pass@1 <= API usage accuracy a
theorem rather than an observation, and the property suite leans on it.
"""

from __future__ import annotations

from datetime import date
from typing import Mapping, Sequence

from .errors import EmptyDataset, InsufficientSamples, UnknownVersionDate
from .model import (
    ChangeKind,
    Condition,
    EvalOutcome,
    KindBreakdown,
    MetricReport,
    TaskSpec,
    VersionId,
)
from .sandbox import splice_solution
from .static_checks import static_check


def run_sample(
    task: TaskSpec,
    candidate_code: str,
    sandbox=None,
    *,
    model_id: str,
    condition: Condition,
    sample_index: int = 0,
) -> EvalOutcome:
    """Score one candidate against one task.

    Without a sandbox only the static half runs: the outcome records no
    compile and zero passed cases, which downstream metrics treat honestly
    (dynamic components go to zero, static components stay meaningful).
    """
    static_ok = static_check(candidate_code, task.test_program)
    total = len(task.test_cases)
    if sandbox is None:
        return EvalOutcome(
            task.task_id, model_id, condition, sample_index,
            False, static_ok, 0, total,
        )
    spliced = splice_solution(task.test_program, candidate_code)
    result = sandbox.compile_and_run(spliced, task.target_version, total)
    passed = result.cases_passed if result.compiled else 0
    return EvalOutcome(
        task.task_id, model_id, condition, sample_index,
        result.compiled, static_ok, passed, total,
    )


def is_full_pass(outcome: EvalOutcome) -> bool:
    return (
        outcome.compiled
        and outcome.static_check_passed
        and outcome.cases_passed == outcome.cases_total
    )


def _grouped(outcomes: Sequence[EvalOutcome]) -> dict[str, list[EvalOutcome]]:
    groups: dict[str, list[EvalOutcome]] = {}
    for outcome in outcomes:
        groups.setdefault(outcome.task_id, []).append(outcome)
    for samples in groups.values():
        samples.sort(key=lambda o: o.sample_index)
    return groups


def pass_at_k(outcomes: Sequence[EvalOutcome], k: int = 1) -> float:
    """Fraction of tasks with a full pass among their first k samples."""
    groups = _grouped(outcomes)
    if not groups:
        raise EmptyDataset("no outcomes to score")
    hits = 0
    for task_id, samples in groups.items():
        if len(samples) < k:
            raise InsufficientSamples(
                f"task {task_id} has {len(samples)} samples, k={k} needs at least {k}"
            )
        if any(is_full_pass(o) for o in samples[:k]):
            hits += 1
    return hits / len(groups)


def api_usage_accuracy(
    outcomes: Sequence[EvalOutcome],
    kinds_by_task: Mapping[str, ChangeKind] | None = None,
) -> tuple[float, dict[ChangeKind, float]]:
    """Static-check pass rate over all samples, with optional kind split."""
    if not outcomes:
        raise EmptyDataset("no outcomes to score")
    overall = sum(1 for o in outcomes if o.static_check_passed) / len(outcomes)
    by_kind: dict[ChangeKind, float] = {}
    if kinds_by_task is not None:
        for kind in ChangeKind:
            subset = [o for o in outcomes if kinds_by_task.get(o.task_id) is kind]
            if subset:
                by_kind[kind] = (
                    sum(1 for o in subset if o.static_check_passed) / len(subset)
                )
    return overall, by_kind


def test_coverage(outcomes: Sequence[EvalOutcome]) -> float:
    """Case-level pass fraction over every task's first sample."""
    firsts = [o for o in outcomes if o.sample_index == 0]
    total = sum(o.cases_total for o in firsts)
    if total == 0:
        raise ZeroDivisionError("no test cases among first samples")
    return sum(o.cases_passed for o in firsts) / total


# keep pytest from collecting the metric when imported into a test module
test_coverage.__test__ = False  # type: ignore[attr-defined]


def split_by_cutoff(
    tasks: Sequence[TaskSpec],
    version_dates: Mapping[VersionId, date],
    cutoff: date,
) -> dict[str, list[TaskSpec]]:
    """Partition tasks by their target release date against a cutoff.

    A task whose version shipped on or before the cutoff is `before`,
    strictly later is `after`; together they cover the input exactly.
    """
    before: list[TaskSpec] = []
    after: list[TaskSpec] = []
    for task in tasks:
        released = version_dates.get(task.target_version)
        if released is None:
            raise UnknownVersionDate(
                f"no release date for {task.target_version} (task {task.task_id})"
            )
        (before if released <= cutoff else after).append(task)
    return {"before": before, "after": after}


def build_report(
    tasks: Sequence[TaskSpec],
    outcomes: Sequence[EvalOutcome],
    *,
    kinds_by_task: Mapping[str, ChangeKind] | None = None,
    version_dates: Mapping[VersionId, date] | None = None,
    cutoff: date | None = None,
    ks: Sequence[int] = (1,),
) -> MetricReport:
    """All metrics over one outcome set, optionally split by kind and cutoff."""
    aua, aua_by_kind = api_usage_accuracy(outcomes, kinds_by_task)
    coverage = test_coverage(outcomes)
    by_kind: dict[ChangeKind, KindBreakdown] = {}
    for kind, kind_aua in aua_by_kind.items():
        subset = [
            o for o in outcomes
            if kinds_by_task is not None and kinds_by_task.get(o.task_id) is kind
        ]
        by_kind[kind] = KindBreakdown(
            pass_at_1=pass_at_k(subset, 1),
            aua=kind_aua,
            coverage=test_coverage(subset),
        )
    by_cutoff: dict[str, float] = {}
    if cutoff is not None:
        if version_dates is None:
            raise UnknownVersionDate("cutoff split needs a version-date table")
        halves = split_by_cutoff(tasks, version_dates, cutoff)
        for side in ("before", "after"):
            ids = {t.task_id for t in halves[side]}
            subset = [o for o in outcomes if o.task_id in ids]
            if subset:
                by_cutoff[side] = pass_at_k(subset, 1)
    return MetricReport(
        pass_at_k={k: pass_at_k(outcomes, k) for k in ks},
        aua=aua,
        coverage=coverage,
        by_kind=by_kind,
        by_cutoff=by_cutoff,
    )
