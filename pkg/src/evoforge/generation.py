"""Four-stage task synthesis with judge-based and compile-based QC.

One change record flows query -> solution -> test program -> augmentation,
each stage a separate prompt to the model client so no stage sees another
stage's raw prompt. A finished draft faces two gates: a judge verdict with
mechanical floors checked first, and a compile gate that builds the
reference solution and runs it against its own test program. A rejected
draft gets one regeneration with the reject reason in the prompt, then the
change is skipped and tallied.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .clients import ModelClient
from .errors import BackendError, GenerationExhausted, JudgeUnparseable, ParseFailure
from .model import (
    ChangeKind,
    ChangeRecord,
    Diagnostics,
    TaskSpec,
    UsageExample,
    percent,
)
from .sandbox import SOLUTION_MARKER, splice_solution
from .static_checks import render_stanza, scan_query_for_api, token_present

STAGES = ("query", "solution", "test_program", "augment", "judge")
REJECT_REASONS = ("api_mentioned", "misaligned", "technical_error", "low_coverage")

DEFAULT_TEMPERATURE = 0.7
DEFAULT_RETRIES = 3
DEFAULT_CASE_TARGET = 4

_FN_SIG_RE = re.compile(r"(?:pub\s+)?fn\s+\w+\s*\([^)]*\)(?:\s*->\s*[^{;]+)?")


@dataclass(frozen=True, slots=True)
class PromptTemplate:
    change_kind: ChangeKind
    stage: str
    body: str

    def render(self, **bindings: str) -> str:
        try:
            return string.Template(self.body).substitute(bindings)
        except KeyError as exc:
            raise ParseFailure(
                f"unbound placeholder {exc} in {self.change_kind.value}/{self.stage} template"
            ) from exc


@lru_cache(maxsize=32)
def load_template(change_kind: ChangeKind, stage: str) -> PromptTemplate:
    if stage not in STAGES:
        raise ParseFailure(f"unknown prompt stage {stage!r}")
    body = (
        resources.files("evoforge")
        .joinpath("prompts", change_kind.value, f"{stage}.txt")
        .read_text(encoding="utf-8")
    )
    return PromptTemplate(change_kind, stage, body)


@dataclass(frozen=True, slots=True)
class SeedBundle:
    """Everything a stage prompt may reference, pre-rendered to text."""

    change: ChangeRecord
    required_path: str
    forbidden_path: str
    api_path: str
    target_version: str
    signature_old: str
    signature_new: str
    doc: str
    usage_examples: str


def prepare_seed(change: ChangeRecord, usages: Sequence[UsageExample] = ()) -> SeedBundle:
    """Structure one change and its strongest usages for prompting.

    Keeps at most three usage examples, strongest verification tier first,
    and renders distinct pre/post sections whenever the record carries an
    old signature or old doc.
    """
    if change.kind is ChangeKind.DEPRECATION:
        if change.replacement is None:
            raise ValueError("deprecation seed needs a replacement API")
        required = change.replacement.canonical_path
        forbidden = change.api.canonical_path
    else:
        required = change.api.canonical_path
        forbidden = ""

    kept = sorted(usages, key=lambda e: (-int(e.verification_tier), e.example_id))[:3]
    if kept:
        blocks = []
        for example in kept:
            indented = "\n".join("  " + line for line in example.snippet.splitlines())
            blocks.append(
                f"- {example.repo_url} {example.file_path}:{example.hit_line} "
                f"(tier {example.verification_tier.name.lower()})\n{indented}"
            )
        usage_text = "usage examples:\n" + "\n".join(blocks)
    else:
        usage_text = "usage examples: none recorded"

    doc_parts = [f"post-change: {change.new_doc}" if change.new_doc else "post-change: (none)"]
    if change.old_doc:
        doc_parts.append(f"pre-change: {change.old_doc}")

    return SeedBundle(
        change=change,
        required_path=required,
        forbidden_path=forbidden,
        api_path=f"{change.api.crate_name}::{change.api.canonical_path}",
        target_version=str(change.to_version),
        signature_old=change.old_signature.raw_text if change.old_signature else "(none)",
        signature_new=change.new_signature.raw_text if change.new_signature else "(none)",
        doc="\n".join(doc_parts),
        usage_examples=usage_text,
    )


def _bindings(seed: SeedBundle, attempt: str, reject_reason: str, **extra: str) -> dict[str, str]:
    base = {
        "required_path": seed.required_path,
        "forbidden_path": seed.forbidden_path,
        "api_path": seed.api_path,
        "target_version": seed.target_version,
        "attempt": attempt,
        "reject_reason": reject_reason,
        "signature_old": seed.signature_old,
        "signature_new": seed.signature_new,
        "doc": seed.doc,
        "usage_examples": seed.usage_examples,
    }
    base.update(extra)
    return base


def _query_leaks(query: str, change: ChangeRecord) -> bool:
    if scan_query_for_api(query, change.api):
        return True
    return change.replacement is not None and scan_query_for_api(query, change.replacement)


def gen_query(
    seed: SeedBundle,
    client: ModelClient,
    *,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
    attempt: str = "1",
    reject_reason: str = "none",
) -> str:
    prompt = load_template(seed.change.kind, "query").render(
        **_bindings(seed, attempt, reject_reason)
    )
    for _ in range(retries):
        out = client.generate(prompt, temperature, 512).strip()
        if out and not _query_leaks(out, seed.change):
            return out
    raise GenerationExhausted(f"query stage kept naming the API for {seed.api_path}")


def gen_solution(
    query: str,
    seed: SeedBundle,
    client: ModelClient,
    *,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
    attempt: str = "1",
    reject_reason: str = "none",
) -> str:
    prompt = load_template(seed.change.kind, "solution").render(
        **_bindings(seed, attempt, reject_reason, query=query)
    )
    for _ in range(retries):
        out = client.generate(prompt, temperature, 1024).strip()
        if out and token_present(out, seed.required_path):
            return out
    raise GenerationExhausted(f"solution never used {seed.required_path}")


def _case_lines(text: str) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for line in text.splitlines():
        line = line.strip()
        if line and line not in seen:
            seen[line] = None
    return tuple(seen)


def assemble_program(seed: SeedBundle, cases: Sequence[str]) -> str:
    """Stanza, splice marker, and a main that reports every case by index."""
    forbid = [seed.forbidden_path] if seed.forbidden_path else []
    lines = [
        render_stanza([seed.required_path], forbid),
        "#![allow(dead_code)]",
        "",
        SOLUTION_MARKER,
        "",
        "fn main() {",
    ]
    for i, case in enumerate(cases):
        lines.append(f"    let r{i} = std::panic::catch_unwind(|| {{ {case} }});")
        lines.append(
            f'    println!("EVO-CASE {i} {{}}", '
            f'if r{i}.is_ok() {{ "PASS" }} else {{ "FAIL" }});'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def gen_test_program(
    query: str,
    solution: str,
    seed: SeedBundle,
    client: ModelClient,
    *,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
    attempt: str = "1",
    reject_reason: str = "none",
) -> tuple[str, tuple[str, ...]]:
    prompt = load_template(seed.change.kind, "test_program").render(
        **_bindings(seed, attempt, reject_reason, query=query, solution=solution)
    )
    for _ in range(retries):
        cases = _case_lines(client.generate(prompt, temperature, 1024))
        if cases:
            return assemble_program(seed, cases), cases
    raise GenerationExhausted(f"no test cases produced for {seed.api_path}")


@dataclass(frozen=True, slots=True)
class TaskDraft:
    change: ChangeRecord
    seed: SeedBundle
    query: str
    solution: str
    program: str
    cases: tuple[str, ...]
    augment_flagged: bool = False


def augment_tests(
    draft: TaskDraft,
    client: ModelClient,
    *,
    case_target: int = DEFAULT_CASE_TARGET,
    temperature: float = DEFAULT_TEMPERATURE,
    attempt: str = "1",
    reject_reason: str = "none",
) -> tuple[tuple[str, ...], bool]:
    """Expanded case list and whether augmentation had to be flagged.

    Duplicates are dropped textually; on a backend failure or an empty
    reply the draft's cases come back unchanged with the flag set.
    """
    if len(draft.cases) >= case_target:
        return draft.cases, False
    prompt = load_template(draft.change.kind, "augment").render(
        **_bindings(
            draft.seed, attempt, reject_reason,
            query=draft.query, solution=draft.solution,
            existing_cases="\n".join(draft.cases), case_target=str(case_target),
        )
    )
    try:
        fresh = _case_lines(client.generate(prompt, temperature, 1024))
    except BackendError:
        return draft.cases, True
    merged = _case_lines("\n".join(draft.cases) + "\n" + "\n".join(fresh))
    if len(merged) == len(draft.cases):
        return draft.cases, True
    return merged, False


def _parse_verdict(reply: str) -> tuple[str, str | None]:
    first = reply.strip().splitlines()[0].strip() if reply.strip() else ""
    if first == "ACCEPT":
        return "accept", None
    if first.startswith("REJECT:"):
        reason = first.split(":", 1)[1].strip()
        if reason in REJECT_REASONS:
            return "reject", reason
    raise JudgeUnparseable(f"judge reply did not follow the verdict protocol: {first!r}")


def judge_qc(
    draft: TaskDraft,
    client: ModelClient,
    *,
    attempt: str = "1",
    diagnostics: Diagnostics | None = None,
) -> tuple[str, str | None]:
    """("accept", None) or ("reject", reason).

    Mechanical floors run before any model call: a query that leaks the
    API is api_mentioned, a caseless draft is low_coverage. An unparseable
    judge reply counts as reject(technical_error).
    """
    if _query_leaks(draft.query, draft.change):
        return "reject", "api_mentioned"
    if not draft.cases:
        return "reject", "low_coverage"
    prompt = load_template(draft.change.kind, "judge").render(
        **_bindings(
            draft.seed, attempt, "none",
            query=draft.query, solution=draft.solution,
            case_count=str(len(draft.cases)),
        )
    )
    reply = client.generate(prompt, 0.0, 256)
    try:
        return _parse_verdict(reply)
    except JudgeUnparseable:
        if diagnostics is not None:
            diagnostics.bump("judge_unparseable")
        return "reject", "technical_error"


def compile_qc(draft: TaskDraft, sandbox) -> str | None:
    """None on pass, else the failing stage name.

    The reference solution must build on its own, then pass every case of
    its own test program under the pinned toolchain.
    """
    wrapper = "#![allow(dead_code)]\n" + draft.solution + "\nfn main() {}\n"
    if not sandbox.compile_source(wrapper, draft.change.to_version):
        return "solution_compile"
    spliced = splice_solution(draft.program, draft.solution)
    result = sandbox.compile_and_run(spliced, draft.change.to_version, len(draft.cases))
    if not result.compiled or result.cases_passed != len(draft.cases):
        return "tests_run"
    return None


def extract_fn_signature(solution: str) -> str:
    m = _FN_SIG_RE.search(solution)
    return m.group(0).strip() if m else ""


def generate_task(
    change: ChangeRecord,
    usages: Sequence[UsageExample],
    client: ModelClient,
    sandbox=None,
    *,
    seq: int = 0,
    judge_client: ModelClient | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
    case_target: int = DEFAULT_CASE_TARGET,
    diagnostics: Diagnostics | None = None,
) -> TaskSpec | None:
    """One change record through the whole pipeline; None when skipped."""
    diag = diagnostics if diagnostics is not None else Diagnostics()
    if change.kind is ChangeKind.DEPRECATION and change.replacement is None:
        diag.bump("deprecation_without_replacement")
        return None
    seed = prepare_seed(change, usages)
    judge = judge_client if judge_client is not None else client

    draft: TaskDraft | None = None
    attempt, reason = "1", "none"
    for round_no in (1, 2):
        try:
            query = gen_query(
                seed, client, temperature=temperature, retries=retries,
                attempt=attempt, reject_reason=reason,
            )
            solution = gen_solution(
                query, seed, client, temperature=temperature, retries=retries,
                attempt=attempt, reject_reason=reason,
            )
            program, cases = gen_test_program(
                query, solution, seed, client, temperature=temperature,
                retries=retries, attempt=attempt, reject_reason=reason,
            )
        except GenerationExhausted:
            diag.bump("generation_exhausted")
            return None
        draft = TaskDraft(change, seed, query, solution, program, cases)
        cases, flagged = augment_tests(
            draft, client, case_target=case_target, temperature=temperature,
            attempt=attempt, reject_reason=reason,
        )
        if flagged:
            diag.bump("augment_flagged")
        draft = replace(
            draft, cases=cases, program=assemble_program(seed, cases),
            augment_flagged=flagged,
        )
        verdict, why = judge_qc(draft, judge, attempt=attempt, diagnostics=diag)
        if verdict == "accept":
            break
        diag.bump(f"judge_reject_{why}")
        if round_no == 2:
            diag.bump("dropped_after_regeneration")
            return None
        attempt, reason = "2", why or "technical_error"

    if sandbox is not None:
        diag.bump("drafts_compiled")
        failed_stage = compile_qc(draft, sandbox)
        if failed_stage is not None:
            diag.bump(f"compile_fail_{failed_stage}")
            return None

    return TaskSpec(
        f"{change.change_id}-{seq:02d}",
        change.change_id,
        draft.query,
        extract_fn_signature(draft.solution),
        draft.solution,
        draft.program,
        tuple(draft.cases),
        change.to_version,
    )


@dataclass
class GenerationReport:
    """Corpus-level outcome of a generation run."""

    tasks: list[TaskSpec]
    drafts_total: int
    released: int
    diagnostics: Diagnostics

    @property
    def retention_percent(self) -> float:
        return percent(self.released, self.drafts_total)

    @property
    def retention_display(self) -> str:
        return f"{self.released}/{self.drafts_total} = {self.retention_percent}%"


def generate_corpus(
    changes: Iterable[ChangeRecord],
    usages_by_change: Mapping[str, Sequence[UsageExample]],
    client: ModelClient,
    sandbox=None,
    *,
    judge_client: ModelClient | None = None,
    tasks_per_change: int = 1,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = DEFAULT_RETRIES,
    case_target: int = DEFAULT_CASE_TARGET,
    diagnostics: Diagnostics | None = None,
) -> GenerationReport:
    """Run every change through the pipeline; retention counts QC survivors.

    The retention denominator is drafts that survived generation and the
    judge (the ones that face the compile gate), matching how the pipeline
    loses work: generation/judge losses are tallied separately.
    """
    diag = diagnostics if diagnostics is not None else Diagnostics()
    tasks: list[TaskSpec] = []
    drafts_total = 0
    for change in changes:
        usages = usages_by_change.get(change.change_id, ())
        for seq in range(tasks_per_change):
            before = diag.as_dict()
            task = generate_task(
                change, usages, client, sandbox,
                seq=seq, judge_client=judge_client, temperature=temperature,
                retries=retries, case_target=case_target, diagnostics=diag,
            )
            after = diag.as_dict()
            survived_to_compile = task is not None or (
                after.get("compile_fail_solution_compile", 0)
                + after.get("compile_fail_tests_run", 0)
                > before.get("compile_fail_solution_compile", 0)
                + before.get("compile_fail_tests_run", 0)
            )
            if survived_to_compile:
                drafts_total += 1
            if task is not None:
                tasks.append(task)
    return GenerationReport(tasks, drafts_total, len(tasks), diag)
