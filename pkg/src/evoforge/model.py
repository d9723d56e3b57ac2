"""Core domain types for the evolution-mining pipeline.

Everything downstream (miners, fuser, generator, harness) trades in the
types defined here. All of them serialize to flat JSON dicts whose keys
equal the dataclass field names, so the JSONL files produced by one stage
can be read back by the next without any mapping layer.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .errors import EmptyDataset, MalformedVersion

PROVENANCE_SOURCES = frozenset({"changelog", "docdiff", "srcdiff"})

# Crates whose items count as first-party standard library surface.
OFFICIAL_CRATES = frozenset({"std", "core", "alloc"})

# Lowercase path segments that name primitive receivers; a path like
# slice::first_chunk_mut is a method on the primitive, not a free function.
PRIMITIVE_SEGMENTS = frozenset(
    {
        "bool", "char", "str", "slice", "array", "tuple",
        "f32", "f64",
        "i8", "i16", "i32", "i64", "i128", "isize",
        "u8", "u16", "u32", "u64", "u128", "usize",
    }
)

_VERSION_RE = re.compile(r"^(\d+)\.(\d+)\.(\d+)$")


@dataclass(frozen=True, order=True, slots=True)
class VersionId:
    """A MAJOR.MINOR.PATCH release identifier, ordered lexicographically."""

    major: int
    minor: int
    patch: int

    def __str__(self) -> str:
        return f"{self.major}.{self.minor}.{self.patch}"


def parse_version(text: str) -> VersionId:
    """Parse "1.77.0" into a VersionId; anything else is MalformedVersion."""
    m = _VERSION_RE.match(text)
    if m is None:
        raise MalformedVersion(f"not a MAJOR.MINOR.PATCH triple: {text!r}")
    return VersionId(int(m.group(1)), int(m.group(2)), int(m.group(3)))


@dataclass(frozen=True, slots=True)
class VersionDate:
    """A release paired with the date it shipped."""

    version: VersionId
    released_on: date


class ItemKind(str, Enum):
    FUNCTION = "function"
    METHOD = "method"
    TRAIT = "trait"
    TYPE = "type"
    MACRO = "macro"
    CONST = "const"


class ChangeKind(str, Enum):
    STABILIZATION = "stabilization"
    SIGNATURE_CHANGE = "signature_change"
    BEHAVIORAL_CHANGE = "behavioral_change"
    DEPRECATION = "deprecation"


class SourceClass(str, Enum):
    OFFICIAL = "official"
    THIRD_PARTY = "third_party"


class VerificationTier(IntEnum):
    """How hard a usage example was vetted; higher is stronger."""

    MANIFEST = 1
    STATIC = 2
    COMPILED = 3


class Condition(str, Enum):
    """What the candidate model was shown alongside the task query."""

    NO_INFO = "no_info"
    RAG = "rag"
    ORACLE_INFO = "oracle_info"


def classify_source(crate_name: str) -> SourceClass:
    if crate_name in OFFICIAL_CRATES:
        return SourceClass.OFFICIAL
    return SourceClass.THIRD_PARTY


def infer_item_kind(path: Sequence[str]) -> ItemKind:
    """Guess function vs method from the path shape.

    A penultimate segment that looks like a type (initial capital) or names
    a primitive marks the final segment as a method on it.
    """
    if len(path) >= 2:
        owner = path[-2]
        if owner[:1].isupper() or owner in PRIMITIVE_SEGMENTS:
            return ItemKind.METHOD
    return ItemKind.FUNCTION


@dataclass(frozen=True, slots=True)
class ApiIdentity:
    """A fully qualified item: crate, module path, and item kind."""

    crate_name: str
    path: tuple[str, ...]
    item_kind: ItemKind

    def __post_init__(self) -> None:
        if not self.path or any(not seg for seg in self.path):
            raise ValueError(f"empty path segment in {self.path!r}")
        if not self.crate_name:
            raise ValueError("crate_name must be non-empty")

    @property
    def canonical_path(self) -> str:
        return "::".join(self.path)

    @property
    def final_segment(self) -> str:
        return self.path[-1]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "crate_name": self.crate_name,
            "path": list(self.path),
            "item_kind": self.item_kind.value,
        }

    @classmethod
    def from_json_dict(cls, d: Mapping[str, Any]) -> "ApiIdentity":
        return cls(d["crate_name"], tuple(d["path"]), ItemKind(d["item_kind"]))


def parse_api_path(canonical: str, *, crate_name: str = "std",
                   item_kind: ItemKind | None = None) -> ApiIdentity:
    """Build an identity from a "a::b::c" string, inferring kind if unset."""
    segments = tuple(s for s in canonical.split("::") if s)
    if not segments:
        raise ValueError(f"no path segments in {canonical!r}")
    kind = item_kind if item_kind is not None else infer_item_kind(segments)
    return ApiIdentity(crate_name, segments, kind)


@dataclass(frozen=True, slots=True)
class ApiSignature:
    """A declaration as written, plus a light structural decomposition."""

    raw_text: str
    param_count: int
    param_types: tuple[str, ...]
    return_type: str | None
    generic_constraints: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.raw_text.strip():
            raise ValueError("raw_text must be non-empty")
        if self.param_count != len(self.param_types):
            raise ValueError(
                f"param_count {self.param_count} != {len(self.param_types)} param types"
            )

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "raw_text": self.raw_text,
            "param_count": self.param_count,
            "param_types": list(self.param_types),
            "return_type": self.return_type,
            "generic_constraints": list(self.generic_constraints),
        }

    @classmethod
    def from_json_dict(cls, d: Mapping[str, Any]) -> "ApiSignature":
        return cls(
            d["raw_text"],
            d["param_count"],
            tuple(d["param_types"]),
            d["return_type"],
            tuple(d["generic_constraints"]),
        )


def _split_top_level(text: str, sep: str = ",") -> list[str]:
    """Split on sep outside any (), [], <> nesting."""
    parts: list[str] = []
    depth = 0
    current: list[str] = []
    for ch in text:
        if ch in "([<":
            depth += 1
        elif ch in ")]>":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    tail = "".join(current)
    if tail.strip():
        parts.append(tail)
    return [p.strip() for p in parts if p.strip()]


def parse_signature(raw_text: str) -> ApiSignature:
    """Decompose a fn declaration into parameter types and return type.

    Tolerant by design: anything that does not look like a fn header still
    becomes a signature with zero decomposed parameters, because raw_text
    comparison is what the diffing rules actually rely on.
    """
    text = " ".join(raw_text.split())
    open_paren = text.find("(")
    params: tuple[str, ...] = ()
    if open_paren != -1:
        depth = 0
        close_paren = -1
        for i in range(open_paren, len(text)):
            if text[i] == "(":
                depth += 1
            elif text[i] == ")":
                depth -= 1
                if depth == 0:
                    close_paren = i
                    break
        if close_paren != -1:
            inner = text[open_paren + 1 : close_paren]
            decls = _split_top_level(inner)
            types = []
            for decl in decls:
                if decl in ("self", "&self", "&mut self"):
                    types.append(decl)
                elif ":" in decl:
                    types.append(decl.split(":", 1)[1].strip())
                else:
                    types.append(decl)
            params = tuple(types)
    return_type: str | None = None
    arrow = text.find("->")
    if arrow != -1:
        ret = text[arrow + 2 :].strip()
        where_pos = ret.find(" where ")
        if where_pos != -1:
            ret = ret[:where_pos]
        return_type = ret.rstrip(" ;{").strip() or None
    constraints: tuple[str, ...] = ()
    where_pos = text.find(" where ")
    if where_pos != -1:
        clause = text[where_pos + len(" where ") :].rstrip(" ;{")
        constraints = tuple(_split_top_level(clause))
    return ApiSignature(raw_text, len(params), params, return_type, constraints)


def compute_change_id(
    api: ApiIdentity,
    kind: ChangeKind,
    from_version: VersionId | None,
    to_version: VersionId,
    new_signature_raw: str | None,
) -> str:
    """First 16 hex chars of a content hash over the identifying fields."""
    canonical = "|".join(
        [
            f"{api.crate_name}::{api.canonical_path}",
            kind.value,
            str(from_version) if from_version is not None else "",
            str(to_version),
            new_signature_raw or "",
        ]
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True, slots=True)
class ChangeRecord:
    """One categorized evolution event for one API at one release."""

    change_id: str
    api: ApiIdentity
    kind: ChangeKind
    from_version: VersionId | None
    to_version: VersionId
    old_signature: ApiSignature | None
    new_signature: ApiSignature | None
    old_doc: str | None
    new_doc: str | None
    changelog_note: str | None
    replacement: ApiIdentity | None
    provenance: frozenset[str]
    source_class: SourceClass

    def __post_init__(self) -> None:
        if not self.provenance:
            raise ValueError("provenance must be non-empty")
        unknown = self.provenance - PROVENANCE_SOURCES
        if unknown:
            raise ValueError(f"unknown provenance sources: {sorted(unknown)}")
        if self.replacement is not None and self.kind is not ChangeKind.DEPRECATION:
            raise ValueError("replacement is only meaningful for deprecations")
        if self.kind is ChangeKind.STABILIZATION and self.new_signature is None:
            raise ValueError("stabilization requires new_signature")
        if self.kind is ChangeKind.SIGNATURE_CHANGE:
            if self.old_signature is None or self.new_signature is None:
                raise ValueError("signature change requires both signatures")
            if self.old_signature.raw_text == self.new_signature.raw_text:
                raise ValueError("signature change requires differing raw_text")
        if self.kind is ChangeKind.BEHAVIORAL_CHANGE:
            if (
                self.old_signature is not None
                and self.new_signature is not None
                and self.old_signature.raw_text != self.new_signature.raw_text
            ):
                raise ValueError("behavioral change requires identical signatures")

    @classmethod
    def create(
        cls,
        api: ApiIdentity,
        kind: ChangeKind,
        to_version: VersionId,
        *,
        from_version: VersionId | None = None,
        old_signature: ApiSignature | None = None,
        new_signature: ApiSignature | None = None,
        old_doc: str | None = None,
        new_doc: str | None = None,
        changelog_note: str | None = None,
        replacement: ApiIdentity | None = None,
        provenance: Iterable[str],
    ) -> "ChangeRecord":
        return cls(
            change_id=compute_change_id(
                api, kind, from_version, to_version,
                new_signature.raw_text if new_signature else None,
            ),
            api=api,
            kind=kind,
            from_version=from_version,
            to_version=to_version,
            old_signature=old_signature,
            new_signature=new_signature,
            old_doc=old_doc,
            new_doc=new_doc,
            changelog_note=changelog_note,
            replacement=replacement,
            provenance=frozenset(provenance),
            source_class=classify_source(api.crate_name),
        )

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "change_id": self.change_id,
            "api": self.api.to_json_dict(),
            "kind": self.kind.value,
            "from_version": str(self.from_version) if self.from_version else None,
            "to_version": str(self.to_version),
            "old_signature": self.old_signature.to_json_dict() if self.old_signature else None,
            "new_signature": self.new_signature.to_json_dict() if self.new_signature else None,
            "old_doc": self.old_doc,
            "new_doc": self.new_doc,
            "changelog_note": self.changelog_note,
            "replacement": self.replacement.to_json_dict() if self.replacement else None,
            "provenance": sorted(self.provenance),
            "source_class": self.source_class.value,
        }

    @classmethod
    def from_json_dict(cls, d: Mapping[str, Any]) -> "ChangeRecord":
        return cls(
            change_id=d["change_id"],
            api=ApiIdentity.from_json_dict(d["api"]),
            kind=ChangeKind(d["kind"]),
            from_version=parse_version(d["from_version"]) if d["from_version"] else None,
            to_version=parse_version(d["to_version"]),
            old_signature=ApiSignature.from_json_dict(d["old_signature"]) if d["old_signature"] else None,
            new_signature=ApiSignature.from_json_dict(d["new_signature"]) if d["new_signature"] else None,
            old_doc=d["old_doc"],
            new_doc=d["new_doc"],
            changelog_note=d["changelog_note"],
            replacement=ApiIdentity.from_json_dict(d["replacement"]) if d["replacement"] else None,
            provenance=frozenset(d["provenance"]),
            source_class=SourceClass(d["source_class"]),
        )


@dataclass(frozen=True, slots=True)
class UsageExample:
    """A real-world occurrence of an API, with provenance and a vet tier."""

    example_id: str
    api: ApiIdentity
    repo_url: str
    file_path: str
    hit_line: int
    snippet: str
    resolved_version: VersionId
    verification_tier: VerificationTier
    repo_updated_on: date

    def __post_init__(self) -> None:
        if self.hit_line < 1:
            raise ValueError("hit_line must be >= 1")
        if self.api.final_segment not in self.snippet:
            raise ValueError("snippet must contain the API's final path segment")

    @classmethod
    def create(
        cls,
        api: ApiIdentity,
        repo_url: str,
        file_path: str,
        hit_line: int,
        snippet: str,
        resolved_version: VersionId,
        verification_tier: VerificationTier,
        repo_updated_on: date,
    ) -> "UsageExample":
        key = f"{api.crate_name}::{api.canonical_path}|{repo_url}|{file_path}|{hit_line}"
        example_id = hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]
        return cls(
            example_id, api, repo_url, file_path, hit_line, snippet,
            resolved_version, verification_tier, repo_updated_on,
        )

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "example_id": self.example_id,
            "api": self.api.to_json_dict(),
            "repo_url": self.repo_url,
            "file_path": self.file_path,
            "hit_line": self.hit_line,
            "snippet": self.snippet,
            "resolved_version": str(self.resolved_version),
            "verification_tier": self.verification_tier.name.lower(),
            "repo_updated_on": self.repo_updated_on.isoformat(),
        }

    @classmethod
    def from_json_dict(cls, d: Mapping[str, Any]) -> "UsageExample":
        return cls(
            d["example_id"],
            ApiIdentity.from_json_dict(d["api"]),
            d["repo_url"],
            d["file_path"],
            d["hit_line"],
            d["snippet"],
            parse_version(d["resolved_version"]),
            VerificationTier[d["verification_tier"].upper()],
            date.fromisoformat(d["repo_updated_on"]),
        )


@dataclass(frozen=True, slots=True)
class TaskSpec:
    """A released coding task derived from one change record."""

    task_id: str
    change_id: str
    query: str
    function_signature: str
    reference_solution: str
    test_program: str
    test_cases: tuple[str, ...]
    target_version: VersionId

    def __post_init__(self) -> None:
        if len(self.test_cases) < 1:
            raise ValueError("a task needs at least one test case")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "change_id": self.change_id,
            "query": self.query,
            "function_signature": self.function_signature,
            "reference_solution": self.reference_solution,
            "test_program": self.test_program,
            "test_cases": list(self.test_cases),
            "target_version": str(self.target_version),
        }

    @classmethod
    def from_json_dict(cls, d: Mapping[str, Any]) -> "TaskSpec":
        return cls(
            d["task_id"],
            d["change_id"],
            d["query"],
            d["function_signature"],
            d["reference_solution"],
            d["test_program"],
            tuple(d["test_cases"]),
            parse_version(d["target_version"]),
        )


@dataclass(frozen=True, slots=True)
class EvalOutcome:
    """What happened when one candidate sample ran against one task."""

    task_id: str
    model_id: str
    condition: Condition
    sample_index: int
    compiled: bool
    static_check_passed: bool
    cases_passed: int
    cases_total: int

    def __post_init__(self) -> None:
        if self.sample_index < 0:
            raise ValueError("sample_index must be >= 0")
        if not (0 <= self.cases_passed <= self.cases_total):
            raise ValueError("cases_passed must lie in [0, cases_total]")
        if not self.compiled and self.cases_passed != 0:
            raise ValueError("a sample that did not compile cannot pass cases")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "model_id": self.model_id,
            "condition": self.condition.value,
            "sample_index": self.sample_index,
            "compiled": self.compiled,
            "static_check_passed": self.static_check_passed,
            "cases_passed": self.cases_passed,
            "cases_total": self.cases_total,
        }

    @classmethod
    def from_json_dict(cls, d: Mapping[str, Any]) -> "EvalOutcome":
        return cls(
            d["task_id"],
            d["model_id"],
            Condition(d["condition"]),
            d["sample_index"],
            d["compiled"],
            d["static_check_passed"],
            d["cases_passed"],
            d["cases_total"],
        )


@dataclass(frozen=True, slots=True)
class KindBreakdown:
    pass_at_1: float
    aua: float
    coverage: float

    def to_json_dict(self) -> dict[str, Any]:
        return {"pass_at_1": self.pass_at_1, "aua": self.aua, "coverage": self.coverage}

    @classmethod
    def from_json_dict(cls, d: Mapping[str, Any]) -> "KindBreakdown":
        return cls(d["pass_at_1"], d["aua"], d["coverage"])


@dataclass(frozen=True)
class MetricReport:
    """Aggregate evaluation metrics for one model under one condition."""

    pass_at_k: Mapping[int, float]
    aua: float
    coverage: float
    by_kind: Mapping[ChangeKind, KindBreakdown]
    by_cutoff: Mapping[str, float]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "pass_at_k": {str(k): v for k, v in sorted(self.pass_at_k.items())},
            "aua": self.aua,
            "coverage": self.coverage,
            "by_kind": {
                kind.value: breakdown.to_json_dict()
                for kind, breakdown in sorted(self.by_kind.items(), key=lambda kv: kv[0].value)
            },
            "by_cutoff": dict(self.by_cutoff),
        }

    @classmethod
    def from_json_dict(cls, d: Mapping[str, Any]) -> "MetricReport":
        return cls(
            pass_at_k={int(k): v for k, v in d["pass_at_k"].items()},
            aua=d["aua"],
            coverage=d["coverage"],
            by_kind={
                ChangeKind(k): KindBreakdown.from_json_dict(v)
                for k, v in d["by_kind"].items()
            },
            by_cutoff=dict(d["by_cutoff"]),
        )


class Diagnostics:
    """A tally of skipped or unmatched inputs, keyed by reason."""

    def __init__(self) -> None:
        self.counts: Counter[str] = Counter()

    def bump(self, reason: str, n: int = 1) -> None:
        self.counts[reason] += n

    def as_dict(self) -> dict[str, int]:
        return dict(sorted(self.counts.items()))


# ---------------------------------------------------------------------------
# Rounding and dataset statistics


def round_half_up(value: float | Decimal, ndigits: int) -> float:
    """Round ties away from zero, the way the reported figures do."""
    q = Decimal(1).scaleb(-ndigits)
    d = value if isinstance(value, Decimal) else Decimal(str(value))
    return float(d.quantize(q, rounding=ROUND_HALF_UP))


def percent(part: int, whole: int, ndigits: int = 1) -> float:
    """part/whole as a percentage, half-up rounded; 0.0 when whole is 0."""
    if whole == 0:
        return 0.0
    return round_half_up(Decimal(100 * part) / Decimal(whole), ndigits)


@dataclass(frozen=True)
class DatasetStats:
    total: int
    kind_counts: Mapping[ChangeKind, int]
    kind_percents: Mapping[ChangeKind, float]
    source_counts: Mapping[SourceClass, int]
    source_percents: Mapping[SourceClass, float]


def dataset_stats(records: Sequence[ChangeRecord]) -> DatasetStats:
    """Category and source-class composition of a change catalog."""
    kind_counts = {kind: 0 for kind in ChangeKind}
    source_counts = {source: 0 for source in SourceClass}
    for record in records:
        kind_counts[record.kind] += 1
        source_counts[record.source_class] += 1
    total = len(records)
    return DatasetStats(
        total=total,
        kind_counts=kind_counts,
        kind_percents={k: percent(n, total) for k, n in kind_counts.items()},
        source_counts=source_counts,
        source_percents={s: percent(n, total) for s, n in source_counts.items()},
    )


def avg_cases_per_task(tasks: Sequence[TaskSpec]) -> float:
    """Mean test cases per task, half-up rounded to two decimals."""
    if not tasks:
        raise EmptyDataset("no tasks to average over")
    total_cases = sum(len(t.test_cases) for t in tasks)
    return float(
        (Decimal(total_cases) / Decimal(len(tasks))).quantize(
            Decimal("0.01"), rounding=ROUND_HALF_UP
        )
    )


# ---------------------------------------------------------------------------
# JSONL persistence


def write_jsonl(path: Path | str, items: Iterable[Any]) -> int:
    """Write items (each with to_json_dict) one JSON object per line."""
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for item in items:
            obj = item.to_json_dict() if hasattr(item, "to_json_dict") else item
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
            count += 1
    return count


def read_jsonl(path: Path | str, cls: type | None = None) -> Iterator[Any]:
    """Yield parsed objects from a JSONL file, optionally typed."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            yield cls.from_json_dict(obj) if cls is not None else obj


# ---------------------------------------------------------------------------
# Release-date table


def load_version_dates() -> dict[VersionId, date]:
    """The shipped release-date table, validated for monotone dates."""
    data_path = Path(__file__).parent / "data" / "version_dates.json"
    raw = json.loads(data_path.read_text(encoding="utf-8"))
    table = {parse_version(v): date.fromisoformat(d) for v, d in raw.items()}
    ordered = sorted(table)
    for earlier, later in zip(ordered, ordered[1:]):
        if table[earlier] >= table[later]:
            raise ValueError(
                f"release dates must strictly increase: {earlier} vs {later}"
            )
    return table
