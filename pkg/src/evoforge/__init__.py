"""evoforge: mine API evolution events and forge them into checked tasks."""

from .model import (
    ApiIdentity,
    ApiSignature,
    ChangeKind,
    ChangeRecord,
    Condition,
    EvalOutcome,
    ItemKind,
    MetricReport,
    SourceClass,
    TaskSpec,
    UsageExample,
    VerificationTier,
    VersionId,
    avg_cases_per_task,
    dataset_stats,
    load_version_dates,
    parse_version,
)

__version__ = "0.1.0"

__all__ = [
    "ApiIdentity",
    "ApiSignature",
    "ChangeKind",
    "ChangeRecord",
    "Condition",
    "EvalOutcome",
    "ItemKind",
    "MetricReport",
    "SourceClass",
    "TaskSpec",
    "UsageExample",
    "VerificationTier",
    "VersionId",
    "avg_cases_per_task",
    "dataset_stats",
    "load_version_dates",
    "parse_version",
    "__version__",
]
