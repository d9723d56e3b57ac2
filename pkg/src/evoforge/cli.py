"""Command-line front end tying the pipeline stages together.

One JSON config file (default evo.config.json) describes a run: which
adjacent release versions to compare, where the staged inputs live, and
how the model and sandbox behave.  Staged paths resolve relative to the
config file so a run directory is self-describing; everything a command
produces lands in --out-dir.

Subcommands mirror the pipeline order: mine -> usages -> generate ->
rag-index -> evaluate -> report, plus control-set for the stable-API
baseline list.  Exit codes: 0 success, 2 bad or missing input, 3 backend
(model endpoint or toolchain) failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import random
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Mapping, Sequence

from .clients import HttpModelClient, MockModelClient, ModelClient
from .doc_diff import DocTree, diff_doc_trees, parse_doc_tree
from .errors import (
    BackendError,
    EmptyDataset,
    InputError,
    MissingInput,
    SchemaMismatch,
)
from .evaluation import build_report, run_sample
from .fuse import fuse, select_stable_controls
from .generation import generate_corpus
from .model import (
    ChangeKind,
    ChangeRecord,
    Condition,
    Diagnostics,
    SourceClass,
    TaskSpec,
    UsageExample,
    VersionId,
    dataset_stats,
    load_version_dates,
    parse_version,
    read_jsonl,
    write_jsonl,
)
from .release_notes import notes_filename, parse_release_notes_file
from .retrieval import build_condition_prompt, index_from_changes, load_index, save_index
from .sandbox import ToolchainSandbox
from .source_scan import diff_item_bodies, scan_attributes
from .usage_mining import RepoIndexEntry, mine_usages

DEFAULT_CONFIG = "evo.config.json"
DEFAULT_OUT_DIR = "out"

_CONDITION_BY_FLAG = {
    "none": Condition.NO_INFO,
    "rag": Condition.RAG,
    "oracle": Condition.ORACLE_INFO,
}

CHANGES_FILE = "changes.jsonl"
LOW_CONFIDENCE_FILE = "changes.low_confidence.jsonl"
USAGES_FILE = "usages.jsonl"
TASKS_FILE = "tasks.jsonl"
OUTCOMES_FILE = "outcomes.jsonl"
KB_INDEX_FILE = "kb.index.json"
REPORT_FILE = "report.json"
CONTROLS_FILE = "controls.jsonl"
COMPARISON_CSV = "comparison.csv"


# ---------------------------------------------------------------------------
# Configuration


def _reject_unknown(raw: Mapping[str, Any], allowed: Sequence[str], where: str) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise SchemaMismatch(f"unknown key(s) in {where}: {', '.join(unknown)}")


@dataclass(frozen=True)
class StagingPaths:
    """Where the staged inputs live, resolved against the config file."""

    notes_dir: Path
    docs_dir: Path
    src_dir: Path
    repos_dir: Path
    repo_index: Path

    _KEYS = ("notes_dir", "docs_dir", "src_dir", "repos_dir", "repo_index")

    @classmethod
    def from_json_dict(cls, raw: Mapping[str, Any], base: Path) -> "StagingPaths":
        _reject_unknown(raw, cls._KEYS, "staging_paths")
        defaults = {
            "notes_dir": "stage/notes",
            "docs_dir": "stage/docs",
            "src_dir": "stage/src",
            "repos_dir": "stage/repos",
            "repo_index": "stage/repos/index.json",
        }
        resolved = {key: base / raw.get(key, defaults[key]) for key in defaults}
        return cls(**resolved)


@dataclass(frozen=True)
class ModelConfig:
    provider: str = "mock"
    model_id: str = "mock"
    cutoff_date: date | None = None
    temperature: float = 0.7

    _KEYS = ("provider", "model_id", "cutoff_date", "temperature")
    _PROVIDERS = ("mock", "http", "reference")

    @classmethod
    def from_json_dict(cls, raw: Mapping[str, Any]) -> "ModelConfig":
        _reject_unknown(raw, cls._KEYS, "model")
        provider = raw.get("provider", "mock")
        if provider not in cls._PROVIDERS:
            raise SchemaMismatch(
                f"model.provider must be one of {cls._PROVIDERS}, got {provider!r}"
            )
        cutoff = raw.get("cutoff_date")
        return cls(
            provider=provider,
            model_id=str(raw.get("model_id", provider)),
            cutoff_date=date.fromisoformat(cutoff) if cutoff else None,
            temperature=float(raw.get("temperature", 0.7)),
        )


@dataclass(frozen=True)
class SandboxConfig:
    compile_timeout: float = 30.0
    run_timeout: float = 10.0

    _KEYS = ("compile_timeout", "run_timeout")

    @classmethod
    def from_json_dict(cls, raw: Mapping[str, Any]) -> "SandboxConfig":
        _reject_unknown(raw, cls._KEYS, "sandbox")
        return cls(
            compile_timeout=float(raw.get("compile_timeout", 30.0)),
            run_timeout=float(raw.get("run_timeout", 10.0)),
        )


@dataclass(frozen=True)
class RagConfig:
    k: int = 3
    token_budget: int = 2000

    _KEYS = ("k", "token_budget")

    @classmethod
    def from_json_dict(cls, raw: Mapping[str, Any]) -> "RagConfig":
        _reject_unknown(raw, cls._KEYS, "rag")
        return cls(
            k=int(raw.get("k", 3)),
            token_budget=int(raw.get("token_budget", 2000)),
        )


@dataclass(frozen=True)
class Config:
    """One run's parsed configuration plus a hash of the file it came from."""

    versions: tuple[VersionId, ...]
    staging: StagingPaths
    crates: tuple[str, ...]
    model: ModelConfig
    sandbox: SandboxConfig
    rag: RagConfig
    seed: int = 0
    config_hash: str = "0" * 16

    _KEYS = ("versions", "staging_paths", "crates", "model", "sandbox", "rag", "seed")


def load_config(path: Path | str) -> Config:
    """Parse and validate evo.config.json; unknown keys fail fast."""
    path = Path(path)
    if not path.is_file():
        raise MissingInput(str(path), "config file")
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaMismatch("config root must be a JSON object")
    _reject_unknown(raw, Config._KEYS, "config")
    base = path.resolve().parent
    return Config(
        versions=tuple(parse_version(v) for v in raw.get("versions", [])),
        staging=StagingPaths.from_json_dict(raw.get("staging_paths", {}), base),
        crates=tuple(raw.get("crates", ["std"])),
        model=ModelConfig.from_json_dict(raw.get("model", {})),
        sandbox=SandboxConfig.from_json_dict(raw.get("sandbox", {})),
        rag=RagConfig.from_json_dict(raw.get("rag", {})),
        seed=int(raw.get("seed", 0)),
        config_hash=hashlib.sha256(text.encode("utf-8")).hexdigest()[:16],
    )


def _require(path: Path, hint: str = "") -> Path:
    if not path.exists():
        raise MissingInput(str(path), hint)
    return path


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _print_diagnostics(diag: Diagnostics) -> None:
    for reason, count in diag.as_dict().items():
        print(f"  note: {reason} x{count}")


def _make_client(config: Config) -> ModelClient:
    if config.model.provider == "http":
        return HttpModelClient.from_env(
            config.model.model_id, cutoff_date=config.model.cutoff_date
        )
    return MockModelClient(
        model_id=config.model.model_id, cutoff_date=config.model.cutoff_date
    )


def _make_sandbox(config: Config) -> ToolchainSandbox:
    return ToolchainSandbox.locate(
        compile_timeout=config.sandbox.compile_timeout,
        run_timeout=config.sandbox.run_timeout,
    )


# ---------------------------------------------------------------------------
# mine


def _version_pairs(config: Config) -> list[tuple[VersionId, VersionId]]:
    if len(config.versions) < 2:
        raise InputError("config.versions needs at least two releases to mine between")
    return list(zip(config.versions, config.versions[1:]))


def cmd_mine(config: Config, out_dir: Path) -> int:
    """Run all three miners plus fusion over every adjacent version pair."""
    pairs = _version_pairs(config)
    diag = Diagnostics()
    records: list[ChangeRecord] = []
    low_confidence: list[ChangeRecord] = []
    warnings: list[str] = []
    for from_v, to_v in pairs:
        notes_path = _require(
            config.staging.notes_dir / notes_filename(to_v), "release notes"
        )
        changelog = parse_release_notes_file(notes_path, to_v, diag)
        old_tree = parse_doc_tree(
            _require(config.staging.docs_dir / str(from_v), "doc tree"), from_v, diag
        )
        new_tree = parse_doc_tree(
            _require(config.staging.docs_dir / str(to_v), "doc tree"), to_v, diag
        )
        docdiff = diff_doc_trees(old_tree, new_tree)
        src_signals = []
        for crate in config.crates:
            old_src = _require(
                config.staging.src_dir / str(from_v) / f"{crate}.rs", "source snapshot"
            ).read_text(encoding="utf-8")
            new_src = _require(
                config.staging.src_dir / str(to_v) / f"{crate}.rs", "source snapshot"
            ).read_text(encoding="utf-8")
            src_signals.extend(scan_attributes(new_src, to_v, crate_name=crate))
            src_signals.extend(
                diff_item_bodies(old_src, new_src, to_v, crate_name=crate)
            )
        result = fuse(changelog, docdiff, src_signals, from_v, to_v, diag)
        records.extend(result.records)
        low_confidence.extend(result.low_confidence)
        warnings.extend(result.warnings)

    write_jsonl(out_dir / CHANGES_FILE, records)
    write_jsonl(out_dir / LOW_CONFIDENCE_FILE, low_confidence)

    stats = dataset_stats(records)
    print(
        f"mined {stats.total} changes ({len(low_confidence)} low-confidence) "
        f"over {len(pairs)} version pair(s)"
    )
    for kind in ChangeKind:
        print(
            f"  {kind.value}: {stats.kind_counts[kind]}"
            f" ({stats.kind_percents[kind]}%)"
        )
    for source in SourceClass:
        print(
            f"  {source.value}: {stats.source_counts[source]}"
            f" ({stats.source_percents[source]}%)"
        )
    for warning in warnings:
        print(f"  warning: {warning}")
    _print_diagnostics(diag)
    return 0


# ---------------------------------------------------------------------------
# usages


def cmd_usages(config: Config, out_dir: Path) -> int:
    """Mine real-usage snippets for every cataloged change."""
    changes = list(
        read_jsonl(_require(out_dir / CHANGES_FILE, "run mine first"), ChangeRecord)
    )
    index_path = _require(config.staging.repo_index, "repo index")
    raw_entries = json.loads(index_path.read_text(encoding="utf-8"))
    entries = []
    for raw in raw_entries:
        entry = RepoIndexEntry.from_json_dict(raw)
        local = Path(entry.local_path)
        if not local.is_absolute():
            local = config.staging.repos_dir / local
        entries.append(
            RepoIndexEntry(entry.repo_url, entry.updated_on, str(local))
        )
    diag = Diagnostics()
    usages = mine_usages(changes, entries, load_version_dates(), diagnostics=diag)
    write_jsonl(out_dir / USAGES_FILE, usages)
    print(f"mined {len(usages)} usage example(s) across {len(entries)} repo(s)")
    _print_diagnostics(diag)
    return 0


# ---------------------------------------------------------------------------
# generate


def cmd_generate(config: Config, out_dir: Path, *, no_sandbox: bool = False) -> int:
    """Turn the change catalog into released, QC-passed tasks."""
    changes = list(
        read_jsonl(_require(out_dir / CHANGES_FILE, "run mine first"), ChangeRecord)
    )
    usages = list(
        read_jsonl(_require(out_dir / USAGES_FILE, "run usages first"), UsageExample)
    )
    by_api: dict[tuple[str, str], list[UsageExample]] = {}
    for usage in usages:
        key = (usage.api.crate_name, usage.api.canonical_path)
        by_api.setdefault(key, []).append(usage)
    usages_by_change = {
        change.change_id: by_api.get(
            (change.api.crate_name, change.api.canonical_path), []
        )
        for change in changes
    }
    client = _make_client(config)
    sandbox = None if no_sandbox else _make_sandbox(config)
    diag = Diagnostics()
    report = generate_corpus(
        changes,
        usages_by_change,
        client,
        sandbox,
        temperature=config.model.temperature,
        diagnostics=diag,
    )
    write_jsonl(out_dir / TASKS_FILE, report.tasks)
    print(f"released {len(report.tasks)} task(s); retention {report.retention_display}")
    _print_diagnostics(diag)
    return 0


# ---------------------------------------------------------------------------
# rag-index


def cmd_rag_index(config: Config, out_dir: Path) -> int:
    """Build the retrieval knowledge base from the change catalog."""
    changes = list(
        read_jsonl(_require(out_dir / CHANGES_FILE, "run mine first"), ChangeRecord)
    )
    index = index_from_changes(changes)
    save_index(index, out_dir / KB_INDEX_FILE)
    print(f"indexed {len(index.docs)} knowledge document(s)")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _kinds_by_task(
    tasks: Sequence[TaskSpec], out_dir: Path
) -> dict[str, ChangeKind] | None:
    changes_path = out_dir / CHANGES_FILE
    if not changes_path.exists():
        return None
    kind_by_change = {
        record.change_id: record.kind
        for record in read_jsonl(changes_path, ChangeRecord)
    }
    return {
        task.task_id: kind_by_change[task.change_id]
        for task in tasks
        if task.change_id in kind_by_change
    }


def cmd_evaluate(
    config: Config,
    out_dir: Path,
    *,
    condition: Condition = Condition.NO_INFO,
    cutoff: date | None = None,
    k: int = 1,
    no_sandbox: bool = False,
) -> int:
    """Collect k samples per task, score them, and write the metric report."""
    tasks = list(
        read_jsonl(_require(out_dir / TASKS_FILE, "run generate first"), TaskSpec)
    )
    if not tasks:
        raise EmptyDataset(f"no tasks in {out_dir / TASKS_FILE}")
    if k < 1:
        raise InputError(f"--k must be >= 1, got {k}")

    index = None
    if condition is not Condition.NO_INFO:
        kb_path = _require(out_dir / KB_INDEX_FILE, "run rag-index first")
        index = load_index(kb_path)

    reference_run = config.model.provider == "reference"
    client = None if reference_run else _make_client(config)
    model_id = "reference" if reference_run else client.model_id
    sandbox = None if no_sandbox else _make_sandbox(config)

    outcomes = []
    for task in tasks:
        for sample_index in range(k):
            if reference_run:
                candidate = task.reference_solution
            else:
                prompt = build_condition_prompt(
                    task,
                    condition,
                    index=index,
                    client=client,
                    k=config.rag.k,
                    token_budget=config.rag.token_budget,
                )
                candidate = client.generate(
                    prompt, temperature=config.model.temperature, max_tokens=2000
                )
            outcomes.append(
                run_sample(
                    task,
                    candidate,
                    sandbox,
                    model_id=model_id,
                    condition=condition,
                    sample_index=sample_index,
                )
            )
    write_jsonl(out_dir / OUTCOMES_FILE, outcomes)

    report = build_report(
        tasks,
        outcomes,
        kinds_by_task=_kinds_by_task(tasks, out_dir),
        version_dates=load_version_dates() if cutoff is not None else None,
        cutoff=cutoff,
        ks=sorted({1, k}),
    )
    payload = {
        "metadata": {
            "model": model_id,
            "condition": condition.value,
            "dataset_sha256": _file_hash(out_dir / TASKS_FILE),
            "config_sha256": config.config_hash,
            "settings": {
                "k": k,
                "cutoff": cutoff.isoformat() if cutoff is not None else None,
                "sandbox": not no_sandbox,
                "seed": config.seed,
            },
        },
        "metrics": report.to_json_dict(),
    }
    report_path = out_dir / REPORT_FILE
    report_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )

    print(
        f"evaluated {len(tasks)} task(s) x{k} sample(s) "
        f"[{model_id}, {condition.value}, sandbox={'off' if no_sandbox else 'on'}]"
    )
    print(f"  pass@1 {report.pass_at_k[1]:.4f}")
    print(f"  api usage accuracy {report.aua:.4f}")
    print(f"  test coverage {report.coverage:.4f}")
    for side, value in report.by_cutoff.items():
        print(f"  pass@1 {side} cutoff {value:.4f}")
    return 0


# ---------------------------------------------------------------------------
# report


_REPORT_COLUMNS = (
    "model",
    "condition",
    "pass_at_1",
    "aua",
    "coverage",
    "pass_at_1_before",
    "pass_at_1_after",
)


def _report_row(path: Path) -> dict[str, str]:
    payload = json.loads(_require(path, "report file").read_text(encoding="utf-8"))
    try:
        metadata = payload["metadata"]
        metrics = payload["metrics"]
        row = {
            "model": str(metadata["model"]),
            "condition": str(metadata["condition"]),
            "pass_at_1": f"{metrics['pass_at_k']['1']:.4f}",
            "aua": f"{metrics['aua']:.4f}",
            "coverage": f"{metrics['coverage']:.4f}",
        }
        by_cutoff = metrics["by_cutoff"]
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"{path}: not a metric report ({exc!r})") from exc
    for side in ("before", "after"):
        value = by_cutoff.get(side)
        row[f"pass_at_1_{side}"] = "" if value is None else f"{value:.4f}"
    return row


def cmd_report(report_paths: Sequence[Path | str], out_dir: Path) -> int:
    """Render one comparison table (text + CSV) from metric reports."""
    if not report_paths:
        raise InputError("report needs at least one report.json path")
    rows = [_report_row(Path(p)) for p in report_paths]

    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=_REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    csv_path = out_dir / COMPARISON_CSV
    csv_path.write_text(buffer.getvalue(), encoding="utf-8")

    widths = {
        column: max(len(column), *(len(row[column]) for row in rows))
        for column in _REPORT_COLUMNS
    }
    header = "  ".join(column.ljust(widths[column]) for column in _REPORT_COLUMNS)
    print(header)
    print("  ".join("-" * widths[column] for column in _REPORT_COLUMNS))
    for row in rows:
        print("  ".join(row[column].ljust(widths[column]) for column in _REPORT_COLUMNS))
    print(f"wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# control-set


def cmd_control_set(
    config: Config, out_dir: Path, *, stable_before: str = "1.70.0", count: int = 50
) -> int:
    """Select APIs untouched across every staged release for the baseline."""
    catalog: list[DocTree] = []
    for version in config.versions:
        root = _require(config.staging.docs_dir / str(version), "doc tree")
        catalog.append(parse_doc_tree(root, version))
    controls = select_stable_controls(catalog, parse_version(stable_before), count)
    write_jsonl(out_dir / CONTROLS_FILE, controls)
    print(f"selected {len(controls)} stable control API(s)")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", default=DEFAULT_CONFIG, help="run configuration JSON file"
    )
    common.add_argument(
        "--out-dir", default=DEFAULT_OUT_DIR, help="directory for produced files"
    )

    parser = argparse.ArgumentParser(
        prog="evoforge",
        description="Mine API evolution events and evaluate models on them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("mine", parents=[common], help="build the change catalog")
    sub.add_parser("usages", parents=[common], help="mine usage snippets")

    generate = sub.add_parser(
        "generate", parents=[common], help="synthesize and QC tasks"
    )
    generate.add_argument(
        "--no-sandbox", action="store_true", help="skip the compile QC gate"
    )

    sub.add_parser("rag-index", parents=[common], help="build the knowledge base")

    evaluate = sub.add_parser(
        "evaluate", parents=[common], help="score candidates on the task corpus"
    )
    evaluate.add_argument(
        "--condition",
        choices=sorted(_CONDITION_BY_FLAG),
        default="none",
        help="what the candidate model sees besides the query",
    )
    evaluate.add_argument(
        "--cutoff", default=None, help="YYYY-MM-DD date to split tasks by release"
    )
    evaluate.add_argument(
        "--k", type=int, default=1, help="samples per task (and Pass@k horizon)"
    )
    evaluate.add_argument(
        "--no-sandbox", action="store_true", help="static checks only, no compiles"
    )

    report = sub.add_parser(
        "report", parents=[common], help="compare metric reports side by side"
    )
    report.add_argument("reports", nargs="+", help="report.json files to tabulate")

    control = sub.add_parser(
        "control-set", parents=[common], help="pick never-changed baseline APIs"
    )
    control.add_argument(
        "--stable-before",
        default="1.70.0",
        help="only APIs stabilized before this release qualify",
    )
    control.add_argument(
        "-n", "--count", type=int, default=50, help="how many control APIs to select"
    )
    return parser


def _parse_cutoff(raw: str | None) -> date | None:
    if raw is None:
        return None
    try:
        return date.fromisoformat(raw)
    except ValueError as exc:
        raise InputError(f"--cutoff must be YYYY-MM-DD, got {raw!r}") from exc


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "report":
            return cmd_report(args.reports, out_dir)
        config = load_config(args.config)
        random.seed(config.seed)
        if args.command == "mine":
            return cmd_mine(config, out_dir)
        if args.command == "usages":
            return cmd_usages(config, out_dir)
        if args.command == "generate":
            return cmd_generate(config, out_dir, no_sandbox=args.no_sandbox)
        if args.command == "rag-index":
            return cmd_rag_index(config, out_dir)
        if args.command == "evaluate":
            return cmd_evaluate(
                config,
                out_dir,
                condition=_CONDITION_BY_FLAG[args.condition],
                cutoff=_parse_cutoff(args.cutoff),
                k=args.k,
                no_sandbox=args.no_sandbox,
            )
        if args.command == "control-set":
            return cmd_control_set(
                config, out_dir, stable_before=args.stable_before, count=args.count
            )
        raise AssertionError(f"unhandled command {args.command}")
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
