"""Fabricated corpora and stand-in collaborators for offline runs.

Everything here exists so the pipeline can be driven end to end without a
network, a model endpoint, or (when using the stub sandbox) a compiler:
planted documentation trees, source snapshots, release notes with a known
answer key, and draft corpora with a chosen number of planted failures.

The planted world is deliberately word-pool shaped (frob/quell/gather...
x runs/cells/spans/links) so every item name telegraphs which category it
was planted for, and the planting functions return a manifest the tests
can score mining output against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .clients import MockQuirks, behavior_salt
from .model import (
    ApiIdentity,
    ChangeKind,
    ChangeRecord,
    VersionId,
    parse_api_path,
    parse_signature,
)
from .sandbox import SandboxResult

FIXTURE_FROM = VersionId(1, 76, 0)
FIXTURE_TO = VersionId(1, 77, 0)

_MODULES = ("alpha", "beta", "gamma", "delta", "sigma", "omega")
_VERBS = ("frob", "quell", "gather", "spool", "weave", "lattice")

# One noun per category: every planted item's name ends with the noun of
# the category it was planted for, which makes mining failures readable.
_NOUN_BY_KIND = {
    ChangeKind.STABILIZATION: "runs",
    ChangeKind.SIGNATURE_CHANGE: "cells",
    ChangeKind.BEHAVIORAL_CHANGE: "spans",
    ChangeKind.DEPRECATION: "links",
}

EVENTS_PER_KIND = 6

_OLD_STABLE_BANNER = "stable since 1.60.0"
_ANCIENT_STABLE_BANNER = "stable since 1.50.0"


@dataclass(frozen=True)
class PlantedEvent:
    """One deliberately staged evolution event and its expected category."""

    module: str
    name: str
    kind: ChangeKind
    replacement: str | None = None

    @property
    def canonical_path(self) -> str:
        return f"{self.module}::{self.name}"

    @property
    def required_path(self) -> str:
        """The path a correct task solution must define (replacement wins)."""
        return self.replacement or self.canonical_path

    @property
    def salt(self) -> int:
        return behavior_salt(self.required_path)


def planted_events() -> list[PlantedEvent]:
    """The 24-event answer key: six per category, all paths distinct."""
    events: list[PlantedEvent] = []
    for kind in ChangeKind:
        noun = _NOUN_BY_KIND[kind]
        for i in range(EVENTS_PER_KIND):
            module = _MODULES[i]
            name = f"{_VERBS[i]}_{noun}"
            replacement = (
                f"{module}::{name}_v2" if kind is ChangeKind.DEPRECATION else None
            )
            events.append(PlantedEvent(module, name, kind, replacement))
    return events


# ---------------------------------------------------------------------------
# Documentation trees


def _doc_page(title: str, signature: str, banner: str, body: str) -> str:
    return (
        f"<html><head><title>{title}</title></head>\n"
        "<body>\n"
        f"<h1>{title}</h1>\n"
        f'<pre class="signature">{signature}</pre>\n'
        f'<div class="stability">{banner}</div>\n'
        f'<div class="docblock">{body}</div>\n'
        "</body></html>\n"
    )


def _write_page(
    docs_root: Path, version: VersionId, path: str, signature: str,
    banner: str, body: str,
) -> None:
    page_dir = docs_root / str(version) / "std"
    page_dir.mkdir(parents=True, exist_ok=True)
    file_name = path.replace("::", "__") + ".html"
    (page_dir / file_name).write_text(
        _doc_page(f"std::{path}", signature, banner, body), encoding="utf-8"
    )


def _plain_signature(name: str) -> str:
    return f"pub fn {name}(x: i64) -> i64"


def _steady_items() -> list[tuple[str, str]]:
    """Background APIs that never move: (path, doc body) pairs."""
    items = [(f"util::{verb}_beams", verb) for verb in _VERBS]
    items += [(f"util::{verb}_gauges", verb) for verb in _VERBS[:2]]
    return [
        (
            path,
            f"Doubles a settled reading and folds in calibration constant "
            f"{behavior_salt(path)}.",
        )
        for path, _ in items
    ]


def _write_doc_trees(docs_root: Path, events: list[PlantedEvent]) -> None:
    for event in events:
        path = event.canonical_path
        name = event.name
        salt = event.salt
        if event.kind is ChangeKind.STABILIZATION:
            body = (
                f"Doubles a staged reading and folds in calibration constant {salt}."
            )
            _write_page(
                docs_root, FIXTURE_FROM, path, _plain_signature(name),
                "unstable", body,
            )
            _write_page(
                docs_root, FIXTURE_TO, path, _plain_signature(name),
                f"stable since {FIXTURE_TO}",
                body + " Ready for production readings.",
            )
        elif event.kind is ChangeKind.SIGNATURE_CHANGE:
            body = (
                f"Doubles a gated reading and folds in calibration constant {salt}."
            )
            _write_page(
                docs_root, FIXTURE_FROM, path, _plain_signature(name),
                _OLD_STABLE_BANNER, body,
            )
            _write_page(
                docs_root, FIXTURE_TO, path,
                f"pub fn {name}(x: i64, clamp: bool) -> i64",
                _OLD_STABLE_BANNER, body,
            )
        elif event.kind is ChangeKind.BEHAVIORAL_CHANGE:
            lead = f"Doubles a live reading and folds in calibration constant {salt}."
            _write_page(
                docs_root, FIXTURE_FROM, path, _plain_signature(name),
                _OLD_STABLE_BANNER, lead + " Truncates on overflow.",
            )
            _write_page(
                docs_root, FIXTURE_TO, path, _plain_signature(name),
                _OLD_STABLE_BANNER, lead + " Saturates on overflow.",
            )
        else:
            replacement = event.replacement
            _write_page(
                docs_root, FIXTURE_FROM, path, _plain_signature(name),
                _OLD_STABLE_BANNER, "Raw accessor for one reading.",
            )
            _write_page(
                docs_root, FIXTURE_TO, path, _plain_signature(name),
                f"deprecated since {FIXTURE_TO}: use `{replacement}` instead",
                f"Superseded by the calibrated variant; see constant {salt}.",
            )
            repl_name = f"{name}_v2"
            repl_body = (
                f"Doubles a reading and folds in calibration constant {salt}."
            )
            for version in (FIXTURE_FROM, FIXTURE_TO):
                _write_page(
                    docs_root, version, replacement, _plain_signature(repl_name),
                    _ANCIENT_STABLE_BANNER, repl_body,
                )
    for path, body in _steady_items():
        for version in (FIXTURE_FROM, FIXTURE_TO):
            _write_page(
                docs_root, version, path,
                _plain_signature(path.rsplit("::", 1)[1]),
                _ANCIENT_STABLE_BANNER, body,
            )


# ---------------------------------------------------------------------------
# Source snapshots


def _fn_item(
    name: str, salt: int, *, attrs: tuple[str, ...] = (),
    header_extra: str = "", body: str | None = None,
) -> str:
    lines = [f"    {attr}" for attr in attrs]
    lines.append(f"    pub fn {name}(x: i64{header_extra}) -> i64 {{")
    lines.append(f"        {body or f'x.wrapping_mul(2).wrapping_add({salt})'}")
    lines.append("    }")
    return "\n".join(lines)


def _stable_attr(name: str, since: str) -> str:
    return f'#[stable(feature = "{name}", since = "{since}")]'


def _write_source_snapshots(src_root: Path, events: list[PlantedEvent]) -> None:
    by_module_old: dict[str, list[str]] = {}
    by_module_new: dict[str, list[str]] = {}

    def plant(module: str, old_item: str, new_item: str) -> None:
        by_module_old.setdefault(module, []).append(old_item)
        by_module_new.setdefault(module, []).append(new_item)

    for event in events:
        name = event.name
        own_salt = behavior_salt(event.canonical_path)
        if event.kind is ChangeKind.STABILIZATION:
            plant(
                event.module,
                _fn_item(name, own_salt),
                _fn_item(name, own_salt, attrs=(_stable_attr(name, str(FIXTURE_TO)),)),
            )
        elif event.kind is ChangeKind.SIGNATURE_CHANGE:
            old_attrs = (_stable_attr(name, "1.60.0"),)
            plant(
                event.module,
                _fn_item(name, own_salt, attrs=old_attrs),
                _fn_item(name, own_salt, attrs=old_attrs, header_extra=", clamp: bool"),
            )
        elif event.kind is ChangeKind.BEHAVIORAL_CHANGE:
            attrs = (_stable_attr(name, "1.60.0"),)
            plant(
                event.module,
                _fn_item(name, own_salt, attrs=attrs),
                _fn_item(
                    name, own_salt, attrs=attrs,
                    body=(
                        f"let doubled = x.wrapping_mul(2); "
                        f"doubled.wrapping_add({own_salt})"
                    ),
                ),
            )
        else:
            repl_name = f"{name}_v2"
            depr_attr = (
                f'#[deprecated(since = "{FIXTURE_TO}", '
                f'note = "use {event.replacement} instead")]'
            )
            plant(
                event.module,
                _fn_item(name, own_salt, attrs=(_stable_attr(name, "1.60.0"),)),
                _fn_item(name, own_salt, attrs=(_stable_attr(name, "1.60.0"), depr_attr)),
            )
            repl_item = _fn_item(
                repl_name, event.salt, attrs=(_stable_attr(repl_name, "1.50.0"),)
            )
            plant(event.module, repl_item, repl_item)

    for path, _ in _steady_items():
        module, name = path.rsplit("::", 1)
        item = _fn_item(
            name, behavior_salt(path), attrs=(_stable_attr(name, "1.50.0"),)
        )
        plant(module, item, item)

    # Source-only behavioral drift: documented nowhere, so the fuser can
    # only file it on the low-confidence side.
    for name in ("weave_shims", "spool_shims"):
        salt = behavior_salt(f"hidden::{name}")
        plant(
            "hidden",
            _fn_item(name, salt, attrs=(_stable_attr(name, "1.60.0"),)),
            _fn_item(
                name, salt, attrs=(_stable_attr(name, "1.60.0"),),
                body=f"let doubled = x.wrapping_mul(2); doubled.wrapping_add({salt})",
            ),
        )

    for version, by_module in (
        (FIXTURE_FROM, by_module_old),
        (FIXTURE_TO, by_module_new),
    ):
        chunks = []
        for module in sorted(by_module):
            body = "\n\n".join(by_module[module])
            chunks.append(f"pub mod {module} {{\n{body}\n}}")
        out_dir = src_root / str(version)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "std.rs").write_text("\n\n".join(chunks) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Release notes


def _write_release_notes(notes_root: Path, events: list[PlantedEvent]) -> None:
    lines = [
        f"# Version {FIXTURE_TO} (2024-03-21)",
        "",
        "Language highlights went here in the real notes; the library",
        "section below is what the miner reads.",
        "",
        "## Library",
        "",
    ]
    for event in events:
        if event.kind is ChangeKind.STABILIZATION:
            lines.append(f"- Stabilize `{event.canonical_path}`.")
        elif event.kind is ChangeKind.DEPRECATION:
            lines.append(
                f"- Deprecate `{event.canonical_path}` in favor of "
                f"`{event.replacement}`."
            )
    lines.append("")
    notes_root.mkdir(parents=True, exist_ok=True)
    (notes_root / f"RELEASES-{FIXTURE_TO}.md").write_text(
        "\n".join(lines), encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Usage repositories


def _write_repo_fixture(repos_root: Path, events: list[PlantedEvent]) -> None:
    repo_dir = repos_root / "widget"
    (repo_dir / "src").mkdir(parents=True, exist_ok=True)
    (repo_dir / "Cargo.toml").write_text(
        '[package]\n'
        'name = "widget"\n'
        'version = "0.1.0"\n'
        'rust-version = "1.77"\n',
        encoding="utf-8",
    )
    lines = ["pub fn exercise_all(x: i64) -> i64 {", "    let mut total = 0i64;"]
    for event in events:
        name = event.canonical_path.rsplit("::", 1)[1]
        lines.append(f"    total = total.wrapping_add({name}(x));")
    lines += ["    total", "}"]
    (repo_dir / "src" / "lib.rs").write_text("\n".join(lines) + "\n", encoding="utf-8")
    index = [
        {
            "repo_url": "https://example.org/acme/widget",
            "updated_on": "2024-05-01",
            "local_path": "widget",
        }
    ]
    (repos_root / "index.json").write_text(
        json.dumps(index, indent=2) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Entry points


def write_mining_fixture(stage_root: Path | str) -> list[PlantedEvent]:
    """Stage notes, doc trees, source snapshots, and one usage repo.

    Returns the planting manifest: exactly 24 events, six per category,
    plus (not in the manifest) two source-only behavioral drifts destined
    for the low-confidence side and a bed of never-changing control APIs.
    """
    stage_root = Path(stage_root)
    events = planted_events()
    _write_doc_trees(stage_root / "docs", events)
    _write_source_snapshots(stage_root / "src", events)
    _write_release_notes(stage_root / "notes", events)
    _write_repo_fixture(stage_root / "repos", events)
    return events


def write_run_config(
    root: Path | str, *, provider: str = "mock", seed: int = 0
) -> Path:
    """Write an evo.config.json pointing at write_mining_fixture's layout."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    config = {
        "versions": [str(FIXTURE_FROM), str(FIXTURE_TO)],
        "staging_paths": {
            "notes_dir": "stage/notes",
            "docs_dir": "stage/docs",
            "src_dir": "stage/src",
            "repos_dir": "stage/repos",
            "repo_index": "stage/repos/index.json",
        },
        "crates": ["std"],
        "model": {"provider": provider, "model_id": provider},
        "seed": seed,
    }
    path = root / "evo.config.json"
    path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return path


def stage_run_directory(root: Path | str, *, provider: str = "mock") -> Path:
    """Fixture layout + config in one call; returns the config path."""
    root = Path(root)
    write_mining_fixture(root / "stage")
    return write_run_config(root, provider=provider)


def retention_fixture(
    total: int = 684, broken: int = 96
) -> tuple[list[ChangeRecord], MockQuirks]:
    """A large change corpus where exactly `broken` drafts cannot compile.

    The quirk marks the first `broken` paths so the mock client plants a
    call to an undefined helper in those solutions; the stub sandbox (and
    the real toolchain) reject exactly those drafts.
    """
    if broken > total:
        raise ValueError("cannot break more drafts than exist")
    changes: list[ChangeRecord] = []
    broken_paths: set[str] = set()
    for i in range(total):
        name = f"feed_{i:03d}"
        path = f"bulk{i // 60:02d}::{name}"
        record = ChangeRecord.create(
            parse_api_path(path),
            ChangeKind.STABILIZATION,
            FIXTURE_TO,
            from_version=FIXTURE_FROM,
            new_signature=parse_signature(_plain_signature(name)),
            new_doc=(
                f"Doubles a bulk reading and folds in calibration constant "
                f"{behavior_salt(path)}."
            ),
            provenance=("docdiff",),
        )
        changes.append(record)
        if i < broken:
            broken_paths.add(path)
    return changes, MockQuirks(broken_solution_paths=frozenset(broken_paths))


def manifest_by_path(events: list[PlantedEvent]) -> dict[str, PlantedEvent]:
    return {event.canonical_path: event for event in events}


def expected_replacement(event: PlantedEvent) -> ApiIdentity | None:
    if event.replacement is None:
        return None
    return parse_api_path(event.replacement)


class StubSandbox:
    """Compiler stand-in that greenlights everything except planted breakage.

    The mock client marks its deliberately broken solutions with a call to
    an undefined `missing_helper`, which is exactly what this stub looks
    for. Anything else "compiles" and passes all its cases, which matches
    what the real toolchain does with mock-generated reference solutions.
    """

    def __init__(self) -> None:
        self.compile_calls = 0
        self.run_calls = 0

    def compile_source(self, source: str, target_version) -> bool:
        self.compile_calls += 1
        return "missing_helper" not in source

    def compile_and_run(self, source: str, target_version,
                        expected_cases: int) -> SandboxResult:
        self.run_calls += 1
        if "missing_helper" in source:
            return SandboxResult(
                compiled=False, cases={i: False for i in range(expected_cases)},
                compiler_stderr="cannot find function `missing_helper`",
            )
        return SandboxResult(
            compiled=True, cases={i: True for i in range(expected_cases)}
        )
