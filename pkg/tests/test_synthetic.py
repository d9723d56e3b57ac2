"""Sanity checks for the planted-world fixture generator.

The heavier behaviour (mining recovers the plants, the mock client solves
them) is covered by the CLI and acceptance suites; these tests pin the
manifest shape itself so a fixture regression fails close to the source.
"""

from collections import Counter

from evoforge.clients import behavior_salt
from evoforge.model import ChangeKind
from evoforge.synthetic import (
    EVENTS_PER_KIND,
    StubSandbox,
    manifest_by_path,
    planted_events,
    retention_fixture,
    write_mining_fixture,
)


def test_manifest_has_six_events_per_kind():
    events = planted_events()
    assert len(events) == EVENTS_PER_KIND * len(ChangeKind)
    by_kind = Counter(event.kind for event in events)
    assert set(by_kind.values()) == {EVENTS_PER_KIND}


def test_manifest_paths_are_distinct():
    events = planted_events()
    paths = [event.canonical_path for event in events]
    assert len(set(paths)) == len(paths)
    assert manifest_by_path(events).keys() == set(paths)


def test_only_deprecations_carry_replacements():
    for event in planted_events():
        if event.kind is ChangeKind.DEPRECATION:
            assert event.replacement == f"{event.canonical_path}_v2"
        else:
            assert event.replacement is None


def test_event_salt_tracks_the_required_path():
    events = planted_events()
    deprecation = next(e for e in events if e.kind is ChangeKind.DEPRECATION)
    plain = next(e for e in events if e.kind is ChangeKind.STABILIZATION)
    assert deprecation.salt == behavior_salt(deprecation.replacement)
    assert plain.salt == behavior_salt(plain.canonical_path)
    assert all(0 <= e.salt < 1000 for e in events)


def test_fixture_writes_every_staging_surface(tmp_path):
    write_mining_fixture(tmp_path)
    assert (tmp_path / "docs" / "1.76.0" / "std").is_dir()
    assert (tmp_path / "docs" / "1.77.0" / "std").is_dir()
    assert (tmp_path / "src" / "1.76.0" / "std.rs").is_file()
    assert (tmp_path / "src" / "1.77.0" / "std.rs").is_file()
    assert (tmp_path / "notes" / "RELEASES-1.77.0.md").is_file()
    assert (tmp_path / "repos" / "index.json").is_file()
    assert (tmp_path / "repos" / "widget" / "src" / "lib.rs").is_file()


def test_retention_fixture_counts_and_breakage():
    changes, quirks = retention_fixture(total=30, broken=4)
    assert len(changes) == 30
    assert len(quirks.broken_solution_paths) == 4
    assert all(c.kind is ChangeKind.STABILIZATION for c in changes)
    planted = {c.api.canonical_path for c in changes}
    assert quirks.broken_solution_paths <= planted


def test_stub_sandbox_flags_only_the_marker():
    sandbox = StubSandbox()
    assert sandbox.compile_source("pub fn ok() {}", None)
    assert not sandbox.compile_source("missing_helper();", None)
    good = sandbox.compile_and_run("pub fn ok() {}", None, expected_cases=3)
    bad = sandbox.compile_and_run("missing_helper();", None, expected_cases=3)
    assert good.compiled and all(good.cases.values())
    assert not bad.compiled and not any(bad.cases.values())
    assert sandbox.compile_calls == 2
    assert sandbox.run_calls == 2
