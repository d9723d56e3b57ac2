"""Release-notes mining: announcement grammar and noise immunity."""

from __future__ import annotations

from evoforge.model import ChangeKind, Diagnostics, ItemKind, parse_version
from evoforge.release_notes import notes_filename, parse_release_notes

V177 = parse_version("1.77.0")


def test_stabilize_line_yields_method_signal():
    signals = parse_release_notes("- Stabilize `slice::first_chunk_mut`\n", V177)
    assert len(signals) == 1
    s = signals[0]
    assert s.kind_candidate is ChangeKind.STABILIZATION
    assert s.api.canonical_path == "slice::first_chunk_mut"
    assert s.api.item_kind is ItemKind.METHOD
    assert s.version == V177


def test_deprecated_line_yields_deprecation_signal():
    signals = parse_release_notes(
        "- `mem::uninitialized` has been deprecated in favor of `MaybeUninit`\n",
        V177,
    )
    assert len(signals) == 1
    assert signals[0].kind_candidate is ChangeKind.DEPRECATION
    assert signals[0].api.canonical_path == "mem::uninitialized"


def test_leading_std_segment_becomes_crate():
    signals = parse_release_notes("- Stabilize `std::io::read_to_string`\n", V177)
    assert signals[0].api.crate_name == "std"
    assert signals[0].api.path == ("io", "read_to_string")


def test_noise_lines_produce_nothing():
    noise = "\n".join(
        [
            "- Update LLVM to 17",
            "- Improved error messages for the borrow checker",
            "- Stabilized the new dependency resolver",  # verb, no backtick path
            "- Fix `cargo build --release` docs",  # backticks, no path, no verb
        ]
    )
    diagnostics = Diagnostics()
    assert parse_release_notes(noise, V177, diagnostics) == []
    assert diagnostics.counts["unmatched_line"] == 4


def test_first_backtick_path_wins():
    line = "- Stabilize `alpha::frob_runs` superseding `alpha::frob_once`\n"
    signals = parse_release_notes(line, V177)
    assert len(signals) == 1
    assert signals[0].api.canonical_path == "alpha::frob_runs"


def test_duplicate_announcements_collapse():
    text = (
        "- Stabilize `alpha::frob_runs`\n"
        "- Stabilize `alpha::frob_runs` (again, in the summary section)\n"
    )
    diagnostics = Diagnostics()
    signals = parse_release_notes(text, V177, diagnostics)
    assert len(signals) == 1
    assert diagnostics.counts["duplicate_announcement"] == 1


def test_planted_corpus_recovers_exactly_fifteen():
    # 10 stabilization lines, 5 deprecation lines, 5 noise lines.
    stab = [f"- Stabilize `alpha::planted_stab_{i}`" for i in range(10)]
    depr = [f"- Deprecate `alpha::planted_depr_{i}`" for i in range(5)]
    noise = [
        "# Version 1.77.0 (2024-03-21)",
        "- Update the bundled linker",
        "- Documentation overhaul for the book",
        "- Various performance wins in `--timings` output",
        "- Internal refactor of lint infrastructure",
    ]
    text = "\n".join(stab + depr + noise) + "\n"
    diagnostics = Diagnostics()
    signals = parse_release_notes(text, V177, diagnostics)

    assert len(signals) == 15
    kinds = [s.kind_candidate for s in signals]
    assert kinds.count(ChangeKind.STABILIZATION) == 10
    assert kinds.count(ChangeKind.DEPRECATION) == 5
    assert diagnostics.counts["unmatched_line"] == 5


def test_notes_filename_convention():
    assert notes_filename(V177) == "RELEASES-1.77.0.md"
