"""Find real-world uses of changed APIs in staged repository snapshots.

A usage hit must look like a call or path expression, not a mention in a
comment or string literal, and every kept example carries a verification
tier that says how hard the claim "this repo really used that API at that
version" was checked: manifest admission, static path resolution, or an
actual probe compile.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Callable, Iterable, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import LineOutOfRange, MalformedManifest, UnknownVersionDate
from .model import (
    OFFICIAL_CRATES,
    ApiIdentity,
    ChangeRecord,
    Diagnostics,
    UsageExample,
    VerificationTier,
    VersionId,
)

CONTEXT_RADIUS = 10  # lines kept on each side of a hit


@dataclass(frozen=True, slots=True)
class RepoIndexEntry:
    """One staged repository snapshot."""

    repo_url: str
    updated_on: date
    local_path: str

    def to_json_dict(self) -> dict:
        return {
            "repo_url": self.repo_url,
            "updated_on": self.updated_on.isoformat(),
            "local_path": self.local_path,
        }

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "RepoIndexEntry":
        return cls(d["repo_url"], date.fromisoformat(d["updated_on"]), d["local_path"])


@dataclass(frozen=True, slots=True)
class UsageHit:
    file_path: str
    hit_line: int
    line_text: str


def select_repos(index: Iterable[Mapping | RepoIndexEntry], release_date: date) -> list[str]:
    """Repos updated strictly after the release shipped, order preserved."""
    selected = []
    for entry in index:
        if isinstance(entry, RepoIndexEntry):
            url, updated = entry.repo_url, entry.updated_on
        else:
            url = entry["repo_url"]
            updated = entry["updated_on"]
            if isinstance(updated, str):
                updated = date.fromisoformat(updated)
        if updated > release_date:
            selected.append(url)
    return selected


# ---------------------------------------------------------------------------
# lexing and hit detection


def mask_non_code(text: str) -> list[str]:
    """Each line with comments and string/char literals blanked to spaces.

    Tracks block-comment nesting across lines; ordinary string literals are
    assumed not to span lines, which holds for this fixture dialect.
    """
    masked_lines: list[str] = []
    block_depth = 0
    for line in text.splitlines():
        out = []
        i = 0
        n = len(line)
        while i < n:
            ch = line[i]
            pair = line[i : i + 2]
            if block_depth > 0:
                if pair == "*/":
                    block_depth -= 1
                    out.append("  ")
                    i += 2
                elif pair == "/*":
                    block_depth += 1
                    out.append("  ")
                    i += 2
                else:
                    out.append(" ")
                    i += 1
                continue
            if pair == "//":
                out.append(" " * (n - i))
                break
            if pair == "/*":
                block_depth += 1
                out.append("  ")
                i += 2
                continue
            if ch == '"':
                j = i + 1
                while j < n:
                    if line[j] == "\\":
                        j += 2
                        continue
                    if line[j] == '"':
                        break
                    j += 1
                end = min(j + 1, n)
                out.append(" " * (end - i))
                i = end
                continue
            if ch == "'":
                m = re.match(r"'(\\.|[^'\\])'", line[i:])
                if m:
                    out.append(" " * m.end())
                    i += m.end()
                    continue
                out.append("'")  # a lifetime tick, not a literal
                i += 1
                continue
            out.append(ch)
            i += 1
        masked_lines.append("".join(out))
    return masked_lines


def _line_has_usage(masked_line: str, segment: str) -> bool:
    for m in re.finditer(rf"(?<![A-Za-z0-9_]){re.escape(segment)}(?![A-Za-z0-9_])", masked_line):
        before = masked_line[: m.start()]
        after = masked_line[m.end() :].lstrip()
        if before.endswith(".") or before.endswith("::"):
            return True
        if after.startswith("(") or after.startswith("::") or after.startswith("!"):
            return True
    return False


def find_usages(repo_dir: Path | str, api: ApiIdentity,
                diagnostics: Diagnostics | None = None) -> list[UsageHit]:
    """Call/path-expression occurrences of the API's final segment.

    Comment and string occurrences never count; results are ordered by
    (file_path, hit_line) with paths kept repo-relative.
    """
    root = Path(repo_dir)
    hits: list[UsageHit] = []
    for source_file in sorted(root.rglob("*.rs"), key=lambda p: p.relative_to(root).as_posix()):
        try:
            text = source_file.read_text(encoding="utf-8")
        except (UnicodeDecodeError, OSError):
            if diagnostics is not None:
                diagnostics.bump("unreadable_file")
            continue
        masked = mask_non_code(text)
        original = text.splitlines()
        rel = source_file.relative_to(root).as_posix()
        for lineno, masked_line in enumerate(masked, start=1):
            if _line_has_usage(masked_line, api.final_segment):
                hits.append(UsageHit(rel, lineno, original[lineno - 1]))
    return hits


def extract_context(file_text: str, hit_line: int) -> str:
    """Up to ten lines of context on each side of the hit, clipped."""
    lines = file_text.splitlines()
    if hit_line < 1 or hit_line > len(lines):
        raise LineOutOfRange(f"line {hit_line} outside 1..{len(lines)}")
    lo = max(1, hit_line - CONTEXT_RADIUS)
    hi = min(len(lines), hit_line + CONTEXT_RADIUS)
    return "\n".join(lines[lo - 1 : hi])


# ---------------------------------------------------------------------------
# version requirement semantics


def _parse_partial(text: str) -> tuple[int, int | None, int | None]:
    parts = text.split(".")
    if not (1 <= len(parts) <= 3):
        raise MalformedManifest(f"bad version requirement: {text!r}")
    try:
        major = int(parts[0])
        minor = int(parts[1]) if len(parts) > 1 else None
        patch = int(parts[2]) if len(parts) > 2 else None
    except ValueError as exc:
        raise MalformedManifest(f"bad version requirement: {text!r}") from exc
    return major, minor, patch


def _floor(major: int, minor: int | None, patch: int | None) -> VersionId:
    return VersionId(major, minor or 0, patch or 0)


def _caret_upper(major: int, minor: int | None, patch: int | None) -> VersionId:
    if major > 0:
        return VersionId(major + 1, 0, 0)
    if minor is not None and minor > 0:
        return VersionId(0, minor + 1, 0)
    if minor is not None and patch is not None:
        return VersionId(0, 0, patch + 1)
    if minor is not None:
        return VersionId(0, minor + 1, 0)
    return VersionId(1, 0, 0)


def _comparator_admits(comparator: str, version: VersionId) -> bool:
    comparator = comparator.strip()
    if not comparator:
        raise MalformedManifest("empty comparator")
    if comparator == "*":
        return True
    m = re.match(r"^(\^|~|=|>=|<=|>|<)?\s*(.+)$", comparator)
    op, rest = m.group(1), m.group(2).strip()
    if rest.endswith((".*", ".x", ".X")):
        if op not in (None, "="):
            raise MalformedManifest(f"wildcard with operator: {comparator!r}")
        major, minor, _ = _parse_partial(rest[:-2])
        low = _floor(major, minor, None)
        high = VersionId(major, minor + 1, 0) if minor is not None else VersionId(major + 1, 0, 0)
        return low <= version < high
    major, minor, patch = _parse_partial(rest)
    low = _floor(major, minor, patch)
    if op is None or op == "^":
        return low <= version < _caret_upper(major, minor, patch)
    if op == "~":
        high = VersionId(major, minor + 1, 0) if minor is not None else VersionId(major + 1, 0, 0)
        return low <= version < high
    if op == "=":
        if minor is None:
            return version.major == major
        if patch is None:
            return (version.major, version.minor) == (major, minor)
        return version == low
    if op == ">=":
        return version >= low
    if op == ">":
        return version > low
    if op == "<=":
        return version <= low
    return version < low


def requirement_admits(requirement: str, version: VersionId) -> bool:
    """Whether a dependency requirement string admits the given version.

    A bare version means caret semantics; comma-separated comparators all
    have to hold. Partial versions in ordering comparators are treated as
    their zero-filled floor.
    """
    if not requirement.strip():
        raise MalformedManifest("empty version requirement")
    return all(
        _comparator_admits(c, version) for c in requirement.split(",")
    )


def _dependency_requirement(manifest: Mapping, crate_name: str) -> str | None:
    deps = manifest.get("dependencies", {})
    entry = deps.get(crate_name)
    if entry is None:
        return None
    if isinstance(entry, str):
        return entry
    if isinstance(entry, Mapping):
        version = entry.get("version")
        if isinstance(version, str):
            return version
        raise MalformedManifest(f"dependency {crate_name!r} has no version string")
    raise MalformedManifest(f"dependency {crate_name!r} is neither string nor table")


def verify_version(
    snippet: str,
    manifest_text: str,
    target_version: VersionId,
    api: ApiIdentity,
    compile_hook: Callable[[], bool] | None = None,
) -> VerificationTier | None:
    """Vet one usage against its repo manifest; None means rejected.

    Tier ladder: the manifest must admit the target version (for standard
    library crates the rust-version floor stands in, absent means vacuously
    admitted); a snippet that token-resolves the API earns static; a
    successful probe compile earns compiled.
    """
    try:
        manifest = tomllib.loads(manifest_text)
    except tomllib.TOMLDecodeError as exc:
        raise MalformedManifest(f"unparseable manifest: {exc}") from exc

    if api.crate_name in OFFICIAL_CRATES:
        floor_text = manifest.get("package", {}).get("rust-version")
        if floor_text is not None:
            if not isinstance(floor_text, str):
                raise MalformedManifest("rust-version must be a string")
            major, minor, patch = _parse_partial(floor_text)
            if target_version < _floor(major, minor, patch):
                return None
    else:
        requirement = _dependency_requirement(manifest, api.crate_name)
        if requirement is None or not requirement_admits(requirement, target_version):
            return None

    tier = VerificationTier.MANIFEST
    masked = mask_non_code(snippet)
    if any(_line_has_usage(line, api.final_segment) for line in masked):
        tier = VerificationTier.STATIC
        if compile_hook is not None and compile_hook():
            tier = VerificationTier.COMPILED
    return tier


# ---------------------------------------------------------------------------
# end-to-end mining


def mine_usages(
    changes: Iterable[ChangeRecord],
    repo_index: list[RepoIndexEntry],
    version_dates: Mapping[VersionId, date],
    *,
    cap_per_api: int = 3,
    compile_hook: Callable[[], bool] | None = None,
    diagnostics: Diagnostics | None = None,
) -> list[UsageExample]:
    """Usage examples for every change, capped per API by strongest tier."""
    examples_by_api: dict[tuple[str, str], list[UsageExample]] = {}
    for change in changes:
        release_date = version_dates.get(change.to_version)
        if release_date is None:
            raise UnknownVersionDate(f"no release date for {change.to_version}")
        fresh_urls = set(select_repos(repo_index, release_date))
        collected: list[UsageExample] = []
        for entry in repo_index:
            if entry.repo_url not in fresh_urls:
                continue
            repo_dir = Path(entry.local_path)
            manifest_path = repo_dir / "Cargo.toml"
            if not manifest_path.is_file():
                if diagnostics is not None:
                    diagnostics.bump("repo_missing_manifest")
                continue
            manifest_text = manifest_path.read_text(encoding="utf-8")
            for hit in find_usages(repo_dir, change.api, diagnostics):
                file_text = (repo_dir / hit.file_path).read_text(encoding="utf-8")
                snippet = extract_context(file_text, hit.hit_line)
                tier = verify_version(
                    snippet, manifest_text, change.to_version, change.api, compile_hook
                )
                if tier is None:
                    if diagnostics is not None:
                        diagnostics.bump("usage_rejected_by_manifest")
                    continue
                collected.append(
                    UsageExample.create(
                        change.api,
                        entry.repo_url,
                        hit.file_path,
                        hit.hit_line,
                        snippet,
                        change.to_version,
                        tier,
                        entry.updated_on,
                    )
                )
        collected.sort(key=lambda e: (-int(e.verification_tier), e.example_id))
        key = (change.api.crate_name, change.api.canonical_path)
        examples_by_api.setdefault(key, []).extend(collected[:cap_per_api])

    flat: list[UsageExample] = []
    for key in sorted(examples_by_api):
        flat.extend(examples_by_api[key])
    return flat
