"""Compile and run generated test programs in throwaway directories.

Each job gets its own temp dir with a toolchain override file pinning the
target version, a single-file build, and a run whose stdout carries one
`EVO-CASE <i> PASS|FAIL` line per test case. Timeouts are recorded in the
result, never raised: a case the program never reported counts as failed.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseFailure, SandboxUnavailable
from .model import VersionId

SOLUTION_MARKER = "// SOLUTION-UNDER-TEST"

_CASE_LINE_RE = re.compile(r"^EVO-CASE (\d+) (PASS|FAIL)$")


def splice_solution(program: str, solution: str) -> str:
    """Insert candidate code at the program's marker line."""
    lines = program.split("\n")
    for i, line in enumerate(lines):
        if line.strip() == SOLUTION_MARKER:
            return "\n".join(lines[:i] + [solution] + lines[i + 1 :])
    raise ParseFailure(f"test program has no {SOLUTION_MARKER!r} line")


def toolchain_file_text(version: VersionId) -> str:
    return f'[toolchain]\nchannel = "{version}"\n'


@dataclass(frozen=True, slots=True)
class SandboxResult:
    compiled: bool
    cases: dict[int, bool] = field(default_factory=dict)
    timed_out: bool = False
    compiler_stderr: str = ""

    @property
    def cases_passed(self) -> int:
        return sum(1 for ok in self.cases.values() if ok)


class ToolchainSandbox:
    """Single-file compile-and-run harness around one compiler binary."""

    def __init__(self, rustc_path: str, *,
                 compile_timeout: float = 30.0, run_timeout: float = 10.0) -> None:
        self.rustc_path = rustc_path
        self.compile_timeout = compile_timeout
        self.run_timeout = run_timeout
        self._installed_channels = self._list_installed_channels()

    @classmethod
    def locate(cls, rustc: str = "rustc", **kwargs) -> "ToolchainSandbox":
        found = shutil.which(rustc)
        if found is None:
            raise SandboxUnavailable(f"no {rustc!r} on PATH")
        return cls(found, **kwargs)

    @staticmethod
    def _list_installed_channels() -> tuple[str, ...]:
        rustup = shutil.which("rustup")
        if rustup is None:
            return ()
        try:
            proc = subprocess.run(
                [rustup, "toolchain", "list"], capture_output=True, text=True, timeout=10
            )
        except (subprocess.TimeoutExpired, OSError):
            return ()
        if proc.returncode != 0:
            return ()
        return tuple(
            line.split()[0] for line in proc.stdout.splitlines() if line.strip()
        )

    def resolve_channel(self, target_version: VersionId) -> str | None:
        """Installed toolchain channel to build with, or None for a bare compiler.

        The pin file always names the exact target; when the compiler is a
        multi-toolchain proxy the build is steered to the matching installed
        channel, falling back to whatever is installed rather than failing
        on an impossible download.
        """
        if not self._installed_channels:
            return None
        wanted = str(target_version)
        for channel in self._installed_channels:
            if channel == wanted or channel.startswith(wanted + "-"):
                return channel
        return self._installed_channels[0]

    def _compile(self, workdir: Path, source: str,
                 target_version: VersionId) -> tuple[Path | None, str, bool]:
        (workdir / "rust-toolchain.toml").write_text(toolchain_file_text(target_version))
        main = workdir / "main.rs"
        main.write_text(source, encoding="utf-8")
        binary = workdir / "prog"
        env = dict(os.environ)
        channel = self.resolve_channel(target_version)
        if channel is not None:
            env["RUSTUP_TOOLCHAIN"] = channel
        try:
            proc = subprocess.run(
                [self.rustc_path, "--edition", "2021", "-o", str(binary), str(main)],
                cwd=workdir, capture_output=True, text=True, env=env,
                timeout=self.compile_timeout,
            )
        except subprocess.TimeoutExpired:
            return None, "compile step timed out", True
        if proc.returncode != 0:
            return None, proc.stderr[-4000:], False
        return binary, "", False

    def compile_source(self, source: str, target_version: VersionId) -> bool:
        """Build-only probe; True when the source compiles cleanly."""
        with tempfile.TemporaryDirectory(prefix="evoforge-probe-") as tmp:
            binary, _, _ = self._compile(Path(tmp), source, target_version)
            return binary is not None

    def compile_and_run(self, source: str, target_version: VersionId,
                        expected_cases: int) -> SandboxResult:
        """Build the program, run it, and collect per-case verdicts.

        Cases never reported on stdout (crash, timeout, truncation) are
        recorded as failed so the caller always sees `expected_cases`
        entries.
        """
        with tempfile.TemporaryDirectory(prefix="evoforge-run-") as tmp:
            workdir = Path(tmp)
            binary, stderr, compile_timed_out = self._compile(
                workdir, source, target_version
            )
            if binary is None:
                return SandboxResult(
                    compiled=False,
                    cases={i: False for i in range(expected_cases)},
                    timed_out=compile_timed_out,
                    compiler_stderr=stderr,
                )
            timed_out = False
            try:
                proc = subprocess.run(
                    [str(binary)], cwd=workdir, capture_output=True, text=True,
                    timeout=self.run_timeout,
                )
                stdout = proc.stdout
            except subprocess.TimeoutExpired as exc:
                timed_out = True
                raw = exc.stdout or b""
                stdout = raw.decode("utf-8", "replace") if isinstance(raw, bytes) else raw
            cases = {i: False for i in range(expected_cases)}
            for line in stdout.splitlines():
                m = _CASE_LINE_RE.match(line.strip())
                if m:
                    index = int(m.group(1))
                    if index in cases:
                        cases[index] = m.group(2) == "PASS"
            return SandboxResult(compiled=True, cases=cases, timed_out=timed_out)
