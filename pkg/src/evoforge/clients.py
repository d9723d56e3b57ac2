"""Text-generation backends for the task pipeline.

Two implementations of the same small interface: a deterministic mock that
fabricates a closed, self-consistent world of APIs (used by the test suite
and offline runs), and an HTTP client for a chat-completion endpoint.

The mock reads machine-parseable field lines out of each prompt (stage,
required path, change kind, and so on) and fabricates its reply from them,
so identical prompts always produce identical text.
"""

from __future__ import annotations

import hashlib
import os
import re
import threading
from dataclasses import dataclass, field
from datetime import date
from typing import Mapping, Protocol

import requests

from .errors import ModelUnavailable

_I64_MIN = -(2**63)
_I64_SPAN = 2**64

_HEADER_RE = re.compile(r"^(\S+::\S+) \[([a-z_]+)\] \S+->\S+$")


def behavior_salt(required_path: str) -> int:
    """Small stable constant keyed to an API path.

    The mock world gives every API the same shape of behavior (double the
    input, add a constant); the constant is what distinguishes APIs, so a
    candidate only produces correct output if it knows which API the task
    is really about.
    """
    digest = hashlib.sha256(required_path.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") % 1000


def expected_output(required_path: str, x: int) -> int:
    """Reference behavior with 64-bit wrapping semantics."""
    raw = x * 2 + behavior_salt(required_path)
    return (raw - _I64_MIN) % _I64_SPAN + _I64_MIN


def render_reference_solution(required_path: str) -> str:
    segment = required_path.rsplit("::", 1)[-1]
    salt = behavior_salt(required_path)
    return (
        f"pub fn {segment}(x: i64) -> i64 {{ "
        f"x.wrapping_mul(2).wrapping_add({salt}) }}"
    )


def render_case(required_path: str, x: int) -> str:
    segment = required_path.rsplit("::", 1)[-1]
    return f"assert_eq!({segment}({x}), {expected_output(required_path, x)});"


class ModelClient(Protocol):
    model_id: str
    cutoff_date: date | None

    def generate(self, prompt: str, temperature: float, max_tokens: int) -> str: ...


@dataclass
class MockQuirks:
    """Switches that make the mock misbehave in controlled ways.

    Keys are required paths (the path a task's stanza requires), so a test
    can break exactly one pipeline without touching the rest.
    """

    leak_api_in_query: frozenset[str] = frozenset()
    broken_solution_paths: frozenset[str] = frozenset()
    empty_test_program_paths: frozenset[str] = frozenset()
    judge_reject: Mapping[str, str] = field(default_factory=dict)
    judge_reject_once: Mapping[str, str] = field(default_factory=dict)
    garbage_judge_paths: frozenset[str] = frozenset()
    duplicate_augment: bool = False


_QUERY_SLANT = {
    "stabilization": "A long-requested routine recently became available.",
    "signature_change": "An interface you rely on was recently reshaped.",
    "behavioral_change": "A routine you rely on quietly changed what it computes.",
    "deprecation": "An old entry point is on its way out; prefer the current one.",
}


class MockModelClient:
    """Closed-world deterministic stand-in for a text-generation model."""

    def __init__(self, quirks: MockQuirks | None = None, *,
                 model_id: str = "mock", cutoff_date: date | None = None) -> None:
        self.quirks = quirks or MockQuirks()
        self.model_id = model_id
        self.cutoff_date = cutoff_date

    @staticmethod
    def _fields(prompt: str) -> dict[str, str]:
        parsed: dict[str, str] = {}
        for line in prompt.splitlines():
            m = re.match(r"^([a-z][a-z ]*): (.*)$", line)
            if m and m.group(1) not in parsed:
                parsed[m.group(1)] = m.group(2)
        return parsed

    def generate(self, prompt: str, temperature: float, max_tokens: int) -> str:
        fields = self._fields(prompt)
        stage = fields.get("task stage", "")
        if stage == "query":
            return self._query(fields)
        if stage == "solution":
            return self._solution(fields)
        if stage == "test_program":
            return self._test_program(fields)
        if stage == "augment":
            return self._augment(prompt, fields)
        if stage == "judge":
            return self._judge(fields)
        if stage == "summarize":
            return self._summarize(prompt)
        if stage == "candidate":
            return self._candidate(prompt)
        return "unsupported stage"

    def _query(self, fields: dict[str, str]) -> str:
        required = fields.get("required path", "")
        kind = fields.get("change kind", "stabilization")
        salt = behavior_salt(required)
        slant = _QUERY_SLANT.get(kind, _QUERY_SLANT["stabilization"])
        query = (
            f"{slant} Write a function that doubles a reading and folds in "
            f"calibration constant {salt}."
        )
        if required in self.quirks.leak_api_in_query or "*" in self.quirks.leak_api_in_query:
            query += f" Use {required} for this."
        return query

    def _solution(self, fields: dict[str, str]) -> str:
        required = fields.get("required path", "")
        if required in self.quirks.broken_solution_paths:
            segment = required.rsplit("::", 1)[-1]
            # references an undefined helper, so the build always fails
            return f"pub fn {segment}(x: i64) -> i64 {{ missing_helper(x) }}"
        return render_reference_solution(required)

    def _test_program(self, fields: dict[str, str]) -> str:
        required = fields.get("required path", "")
        if required in self.quirks.empty_test_program_paths:
            return ""
        return "\n".join(render_case(required, x) for x in (1, 2))

    def _augment(self, prompt: str, fields: dict[str, str]) -> str:
        required = fields.get("required path", "")
        try:
            target = int(fields.get("case target", "4"))
        except ValueError:
            target = 4
        existing = prompt.count("assert_eq!")
        inputs = list(range(3, 3 + max(0, target - existing)))
        cases = [render_case(required, x) for x in inputs]
        if self.quirks.duplicate_augment and cases:
            cases.insert(0, cases[0])
        return "\n".join(cases)

    def _judge(self, fields: dict[str, str]) -> str:
        required = fields.get("required path", "")
        if required in self.quirks.garbage_judge_paths:
            return "This one seems broadly fine to me, probably."
        attempt = fields.get("attempt", "1")
        if required in self.quirks.judge_reject:
            reason = self.quirks.judge_reject[required]
            return f"REJECT:{reason}\nThe task does not hold together."
        if attempt == "1" and required in self.quirks.judge_reject_once:
            reason = self.quirks.judge_reject_once[required]
            return f"REJECT:{reason}\nThe task does not hold together."
        return "ACCEPT\nQuery, solution, and cases agree."

    @staticmethod
    def _summarize(prompt: str) -> str:
        headers = [
            line.strip() for line in prompt.splitlines()
            if _HEADER_RE.match(line.strip())
        ]
        return "\n".join(headers) if headers else "no relevant documents found"

    @staticmethod
    def _candidate(prompt: str) -> str:
        lines = [line.strip() for line in prompt.splitlines()]
        header = None
        header_at = -1
        for i, line in enumerate(lines):
            m = _HEADER_RE.match(line)
            if m:
                header = m
                header_at = i
                break
        if header is None:
            return "pub fn solve(x: i64) -> i64 { x.wrapping_mul(2) }"
        full_path, kind = header.group(1), header.group(2)
        required = full_path.split("::", 1)[1]
        if kind == "deprecation":
            for line in lines[header_at + 1 :]:
                if _HEADER_RE.match(line):
                    break
                m = re.match(r"^replacement: (\S+)$", line)
                if m:
                    required = m.group(1).split("::", 1)[1]
                    break
        return render_reference_solution(required)


class HttpModelClient:
    """Chat-completion HTTP backend; calls are serialized through one lock."""

    def __init__(self, endpoint: str, api_key: str | None, model_id: str, *,
                 cutoff_date: date | None = None, timeout: float = 120.0) -> None:
        self.endpoint = endpoint
        self.api_key = api_key
        self.model_id = model_id
        self.cutoff_date = cutoff_date
        self.timeout = timeout
        self._lock = threading.Lock()

    @classmethod
    def from_env(cls, model_id: str, *, cutoff_date: date | None = None) -> "HttpModelClient":
        endpoint = os.environ.get("EVO_MODEL_ENDPOINT")
        if not endpoint:
            raise ModelUnavailable("EVO_MODEL_ENDPOINT is not set")
        return cls(endpoint, os.environ.get("EVO_MODEL_KEY"), model_id,
                   cutoff_date=cutoff_date)

    def generate(self, prompt: str, temperature: float, max_tokens: int) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        with self._lock:
            try:
                response = requests.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                raise ModelUnavailable(f"model endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ModelUnavailable(
                f"model endpoint returned {response.status_code}: {response.text[:200]}"
            )
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ModelUnavailable(f"malformed model response: {exc}") from exc
