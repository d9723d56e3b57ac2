#!/usr/bin/env python3
"""Run the whole pipeline and compare evaluation information conditions.

Stages the planted fixture world, mines it, generates a task corpus with
the mock model, builds the retrieval index, then evaluates the same mock
model three times:

  none    no change information in the prompt
  rag     top-k retrieved change docs, token-budgeted
  oracle  the exact change doc for the target API

The mock model resolves each task by reading the knowledge block, so the
three conditions separate cleanly: blind guessing fails the usage check,
retrieval mostly finds the right doc, and the oracle always does. That
ordering (none < rag <= oracle) is the effect the harness exists to
measure; with a real model behind the HTTP provider the gap is what you
would study.

Run it from the repo root after `pip install -e .`:

    python3 demos/condition_comparison.py

With rustc on PATH the candidates are actually compiled and executed;
without it the script falls back to static checks only.
"""

import json
import shutil
import tempfile
from pathlib import Path

from evoforge.cli import (
    cmd_evaluate,
    cmd_generate,
    cmd_mine,
    cmd_rag_index,
    cmd_usages,
    load_config,
)
from evoforge.model import Condition
from evoforge.synthetic import stage_run_directory


def main():
    root = Path(tempfile.mkdtemp(prefix="evoforge-demo-"))
    config = load_config(stage_run_directory(root))
    out = root / "out"
    out.mkdir()
    no_sandbox = shutil.which("rustc") is None
    if no_sandbox:
        print("rustc not found; running static checks only\n")

    print("--- mine ---")
    cmd_mine(config, out)
    print("\n--- usages ---")
    cmd_usages(config, out)
    print("\n--- generate ---")
    cmd_generate(config, out, no_sandbox=no_sandbox)
    print("\n--- rag-index ---")
    cmd_rag_index(config, out)

    rows = []
    for condition in (Condition.NO_INFO, Condition.RAG, Condition.ORACLE_INFO):
        print(f"\n--- evaluate [{condition.value}] ---")
        cmd_evaluate(config, out, condition=condition, no_sandbox=no_sandbox)
        payload = json.loads((out / "report.json").read_text())
        metrics = payload["metrics"]
        rows.append((
            condition.value,
            metrics["pass_at_k"]["1"],
            metrics["aua"],
            metrics["coverage"],
        ))

    print()
    print(f"{'condition':<12} {'pass@1':>8} {'aua':>8} {'coverage':>10}")
    for name, p1, aua, cov in rows:
        print(f"{name:<12} {p1:>8.4f} {aua:>8.4f} {cov:>10.4f}")
    print(f"\nartifacts kept under {out}")


if __name__ == "__main__":
    main()
