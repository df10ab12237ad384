"""Shared pytest hooks: collect acceptance verdicts and print them in the
terminal summary so each criterion shows one pass/fail line per run."""

from __future__ import annotations

VERDICTS: list[tuple[str, bool, str]] = []


def record_verdict(name: str, ok: bool, detail: str) -> None:
    VERDICTS.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance")
    for name, ok, detail in VERDICTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
