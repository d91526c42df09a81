"""Test-session plumbing: one visible pass/fail line per acceptance
criterion in the terminal summary."""
from __future__ import annotations

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance_results.append((name, report.outcome))
    elif report.when == "setup" and report.outcome == "skipped":
        _acceptance_results.append((name, "skipped"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    labels = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for name, outcome in _acceptance_results:
        label = labels.get(outcome, outcome.upper())
        terminalreporter.write_line(f"[{label}] {name}")
