"""Collects acceptance outcomes and prints one line per criterion at the end of the run.

Acceptance tests tag themselves with ``record_property("criterion", n)`` and
may add a ``detail`` string; a criterion passes only if all its tests pass.
"""
from __future__ import annotations

_RESULTS: dict[int, list] = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _RESULTS.setdefault(int(props["criterion"]), []).append(
            (report.passed, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        entries = _RESULTS[n]
        status = "PASS" if all(ok for ok, _ in entries) else "FAIL"
        details = "; ".join(d for _, d in entries if d)
        terminalreporter.write_line(f"criterion {n}: {status}  {details}".rstrip())
