"""Per-criterion summary for the acceptance suite.

Tests tagged ``@pytest.mark.criterion(n)`` are grouped by ``n``; after the
run one PASS/FAIL line per criterion is printed. A test may attach a short
detail string with ``record_property("detail", ...)``.
"""

import pytest

_RESULTS: dict[int, list[tuple[str, str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "xfail" if hasattr(rep, "wasxfail") else rep.outcome
        detail = "; ".join(str(v) for k, v in rep.user_properties if k == "detail")
        _RESULTS.setdefault(mark.args[0], []).append((item.name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        entries = _RESULTS[n]
        statuses = {s for _, s, _ in entries}
        if statuses == {"passed"}:
            verdict = "PASS"
        elif statuses <= {"passed", "skipped"}:
            verdict = "SKIP"
        elif "failed" in statuses:
            verdict = "FAIL"
        else:
            verdict = "FAIL (known shortfall, see decisions ledger)"
        tr.write_line(f"criterion {n:2d}: {verdict}")
        for name, status, detail in entries:
            if detail or status != "passed":
                tr.write_line(f"    {name} [{status}] {detail}".rstrip())
