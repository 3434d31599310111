import pytest

_CRITERIA = {
    1: "double-slit reproduction",
    2: "two-beam reproduction",
    3: "biprism reproduction",
    4: "detector analytics",
    5: "oracle cross-check",
    6: "determinism and conservation",
}
_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number the test checks")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for number in getattr(report, "criteria", ()):
        _outcomes.setdefault(number, []).append((report.nodeid, report.passed))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    report.criteria = tuple(m.args[0] for m in item.iter_markers("criterion"))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in _CRITERIA.items():
        results = _outcomes.get(number)
        if not results:
            terminalreporter.write_line(f"criterion {number} ({title}): NOT RUN")
            continue
        passed = sum(ok for _, ok in results)
        status = "PASS" if passed == len(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number} ({title}): {status} ({passed}/{len(results)} checks)")
        for nodeid, ok in results:
            if not ok:
                terminalreporter.write_line(f"    failed: {nodeid}")
