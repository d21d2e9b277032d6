import pytest

_criteria: dict[int, tuple[bool, float, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, budget): acceptance criterion n with a runtime budget in seconds")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    n, budget = marker.args
    if rep.when == "setup":
        if rep.failed:
            _criteria[n] = (False, 0.0, budget)
        return
    if rep.passed and rep.duration >= budget:
        rep.outcome = "failed"
        rep.longrepr = f"criterion {n} took {rep.duration:.2f}s, budget {budget}s"
    _criteria[n] = (rep.passed, rep.duration, budget)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, duration, budget = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({duration:.2f}s, budget {budget}s)")
