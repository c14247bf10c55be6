import pytest

VERDICTS: list[str] = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line, echo it live, then assert it."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
