"""Collects acceptance verdicts recorded via ``record_property`` and prints them after the run."""

VERDICT_KEY = "acceptance"
_verdicts = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _verdicts.extend(v for k, v in report.user_properties if k == VERDICT_KEY)


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts:
            terminalreporter.write_line(line)
