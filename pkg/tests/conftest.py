"""Collects acceptance verdicts and repeats them in the terminal summary."""

_VERDICTS = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _VERDICTS.extend(v for k, v in report.user_properties if k == "acceptance")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
