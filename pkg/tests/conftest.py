"""Prints the acceptance verdict lines after the run, outside capture."""

import _criteria


def pytest_terminal_summary(terminalreporter):
    if not _criteria.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status in sorted(_criteria.VERDICTS):
        terminalreporter.write_line(f"{status} criterion {number}: {title}")
