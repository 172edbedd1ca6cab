import warnings

from dysonlab.model import RegimeWarning

ACCEPTANCE_LINES: list[str] = []

warnings.filterwarnings("ignore", category=RegimeWarning)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
