import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import criteria  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if criteria.LINES:
        terminalreporter.section("acceptance criteria")
        for line in criteria.LINES:
            terminalreporter.write_line(line)
