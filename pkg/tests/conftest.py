import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

import _acceptance_log  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_acceptance_log.RESULTS):
        terminalreporter.write_line(line)
