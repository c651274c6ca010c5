import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

import criteria_log  # noqa: E402

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    database=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def pytest_terminal_summary(terminalreporter):
    if not criteria_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in criteria_log.summary_lines():
        terminalreporter.write_line(line)
