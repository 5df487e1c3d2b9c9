from __future__ import annotations

import pytest

ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Shared list of PASS/FAIL lines written by the acceptance criteria."""
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
    passed = sum(" PASS " in line for line in lines)
    terminalreporter.write_line(f"{passed}/{len(lines)} criteria passed")
