import os
import sys

import pytest

from apvariance.zeros import ZeroStore


@pytest.fixture(scope="session")
def store(tmp_path_factory):
    """Zero store shared by the whole run (reuses APVARIANCE_TEST_STORE when set)."""
    root = os.environ.get("APVARIANCE_TEST_STORE") or tmp_path_factory.mktemp("zeros")
    return ZeroStore(root)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "SUMMARY", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
