import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from contactqi import catalog  # noqa: E402


@pytest.fixture(scope="session")
def entries():
    return {name: catalog.load(name) for name in catalog.NAMES}


@pytest.fixture(scope="session")
def m1(entries):
    return entries["m1_corrected"]


@pytest.fixture(scope="session")
def sphere(entries):
    return entries["sphere3"]


@pytest.fixture(scope="session")
def pair(entries):
    return entries["pair_example_5_1"].embedding


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
