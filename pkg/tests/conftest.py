import re

import pytest

from torcanard.models import make_model

ACCEPTANCE = []


def record(criterion, ok, detail=""):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: (int(re.match(r"criterion (\d+)", s).group(1)), s)):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def wc():
    return make_model("wilson-cowan")


@pytest.fixture(scope="session")
def wc_branch(wc):
    from torcanard import fastbif
    return fastbif.cycle_branch(wc)
