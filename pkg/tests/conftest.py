import numpy as np
import pytest

from ringlab.nonlinearity import make_builtin


@pytest.fixture(scope="session")
def zero():
    return make_builtin("zero")


@pytest.fixture(scope="session")
def quad01():
    return make_builtin("quad-exp", 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash[_LINES]

    def record(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}" + (f": {detail}" if detail else "")
        lines.append((number, line))
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
