import numpy as np
import pytest

from dpt.params import init_params
from dpt.config import preset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_cfg():
    return preset("toy")


@pytest.fixture(scope="session")
def toy_params(toy_cfg):
    return init_params(toy_cfg, seed=0)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record a one-line pass/fail verdict for an acceptance criterion.

    Usage: ``criterion(number, title, passed, detail)``. The verdict is
    printed immediately and repeated in the terminal summary.
    """

    def report(number: int, title: str, passed: bool, detail: str = "") -> None:
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
