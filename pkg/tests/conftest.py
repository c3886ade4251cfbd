from fractions import Fraction as F
from pathlib import Path

import pytest

from flockwave.coupling import CouplingConfig

ROOT = Path(__file__).resolve().parent.parent
SPECS = ROOT / "specs"

FIG6 = CouplingConfig(-2, -2, (F(-1, 2), F(1, 4), 1, F(-3, 4), 0), (-1, F(3, 4), 1, -1, F(1, 4)))
FIG7 = CouplingConfig(-2, -2, (1, -2, 1, 0, 0), (F(-1, 2), -1, 1, F(1, 2), 0))
FIG4 = CouplingConfig(
    -2, -2,
    (F(4, 27), F(-289, 432), 1, F(-253, 432), F(23, 216)),
    (F(47, 216), F(-29, 108), 1, F(-79, 108), F(-47, 216)),
)
TYPE3 = CouplingConfig(-2, -2, (-2, F(15, 4), 1, F(-21, 4), F(5, 2)), (-1, 4, 1, -5, 1))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def fig6():
    return FIG6


@pytest.fixture
def fig7():
    return FIG7


@pytest.fixture
def fig4():
    return FIG4


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
