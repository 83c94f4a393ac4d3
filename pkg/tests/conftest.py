from pathlib import Path

import pytest

from ces_orlicz.orlicz.function import parse_phi
from ces_orlicz.orlicz.models import OrliczFunction

FIXTURES = Path(__file__).parent / "fixtures"


def power(p: float) -> OrliczFunction:
    return parse_phi(f"piece start=0 slope=0 coeff=1 exp={p}")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def square() -> OrliczFunction:
    return parse_phi((FIXTURES / "phi_p2.txt").read_text())


@pytest.fixture
def cube() -> OrliczFunction:
    return power(3)


@pytest.fixture
def p15() -> OrliczFunction:
    return power(1.5)


@pytest.fixture
def absolute() -> OrliczFunction:
    return parse_phi((FIXTURES / "phi_abs.txt").read_text())


@pytest.fixture
def rot() -> OrliczFunction:
    return parse_phi((FIXTURES / "phi_rot.txt").read_text())


@pytest.fixture
def shifted() -> OrliczFunction:
    return parse_phi((FIXTURES / "phi_shifted.txt").read_text())


@pytest.fixture
def zero_then_square() -> OrliczFunction:
    return parse_phi(
        """
        piece start=0 slope=0 coeff=0 exp=1
        piece start=0.5 slope=0 coeff=1 exp=2
        """
    )
