import math

import numpy as np
import pytest

from ces_orlicz.certifier.models import Verdict
from ces_orlicz.orlicz.function import (
    PhiSpecException,
    a_phi,
    delta2_at_zero,
    eval_phi,
    format_phi,
    is_strictly_convex_on,
    lower_index_exceeds_one,
    parse_phi,
    right_derivative,
    sai_list,
)
from ces_orlicz.orlicz.models import OrliczFunction, PhiPiece


class TestParsePhi:
    def test_square(self, square: OrliczFunction):
        assert len(square.pieces) == 1
        assert a_phi(square) == 0
        assert sai_list(square) == []
        assert eval_phi(square, 0.5) == 0.25

    def test_values_filled_by_continuity(self, rot: OrliczFunction):
        values = [piece.value for piece in rot.pieces]
        assert values[0] == 0
        assert values[1] == pytest.approx(0.01)
        assert values[2] == pytest.approx(0.05)

    def test_alias_population(self):
        piece = PhiPiece(start=0, slope_offset=1.0, coeff=0, exponent=1)
        assert piece == PhiPiece.parse_obj(
            {"start": 0, "slope": 1.0, "coeff": 0, "exp": 1}
        )

    def test_format_roundtrip(self, rot: OrliczFunction):
        assert parse_phi(format_phi(rot)) == rot

    @pytest.mark.parametrize(
        "text, code, piece",
        [
            ("", "EMPTY", 0),
            ("# only a comment\n", "EMPTY", 0),
            ("piece start=0 slope=x coeff=0 exp=1", "SYNTAX", 0),
            ("piece start=0 slope=1 coeff=0", "SYNTAX", 0),
            ("piece start=0 slope=1 coeff=0 exp=1 color=red", "SYNTAX", 0),
            ("curve start=0 slope=1 coeff=0 exp=1", "SYNTAX", 0),
            ("piece start=0 slope=-1 coeff=0 exp=1", "SYNTAX", 1),
            ("piece start=0 slope=0 coeff=1 exp=0.5", "EXPONENT", 1),
            ("piece start=0 slope=0 coeff=1 exp=1", "REDUNDANT_POWER", 1),
            ("piece start=1 slope=1 coeff=0 exp=1", "ORDER", 1),
            ("piece start=0 slope=0 coeff=0 exp=1", "GROWTH", 1),
            (
                "piece start=0 slope=1 coeff=0 exp=1\n"
                "piece start=1 slope=0.5 coeff=0 exp=1",
                "CONVEXITY",
                2,
            ),
            (
                "piece start=0 slope=0 coeff=1 exp=2\n"
                "piece start=1 slope=2 coeff=0 exp=1 value=3",
                "CONTINUITY",
                2,
            ),
            (
                "piece start=0 slope=0 coeff=1 exp=2\n"
                "piece start=0 slope=2 coeff=0 exp=1",
                "ORDER",
                2,
            ),
        ],
    )
    def test_errors(self, text: str, code: str, piece: int):
        with pytest.raises(PhiSpecException) as info:
            parse_phi(text)
        assert info.value.code == code
        assert info.value.piece == piece

    def test_convexity_message_names_piece(self, fixtures):
        with pytest.raises(PhiSpecException, match="convexity violated at piece 2"):
            parse_phi((fixtures / "phi_bad.txt").read_text())


class TestEvalPhi:
    def test_even(self, rot: OrliczFunction):
        assert eval_phi(rot, -0.2) == eval_phi(rot, 0.2)

    def test_pieces(self, rot: OrliczFunction):
        assert eval_phi(rot, 0.05) == pytest.approx(0.0025)
        assert eval_phi(rot, 0.2) == pytest.approx(0.03)
        assert eval_phi(rot, 0.4) == pytest.approx(0.05 + 0.02 + 0.01)

    def test_array_matches_scalar(self, rot: OrliczFunction):
        u = np.array([0.0, 0.05, 0.1, 0.2, 0.3, 1.7])
        assert np.allclose(eval_phi(rot, u), [eval_phi(rot, v) for v in u])

    def test_zero_prefix(self, shifted: OrliczFunction):
        assert eval_phi(shifted, 0.9) == 0
        assert eval_phi(shifted, 2.0) == 1.0

    def test_right_derivative(self, rot: OrliczFunction):
        assert right_derivative(rot, 0.05) == pytest.approx(0.1)
        assert right_derivative(rot, 0.2) == pytest.approx(0.2)
        assert right_derivative(rot, 0.4) == pytest.approx(0.4)


class TestStructure:
    def test_a_phi(self, shifted: OrliczFunction, zero_then_square: OrliczFunction):
        assert a_phi(shifted) == 1.0
        assert a_phi(zero_then_square) == 0.5

    def test_sai(self, rot: OrliczFunction, shifted: OrliczFunction):
        assert sai_list(rot) == [(0.1, 0.3)]
        assert sai_list(shifted) == [(0.0, 1.0)]

    def test_collinear_pieces_merge(self):
        phi = parse_phi(
            """
            piece start=0 slope=0 coeff=1 exp=2
            piece start=1 slope=2 coeff=0 exp=1
            piece start=2 slope=2 coeff=0 exp=1
            piece start=3 slope=2 coeff=1 exp=2
            """
        )
        assert sai_list(phi) == [(1.0, 3.0)]

    def test_strict_convexity(self, square: OrliczFunction, rot: OrliczFunction):
        assert is_strictly_convex_on(square, (0.0, 1.0))
        assert not is_strictly_convex_on(rot, (0.0, 0.65))
        assert is_strictly_convex_on(rot, (0.0, 0.1))
        assert is_strictly_convex_on(rot, (0.3, 1.0))

    def test_strict_convexity_bad_interval(self, square: OrliczFunction):
        with pytest.raises(ValueError):
            is_strictly_convex_on(square, (1.0, 1.0))


class TestDelta2AtZero:
    def test_power(self, square: OrliczFunction):
        certificate = delta2_at_zero(square)
        assert certificate.verdict == Verdict.holds
        assert certificate.constants == {"K": 4.0, "a": 1.0}

    def test_rot(self, rot: OrliczFunction):
        certificate = delta2_at_zero(rot)
        assert certificate.verdict == Verdict.holds
        assert certificate.constants["a"] == 0.05

    def test_zero_prefix(self, shifted: OrliczFunction):
        certificate = delta2_at_zero(shifted)
        assert certificate.verdict == Verdict.fails
        assert certificate.constants["phi_u"] == 0
        assert certificate.constants["phi_2u"] == pytest.approx(0.25)


class TestLowerIndex:
    def test_linear_at_origin(self, absolute: OrliczFunction):
        certificate = lower_index_exceeds_one(absolute)
        assert certificate.verdict == Verdict.fails
        assert certificate.constants["index"] == 1

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_power(self, p: float):
        phi = parse_phi(f"piece start=0 slope=0 coeff=1 exp={p}")
        certificate = lower_index_exceeds_one(phi)
        assert certificate.verdict == Verdict.holds
        assert math.isclose(certificate.constants["epsilon"], p - 1)

        u = np.linspace(0, certificate.constants["u0"], 50)
        bound = certificate.constants["A"] * u ** (1 + certificate.constants["epsilon"])
        assert np.all(eval_phi(phi, u) <= bound * (1 + 1e-12))

    def test_zero_prefix(self, shifted: OrliczFunction):
        assert lower_index_exceeds_one(shifted).verdict == Verdict.not_applicable


ALL_PHI = ["square", "cube", "p15", "absolute", "rot", "shifted", "zero_then_square"]


class TestInvariants:
    @pytest.fixture(params=ALL_PHI)
    def phi(self, request: pytest.FixtureRequest) -> OrliczFunction:
        return request.getfixturevalue(request.param)

    @pytest.fixture
    def rng(self) -> np.random.Generator:
        return np.random.default_rng(2024)

    def test_monotone_and_convex(self, phi: OrliczFunction, rng: np.random.Generator):
        u, v, w = np.sort(rng.uniform(0.0, 3.0, size=(3, 2000)), axis=0)
        fu, fv, fw = eval_phi(phi, u), eval_phi(phi, v), eval_phi(phi, w)
        slack = 1e-12 * (1 + fw)
        assert np.all(fu <= fv + slack) and np.all(fv <= fw + slack)

        inner = w - u > 1e-9
        chord = ((w - v) * fu + (v - u) * fw)[inner] / (w - u)[inner]
        assert np.all(fv[inner] <= chord + slack[inner])

    @pytest.mark.parametrize("h", [1e-4, 1e-6])
    def test_right_derivative_matches_differences(self, phi: OrliczFunction, h: float):
        u = np.linspace(0.05, 2.0, 1000)
        starts = phi.table[0]
        clear = ~np.any((starts > u[:, None]) & (starts <= u[:, None] + h), axis=1)
        u = u[clear]

        forward = (eval_phi(phi, u + h) - eval_phi(phi, u)) / h
        slope = right_derivative(phi, u)
        assert np.all(np.abs(forward - slope) <= 1e-2 * slope + 1e-9)

    def test_right_derivative_array_matches_scalar(self, phi: OrliczFunction):
        u = np.array([0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 1.7])
        assert np.allclose(
            right_derivative(phi, u), [right_derivative(phi, v) for v in u]
        )

    def test_a_phi_is_the_zero_set(self, phi: OrliczFunction):
        u = np.linspace(0.0, 3.0, 301)[1:]
        assert (a_phi(phi) == 0) == bool(np.all(eval_phi(phi, u) > 0))
        assert np.all(eval_phi(phi, u[u <= a_phi(phi)]) == 0)

    def test_delta2_constants_hold(self, phi: OrliczFunction):
        certificate = delta2_at_zero(phi)
        if certificate.verdict != Verdict.holds:
            assert a_phi(phi) > 0
            return
        K, a = certificate.constants["K"], certificate.constants["a"]
        u = np.linspace(0.0, a, 500)
        assert np.all(eval_phi(phi, 2 * u) <= K * eval_phi(phi, u) * (1 + 1e-12))


def midpoint_strict(phi: OrliczFunction, left: float, right: float) -> bool:
    grid = np.linspace(left, right, 41)
    v, w = np.meshgrid(grid, grid)
    pairs = v < w
    v, w = v[pairs], w[pairs]
    average = (eval_phi(phi, v) + eval_phi(phi, w)) / 2
    gap = average - eval_phi(phi, (v + w) / 2)
    return bool(np.all(gap > 1e-12 * (1 + average)))


class TestStrictConvexityAgainstMidpoints:
    @pytest.mark.parametrize(
        "name, interval",
        [
            ("square", (0.0, 1.0)),
            ("cube", (0.0, 2.0)),
            ("p15", (0.0, 1.0)),
            ("absolute", (0.0, 1.0)),
            ("rot", (0.0, 0.65)),
            ("rot", (0.0, 0.1)),
            ("rot", (0.3, 1.0)),
            ("rot", (0.05, 0.12)),
            ("shifted", (0.0, 0.5)),
            ("shifted", (1.2, 2.0)),
            ("zero_then_square", (0.0, 1.0)),
        ],
    )
    def test_agrees(
        self, request: pytest.FixtureRequest, name: str, interval: tuple[float, float]
    ):
        phi = request.getfixturevalue(name)
        assert is_strictly_convex_on(phi, interval) == midpoint_strict(phi, *interval)
