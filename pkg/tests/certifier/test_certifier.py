import math
import time

import pytest

from ces_orlicz.certifier import certifier
from ces_orlicz.certifier.certifier import (
    CertificationException,
    certify_all,
    certify_nontrivial,
    certify_order_continuity,
    certify_rotundity,
    certify_strict_monotonicity,
    certify_uniform_monotonicity,
    check_sufficient_conditions,
    format_certificate,
    nontrivial_index,
    reverify,
    solve_alpha,
)
from ces_orlicz.certifier.models import Certificate, Property, Verdict
from ces_orlicz.orlicz.function import parse_phi, sai_list
from ces_orlicz.witness.builder import WitnessException
from ces_orlicz.orlicz.models import OrliczFunction

TOL = 1e-8


class TestNontrivial:
    def test_linear_at_origin(self, absolute: OrliczFunction):
        certificate = certify_nontrivial(absolute)
        assert certificate.verdict == Verdict.fails
        assert certificate.constants["slope_at_origin"] == 1.0

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_power(self, p: float):
        phi = parse_phi(f"piece start=0 slope=0 coeff=1 exp={p}")
        certificate = certify_nontrivial(phi)
        assert certificate.verdict == Verdict.holds
        assert certificate.constants["n1"] == 1
        assert math.isfinite(certificate.intervals["tail"].hi)

    def test_index_inside_first_piece(self, rot: OrliczFunction):
        assert nontrivial_index(rot, 1.0) == 10
        assert certify_nontrivial(rot).constants["n1"] == 10

    def test_index_zero_prefix(self, shifted: OrliczFunction):
        assert nontrivial_index(shifted, 1.0) == 1
        assert nontrivial_index(shifted, 3.0) == 3


class TestSufficientChain:
    def test_power(self, square: OrliczFunction):
        chain = check_sufficient_conditions(square)
        assert chain.index.verdict == Verdict.holds
        assert chain.power_bound.verdict == Verdict.holds
        assert chain.nontrivial.verdict == Verdict.holds
        assert chain.consistent

    def test_trivial(self, absolute: OrliczFunction):
        chain = check_sufficient_conditions(absolute)
        assert chain.index.verdict == Verdict.fails
        assert chain.nontrivial.verdict == Verdict.fails
        assert chain.consistent

    def test_zero_prefix(self, shifted: OrliczFunction):
        chain = check_sufficient_conditions(shifted)
        assert chain.index.verdict == Verdict.not_applicable
        assert chain.nontrivial.verdict == Verdict.holds


class TestMonotonicity:
    def test_order_continuity(self, square: OrliczFunction, shifted: OrliczFunction):
        assert certify_order_continuity(square).verdict == Verdict.holds
        assert certify_order_continuity(shifted).verdict == Verdict.unknown

    def test_trivial_space(self, absolute: OrliczFunction):
        with pytest.raises(CertificationException) as info:
            certify_order_continuity(absolute)
        assert info.value.code == "TRIVIAL_SPACE"

    def test_strict(self, square: OrliczFunction):
        certificate = certify_strict_monotonicity(square, TOL)
        assert certificate.verdict == Verdict.holds
        assert "scope=ces_phi" in certificate.note

    def test_strict_fails_with_witness(self, shifted: OrliczFunction):
        certificate = certify_strict_monotonicity(shifted, TOL)
        assert certificate.verdict == Verdict.fails
        assert certificate.witness is not None
        assert certificate.constants["c"] == 2.0

    def test_uniform(self, square: OrliczFunction, shifted: OrliczFunction):
        certificate = certify_uniform_monotonicity(square)
        assert certificate.verdict == Verdict.holds
        assert certificate.constants["K"] == 4.0
        assert certify_uniform_monotonicity(shifted).verdict == Verdict.unknown


class TestRotundity:
    def test_alpha_closed_form(self, square: OrliczFunction):
        alpha = solve_alpha(square, 1e-6)
        assert alpha.contains(1 / math.sqrt(4 * math.pi**2 / 6 - 3))
        assert alpha.width <= 1e-6

    def test_alpha_trivial(self, absolute: OrliczFunction):
        with pytest.raises(CertificationException) as info:
            solve_alpha(absolute, 1e-6)
        assert info.value.code == "TRIVIAL_SPACE"

    def test_strictly_convex(self, square: OrliczFunction):
        assert certify_rotundity(square, TOL).verdict == Verdict.holds

    def test_affine_piece(self, rot: OrliczFunction):
        certificate = certify_rotundity(rot, TOL)
        assert certificate.verdict == Verdict.fails
        assert certificate.sai == (0.1, 0.3)
        assert certificate.intervals["alpha"].lo > 0.3
        assert certificate.witness is not None
        assert all(check.passed for check in certificate.witness.checks)

    def test_delta2_required(self, shifted: OrliczFunction):
        with pytest.raises(CertificationException) as info:
            certify_rotundity(shifted, TOL)
        assert info.value.code == "DELTA2_REQUIRED"


    def test_alpha_shifted(self, shifted: OrliczFunction):
        alpha = solve_alpha(shifted, 1e-6)
        assert alpha.lo > 1
        assert abs(alpha.mid - 1.7007) < 1e-3

    def test_alpha_rot(self, rot: OrliczFunction):
        alpha = solve_alpha(rot, 1e-6)
        assert 0.6 < alpha.lo and alpha.hi < 0.8
        assert abs(alpha.mid - 0.66438) < 1e-4

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    @pytest.mark.parametrize("c", [0.25, 4.0])
    def test_alpha_scaling(self, p: float, c: float):
        unit = solve_alpha(parse_phi(f"piece start=0 slope=0 coeff=1 exp={p}"), 1e-8)
        phi = parse_phi(f"piece start=0 slope=0 coeff={c} exp={p}")
        scaled = solve_alpha(phi, 1e-8)
        assert abs(scaled.mid - c ** (-1 / p) * unit.mid) <= 1e-7

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_rotund_implies_strictly_monotone(self, p: float):
        phi = parse_phi(f"piece start=0 slope=0 coeff=1 exp={p}")
        assert certify_rotundity(phi, TOL).verdict == Verdict.holds
        assert certify_strict_monotonicity(phi, TOL).verdict == Verdict.holds

    def test_rot_runtime(self, rot: OrliczFunction):
        started = time.perf_counter()
        certificate = certify_rotundity(rot, TOL)
        assert time.perf_counter() - started < 10.0
        assert certificate.verdict == Verdict.fails

    def test_unverified_witness_is_unknown(self, rot: OrliczFunction, monkeypatch):
        def refuse(*args, **kwargs):
            raise WitnessException(message="refused", code="SAI_TOO_SMALL")

        monkeypatch.setattr(certifier, "rotundity_failure_witness", refuse)
        certificate = certify_rotundity(rot, TOL)
        assert certificate.verdict == Verdict.unknown
        assert certificate.witness is None
        assert certificate.sai == (0.1, 0.3)

    def test_later_sai_supplies_the_witness(self, monkeypatch):
        phi = parse_phi(
            """
            piece start=0 slope=0 coeff=1 exp=2
            piece start=0.1 slope=0.2 coeff=0 exp=1
            piece start=0.2 slope=0.2 coeff=1 exp=2
            piece start=0.3 slope=0.4 coeff=0 exp=1
            piece start=0.4 slope=0.4 coeff=1 exp=2
            """
        )
        assert sai_list(phi) == [(0.1, 0.2), (0.3, 0.4)]
        build = certifier.rotundity_failure_witness

        def skip_first(phi, sai, alpha, tol):
            if sai == (0.1, 0.2):
                raise WitnessException(message="refused", code="SAI_TOO_SMALL")
            return build(phi, sai, alpha, tol)

        monkeypatch.setattr(certifier, "rotundity_failure_witness", skip_first)
        certificate = certify_rotundity(phi, TOL)
        assert certificate.verdict == Verdict.fails
        assert certificate.sai == (0.3, 0.4)
        assert certificate.witness is not None
        assert reverify(phi, certificate, TOL)

    def test_reverify_rejects_fails_without_witness(self, rot: OrliczFunction):
        forged = Certificate(
            property=Property.rotund,
            verdict=Verdict.fails,
            intervals={"alpha": solve_alpha(rot, TOL)},
            sai=(0.1, 0.3),
        )
        assert not reverify(rot, forged, TOL)

class TestCertifyAll:
    def test_square(self, square: OrliczFunction):
        certificates = certify_all(square, TOL)
        assert [c.property for c in certificates] == [
            Property.nontrivial,
            Property.sufficient_chain,
            Property.order_continuous,
            Property.strict_monotone,
            Property.uniform_monotone,
            Property.rotund,
        ]
        assert all(c.verdict == Verdict.holds for c in certificates)
        assert all(reverify(square, c, TOL) for c in certificates)

    def test_trivial_space(self, absolute: OrliczFunction):
        certificates = certify_all(absolute, TOL)
        assert certificates[0].verdict == Verdict.fails
        assert [c.verdict for c in certificates[1:]] == [Verdict.trivial_space] * 5

    def test_placeholder_for_missing_delta2(self, shifted: OrliczFunction):
        rotund = certify_all(shifted, TOL)[-1]
        assert rotund.verdict == Verdict.delta2_required

    def test_reverify_catches_tampering(self, square: OrliczFunction):
        forged = Certificate(
            property=Property.delta2_at_zero,
            verdict=Verdict.holds,
            constants={"K": 1.0, "a": 1.0},
        )
        assert not reverify(square, forged, TOL)

    def test_format(self, absolute: OrliczFunction):
        text = format_certificate(certify_nontrivial(absolute))
        assert text.startswith("property: NONTRIVIAL\nverdict: FAILS\n")
        assert "slope_at_origin=1" in text
