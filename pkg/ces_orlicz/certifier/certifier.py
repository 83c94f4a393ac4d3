import logging
import math
from typing import Any, Optional

import numpy as np

from ces_orlicz.certifier.models import (
    Certificate,
    ChainLink,
    Property,
    SufficientChain,
    Verdict,
)
from ces_orlicz.modular.bisection import TOL_FLOOR, solve_unit_level
from ces_orlicz.modular.evaluator import modular, modular_tail_bound, series_from
from ces_orlicz.modular.models import CertifiedValue, Sequence
from ces_orlicz.modular.sequences import format_sequence
from ces_orlicz.orlicz.function import (
    a_phi,
    delta2_at_zero,
    eval_phi,
    first_piece_end,
    is_strictly_convex_on,
    lower_index_exceeds_one,
    sai_list,
)
from ces_orlicz.orlicz.models import OrliczFunction
from ces_orlicz.witness.builder import (
    WitnessException,
    rotundity_failure_witness,
    sm_failure_witness,
    verify_witness,
)
from ces_orlicz.witness.models import WitnessPair

logger = logging.getLogger(__name__)

# constants are re-checked on this many sample points
SAMPLES = 257


class CertificationException(Exception):
    def __init__(self, **kwargs: Any) -> None:
        super().__init__(kwargs.get("message"))
        self.code: str = kwargs.get("code", "TRIVIAL_SPACE")


def nontrivial_index(phi: OrliczFunction, k: float) -> int:
    """
    Smallest n whose tail sum_{m >= n} phi(k / m) is certified finite by the
    integral test, i.e. the first n with k / n inside the first piece.
    """

    if k <= 0:
        raise ValueError("k must be positive")
    end = first_piece_end(phi)
    if not math.isfinite(end):
        return 1
    n = max(1, math.ceil(k / end))
    while k / n > end:
        n += 1
    return n


def certify_nontrivial(phi: OrliczFunction) -> Certificate:
    first = phi.first
    if first.slope_offset > 0:
        return Certificate(
            property=Property.nontrivial,
            verdict=Verdict.fails,
            constants={"slope_at_origin": first.slope_offset},
            note=(
                "phi(1/n) >= slope_at_origin / n, the harmonic series diverges,"
                " so the space is {0}"
            ),
        )

    n1 = nontrivial_index(phi, 1.0)
    tail = modular_tail_bound(phi, 1.0, 1.0, n1)
    return Certificate(
        property=Property.nontrivial,
        verdict=Verdict.holds,
        constants={"n1": float(n1)},
        intervals={"tail": tail},
    )


def _require_nontrivial(phi: OrliczFunction) -> None:
    if certify_nontrivial(phi).verdict != Verdict.holds:
        raise CertificationException(
            message="the space is trivial", code="TRIVIAL_SPACE"
        )


def check_sufficient_conditions(phi: OrliczFunction) -> SufficientChain:
    index = lower_index_exceeds_one(phi)
    power_bound = ChainLink(name="power_bound", verdict=Verdict.unknown)
    if index.verdict == Verdict.holds:
        power_bound = ChainLink(
            name="power_bound",
            verdict=Verdict.holds,
            constants={
                "epsilon": index.constants["epsilon"],
                "A": index.constants["A"],
                "u0": index.constants["u0"],
            },
        )
    elif index.verdict == Verdict.not_applicable:
        power_bound = ChainLink(name="power_bound", verdict=Verdict.not_applicable)

    nontrivial = certify_nontrivial(phi)
    return SufficientChain(
        index=ChainLink(
            name="lower_index", verdict=index.verdict, constants=index.constants
        ),
        power_bound=power_bound,
        nontrivial=ChainLink(
            name="nontrivial",
            verdict=nontrivial.verdict,
            constants=nontrivial.constants,
        ),
    )


def chain_certificate(chain: SufficientChain) -> Certificate:
    constants: dict[str, float] = {}
    for link in (chain.index, chain.power_bound, chain.nontrivial):
        constants.update({f"{link.name}.{k}": v for k, v in link.constants.items()})

    return Certificate(
        property=Property.sufficient_chain,
        verdict=Verdict.holds if chain.consistent else Verdict.fails,
        constants=constants,
        note=" ".join(
            f"{link.name}={link.verdict.value}"
            for link in (chain.index, chain.power_bound, chain.nontrivial)
        ),
    )


def certify_order_continuity(phi: OrliczFunction) -> Certificate:
    _require_nontrivial(phi)
    delta2 = delta2_at_zero(phi)
    if delta2.verdict == Verdict.holds:
        return Certificate(
            property=Property.order_continuous,
            verdict=Verdict.holds,
            constants=delta2.constants,
            note="delta2 at zero: every element is order continuous",
        )
    return Certificate(
        property=Property.order_continuous,
        verdict=Verdict.unknown,
        note="delta2 at zero fails; only sufficiency is known",
    )


def certify_strict_monotonicity(phi: OrliczFunction, tol: float) -> Certificate:
    _require_nontrivial(phi)
    if a_phi(phi) == 0:
        delta2 = delta2_at_zero(phi)
        scope = "ces_phi" if delta2.verdict == Verdict.holds else "A_phi"
        return Certificate(
            property=Property.strict_monotone,
            verdict=Verdict.holds,
            constants=delta2.constants,
            note=f"phi > 0; scope={scope}",
        )

    try:
        witness = sm_failure_witness(phi, tol)
    except WitnessException as err:
        logger.warning("no strict monotonicity witness: %s", err)
        return Certificate(
            property=Property.strict_monotone,
            verdict=Verdict.fails,
            constants={"a_phi": a_phi(phi)},
            note=f"phi vanishes on [0, a_phi]; witness construction failed: {err}",
        )
    return Certificate(
        property=Property.strict_monotone,
        verdict=Verdict.fails,
        constants={"a_phi": a_phi(phi), **witness.constants},
        witness=witness,
        note="phi vanishes on [0, a_phi]",
    )


def certify_uniform_monotonicity(phi: OrliczFunction) -> Certificate:
    _require_nontrivial(phi)
    delta2 = delta2_at_zero(phi)
    if delta2.verdict == Verdict.holds:
        return Certificate(
            property=Property.uniform_monotone,
            verdict=Verdict.holds,
            constants=delta2.constants,
            note="delta2 at zero; modulus estimated by run_monotonicity_suite",
        )
    return Certificate(
        property=Property.uniform_monotone,
        verdict=Verdict.unknown,
        note="delta2 at zero fails; only sufficiency is known",
    )


def alpha_function(phi: OrliczFunction, a: float, eps: float) -> CertifiedValue:
    """
    f(a) = 2 phi(a) + sum_{i >= 3} phi(2a / i), which is the modular of
    (a, a, 0, 0, ...).
    """
    return modular(phi, Sequence(head=(a, a)), eps)


def solve_alpha(phi: OrliczFunction, tol: float) -> CertifiedValue:
    """The unique alpha with f(alpha) = 1, to width tol."""
    _require_nontrivial(phi)
    level = solve_unit_level(
        lambda a, eps: alpha_function(phi, a, eps),
        start=max(1.0, 2 * a_phi(phi)),
        converged=lambda lo, hi: hi - lo <= tol,
        eps=min(1e-3, tol),
        homogeneous=True,
    )
    return CertifiedValue(lo=level.lo, hi=level.hi)


def _verified_rotundity_witness(
    phi: OrliczFunction,
    sai: tuple[float, float],
    alpha: CertifiedValue,
    tol: float,
) -> Optional[WitnessPair]:
    try:
        witness = rotundity_failure_witness(phi, sai, alpha, tol)
    except WitnessException as err:
        logger.warning("no rotundity witness for %s: %s", sai, err)
        return None
    if not verify_witness(phi, witness, 10 * tol).passed:
        logger.warning("rotundity witness for %s failed verification", sai)
        return None
    return witness


def certify_rotundity(phi: OrliczFunction, tol: float) -> Certificate:
    _require_nontrivial(phi)
    if delta2_at_zero(phi).verdict != Verdict.holds:
        raise CertificationException(
            message="the rotundity criterion needs delta2 at zero",
            code="DELTA2_REQUIRED",
        )

    alpha = solve_alpha(phi, tol)
    while True:
        if is_strictly_convex_on(phi, (0.0, alpha.hi)):
            return Certificate(
                property=Property.rotund,
                verdict=Verdict.holds,
                intervals={"alpha": alpha},
                note="phi is strictly convex on [0, alpha]",
            )

        inside = [(a, b) for a, b in sai_list(phi) if a < alpha.lo]
        if inside:
            for sai in inside:
                witness = _verified_rotundity_witness(phi, sai, alpha, tol)
                if witness is not None:
                    return Certificate(
                        property=Property.rotund,
                        verdict=Verdict.fails,
                        intervals={"alpha": alpha},
                        sai=sai,
                        witness=witness,
                        constants=witness.constants,
                        note="phi is affine on a subinterval of [0, alpha]",
                    )
            return Certificate(
                property=Property.rotund,
                verdict=Verdict.unknown,
                intervals={"alpha": alpha},
                sai=inside[0],
                note="phi is affine below alpha but no witness pair verified",
            )

        # an affine interval starts inside the alpha bracket
        if tol <= TOL_FLOOR:
            return Certificate(
                property=Property.rotund,
                verdict=Verdict.unknown_boundary,
                intervals={"alpha": alpha},
                note="an affine interval starts inside the alpha bracket",
            )
        tol = max(tol / 10, TOL_FLOOR)
        alpha = solve_alpha(phi, tol)


def certify_all(phi: OrliczFunction, tol: float) -> list[Certificate]:
    """The six space certificates, with precondition failures as placeholders."""
    nontrivial = certify_nontrivial(phi)
    certificates = [nontrivial]

    steps = [
        (
            Property.sufficient_chain,
            lambda: chain_certificate(check_sufficient_conditions(phi)),
        ),
        (Property.order_continuous, lambda: certify_order_continuity(phi)),
        (Property.strict_monotone, lambda: certify_strict_monotonicity(phi, tol)),
        (Property.uniform_monotone, lambda: certify_uniform_monotonicity(phi)),
        (Property.rotund, lambda: certify_rotundity(phi, tol)),
    ]
    for prop, step in steps:
        if nontrivial.verdict != Verdict.holds:
            certificates.append(
                Certificate(
                    property=prop,
                    verdict=Verdict.trivial_space,
                    note="the space is {0}",
                )
            )
            continue
        try:
            certificates.append(step())
        except CertificationException as err:
            certificates.append(
                Certificate(property=prop, verdict=Verdict(err.code), note=str(err))
            )
    return certificates


def _samples(upper: float) -> np.ndarray:
    return np.linspace(0.0, upper, SAMPLES)[1:]


def reverify(phi: OrliczFunction, certificate: Certificate, tol: float) -> bool:
    """
    Recompute every constant of a HOLDS/FAILS payload against its defining
    inequality. Other verdicts carry nothing to check.
    """

    if certificate.verdict not in (Verdict.holds, Verdict.fails):
        return True

    c = certificate.constants
    prop, holds = certificate.property, certificate.verdict == Verdict.holds

    if prop == Property.nontrivial:
        if not holds:
            return c.get("slope_at_origin") == phi.first.slope_offset > 0
        n1 = int(c["n1"])
        return not series_from(phi, 1.0, n1, tol).is_infinite

    if prop == Property.delta2_at_zero:
        if not holds:
            return c["phi_u"] == 0 < c["phi_2u"]
        u = _samples(c["a"])
        return bool(
            eval_phi(phi, c["a"]) > 0
            and np.all(eval_phi(phi, 2 * u) <= c["K"] * eval_phi(phi, u) * (1 + 1e-12))
        )

    if prop == Property.lower_index:
        if not holds:
            return phi.first.slope_offset > 0
        u = _samples(c["u0"])
        bound = c["A"] * u ** (1 + c["epsilon"])
        return bool(np.all(eval_phi(phi, u) <= bound * (1 + 1e-12)))

    if prop == Property.sufficient_chain:
        return check_sufficient_conditions(phi).consistent == holds

    if prop in (Property.order_continuous, Property.uniform_monotone):
        delta2 = Certificate(
            property=Property.delta2_at_zero, verdict=Verdict.holds, constants=c
        )
        return holds and reverify(phi, delta2, tol)

    if prop == Property.strict_monotone:
        if holds:
            return a_phi(phi) == 0
        return certificate.witness is not None and verify_witness(
            phi, certificate.witness, 10 * tol
        ).passed

    if prop == Property.rotund:
        alpha = certificate.intervals["alpha"]
        f_lo = alpha_function(phi, alpha.lo, tol)
        f_hi = alpha_function(phi, alpha.hi, tol)
        if not (f_lo.lo <= 1 + tol and f_hi.hi >= 1 - tol):
            return False
        if holds:
            return is_strictly_convex_on(phi, (0.0, alpha.hi))
        if certificate.sai is None or certificate.sai not in sai_list(phi):
            return False
        return certificate.witness is not None and verify_witness(
            phi, certificate.witness, 10 * tol
        ).passed

    return False


def format_certificate(certificate: Certificate) -> str:
    lines = [
        f"property: {certificate.property.value}",
        f"verdict: {certificate.verdict.value}",
    ]

    constants = [f"{k}={v:.9g}" for k, v in certificate.constants.items()]
    constants += [f"{k}={v}" for k, v in certificate.intervals.items()]
    if certificate.sai is not None:
        constants.append(f"sai=[{certificate.sai[0]:.9g}, {certificate.sai[1]:.9g}]")
    lines.append("constants: " + " ".join(constants))

    if certificate.witness is not None:
        x = format_sequence(certificate.witness.x).strip().replace("\n", " ; ")
        y = format_sequence(certificate.witness.y).strip().replace("\n", " ; ")
        lines.append(f"witness: x: {x} | y: {y}")
    if certificate.note:
        lines.append(f"note: {certificate.note}")
    return "\n".join(lines) + "\n"
