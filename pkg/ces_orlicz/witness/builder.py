import logging
import math
from typing import Any

from ces_orlicz.certifier.models import Verdict
from ces_orlicz.modular.bisection import BracketException, solve_unit_level
from ces_orlicz.modular.evaluator import luxemburg_norm, modular
from ces_orlicz.modular.models import CertifiedValue, Sequence
from ces_orlicz.modular.sequences import (
    SequenceException,
    differs_in_modulus,
    dominates,
    format_sequence,
    is_nonnegative,
    midpoint,
    parse_sequence,
)
from ces_orlicz.orlicz.function import a_phi, delta2_at_zero, eval_phi
from ces_orlicz.orlicz.models import OrliczFunction
from ces_orlicz.witness.models import (
    WitnessCheck,
    WitnessKind,
    WitnessPair,
    WitnessReport,
)

logger = logging.getLogger(__name__)

MIN_DELTA = 1e-6
MAX_RETRIES = 8
MAX_SIMPLE_DIGITS = 17


class WitnessException(Exception):
    def __init__(self, **kwargs: Any) -> None:
        super().__init__(kwargs.get("message"))
        self.code: str = kwargs.get("code", "PRECONDITION")


def _simplest_in(lo: float, hi: float) -> list[float]:
    """Candidates in [lo, hi] with the fewest decimal digits first."""
    mid = (lo + hi) / 2
    return [
        value
        for value in (round(mid, digits) for digits in range(MAX_SIMPLE_DIGITS + 1))
        if lo <= value <= hi
    ]


def sm_failure_witness(phi: OrliczFunction, tol: float) -> WitnessPair:
    """
    x = (c, 0, 0, ...) and y = x with 1 at position n0, where
    sum_n phi(c / n) = 1 and (c + 1) / n0 <= a_phi. Every term past n0 - 1
    vanishes for both, so the two modulars agree term by term.
    """

    zero_end = a_phi(phi)
    if zero_end == 0:
        raise WitnessException(
            message="phi > 0 near zero, the space is strictly monotone",
            code="NOT_APPLICABLE",
        )

    def f_sm(c: float, eps: float) -> CertifiedValue:
        return modular(phi, Sequence(head=(c,)), eps)

    try:
        level = solve_unit_level(
            f_sm,
            start=max(1.0, 2 * zero_end),
            converged=lambda lo, hi: hi - lo <= tol * 1e-3,
            eps=tol / 4,
            homogeneous=True,
            band=tol / 2,
        )
    except BracketException as err:
        raise WitnessException(message=str(err), code="NO_LEVEL")

    candidates = _simplest_in(level.lo, level.hi)
    if level.point is not None:
        candidates.append(level.point)
    for c in candidates:
        if f_sm(c, tol / 4).within(1.0, tol / 2):
            break
    else:
        raise WitnessException(
            message=(
                f"no c in [{level.lo!r}, {level.hi!r}]"
                f" reaches modular 1 within {tol!r}"
            ),
            code="NO_LEVEL",
        )

    n0 = max(1, math.ceil((c + 1) / zero_end))
    while (c + 1) / n0 > zero_end:
        n0 += 1
    logger.debug("sm witness c=%r n0=%d", c, n0)

    x = Sequence(head=(c,))
    y = Sequence(head=(c,) + (0.0,) * (n0 - 2) + (1.0,))
    pair = WitnessPair(
        x=x,
        y=y,
        kind=WitnessKind.sm_failure,
        constants={"c": c, "n0": float(n0), "a_phi": zero_end},
    )
    return pair.copy(update={"checks": verify_witness(phi, pair, tol).checks})


def _window(
    sai: tuple[float, float], alpha: CertifiedValue
) -> tuple[float, float, float]:
    left = sai[0]
    right = min(sai[1], alpha.lo)
    width = right - left
    if width <= 0:
        raise WitnessException(
            message=f"affine interval {sai} does not meet (0, {alpha.lo!r})",
            code="PRECONDITION",
        )
    if width < 8 * MIN_DELTA:
        raise WitnessException(
            message=f"affine part [{left!r}, {right!r}] leaves no room for margins",
            code="SAI_TOO_SMALL",
        )
    return left + width / 8, right - width / 8, width


def _margin(phi: OrliczFunction, c: float, eps: float) -> float:
    """Some d > 0 with 2 phi(c) + sum_{i >= 3} phi((2c + d) / i) < 1."""
    d = c
    for _ in range(64):
        if modular(phi, Sequence(head=(c, c, d)), eps).hi < 1:
            return d
        d /= 2
    raise WitnessException(message=f"no margin d at c={c!r}", code="NO_K1")


def rotundity_failure_witness(
    phi: OrliczFunction,
    sai: tuple[float, float],
    alpha: CertifiedValue,
    tol: float,
) -> WitnessPair:
    """
    Two distinct unit-modular points whose midpoint also has modular 1.
    With b1 = b + delta, c1 = c - 3 delta and k = 2 delta the first two Cesaro
    means move by +delta and -delta inside the affine interval, and every later
    partial sum is unchanged, so all three modulars coincide.
    """

    if delta2_at_zero(phi).verdict != Verdict.holds:
        raise WitnessException(
            message="the rotundity construction needs delta2 at zero",
            code="PRECONDITION",
        )

    b, c, width = _window(sai, alpha)
    eps = tol / 4

    def g(k1: float, e: float) -> CertifiedValue:
        return modular(phi, Sequence(head=(b, c, 0.0, k1)), e)

    for attempt in range(MAX_RETRIES):
        d = _margin(phi, c, eps)
        delta = min(d / 16, width / 64, (c - b) / 8)
        if delta < MIN_DELTA:
            raise WitnessException(
                message=f"delta {delta!r} below {MIN_DELTA!r}", code="SAI_TOO_SMALL"
            )

        b1, c1, k = b + delta, c - 3 * delta, 2 * delta
        if g(0.0, eps).hi < 1 - tol:
            break
        logger.info("k1 = 0 reaches level 1 (attempt %d), pulling c in", attempt)
        c = b + 3 * (c - b) / 4
    else:
        raise WitnessException(
            message="modular of (b, c, 0, 0, ...) stays at or above 1", code="NO_K1"
        )

    try:
        level = solve_unit_level(
            g,
            start=max(1.0, b + c),
            converged=lambda lo, hi: hi - lo <= tol * 1e-3,
            eps=eps,
            homogeneous=False,
            band=tol / 2,
            lower_known=True,
        )
    except BracketException as err:
        raise WitnessException(message=str(err), code="NO_K1")

    k1 = level.point if level.point is not None else (level.lo + level.hi) / 2
    logger.debug("rotundity witness b=%r c=%r delta=%r k1=%r", b, c, delta, k1)

    pair = WitnessPair(
        x=Sequence(head=(b1, c1, k, k1)),
        y=Sequence(head=(b, c, 0.0, k1)),
        kind=WitnessKind.rotundity_failure,
        branch="b1+c1+k=b+c",
        constants={
            "b": b,
            "c": c,
            "b1": b1,
            "c1": c1,
            "k": k,
            "k1": k1,
            "d": d,
            "delta": delta,
            "alpha_lo": alpha.lo,
            "alpha_hi": alpha.hi,
        },
    )
    return pair.copy(update={"checks": verify_witness(phi, pair, tol).checks})


def _flag(name: str, value: bool) -> WitnessCheck:
    return WitnessCheck(
        name=name, target=1.0, achieved=CertifiedValue.exact(float(value)), passed=value
    )


def _unit(name: str, achieved: CertifiedValue, tol: float) -> WitnessCheck:
    return WitnessCheck(
        name=name, target=1.0, achieved=achieved, passed=achieved.within(1.0, tol)
    )


def verify_witness(phi: OrliczFunction, w: WitnessPair, tol: float) -> WitnessReport:
    """Recompute every check of the pair from fresh modulars and norms."""
    eps = tol / 4
    checks = [
        _unit("modular_x", modular(phi, w.x, eps), tol),
        _unit("modular_y", modular(phi, w.y, eps), tol),
    ]
    norm_x = luxemburg_norm(phi, w.x, eps)
    norm_y = luxemburg_norm(phi, w.y, eps)

    if w.kind == WitnessKind.sm_failure:
        gap = CertifiedValue(lo=norm_y.lo - norm_x.hi, hi=norm_y.hi - norm_x.lo)
        checks += [
            _unit("norm_x", norm_x, tol),
            _unit("norm_y", norm_y, tol),
            _flag(
                "x_le_y",
                is_nonnegative(w.x) and is_nonnegative(w.y) and dominates(w.y, w.x),
            ),
            _flag("x_ne_y", differs_in_modulus(w.x, w.y)),
            WitnessCheck(
                name="norm_gap", target=0.0, achieved=gap, passed=gap.hi <= 2 * tol
            ),
        ]
        return WitnessReport(kind=w.kind, checks=checks)

    mid = midpoint(w.x, w.y)
    checks += [
        _unit("modular_mid", modular(phi, mid, eps), tol),
        _unit("norm_x", norm_x, tol),
        _unit("norm_y", norm_y, tol),
        _unit("norm_mid", luxemburg_norm(phi, mid, eps), tol),
        _flag("x_ne_y", differs_in_modulus(w.x, w.y)),
    ]

    if {"b", "c", "b1", "c1"} <= w.constants.keys():
        b, c, b1, c1 = (w.constants[key] for key in ("b", "c", "b1", "c1"))
        lhs = eval_phi(phi, b) + eval_phi(phi, (b + c) / 2)
        rhs = eval_phi(phi, b1) + eval_phi(phi, (b1 + c1) / 2)
        diff = abs(lhs - rhs)
        checks.append(
            WitnessCheck(
                name="affine_identity",
                target=0.0,
                achieved=CertifiedValue.exact(diff),
                passed=diff <= 64 * math.ulp(max(lhs, rhs)),
            )
        )
    return WitnessReport(kind=w.kind, checks=checks)


def format_witness(w: WitnessPair) -> str:
    lines = [f"# kind: {w.kind.value}"]
    if w.branch:
        lines.append(f"# branch: {w.branch}")
    if w.constants:
        lines.append(
            "# constants: " + " ".join(f"{k}={v!r}" for k, v in w.constants.items())
        )
    lines.append("# checks:")
    lines += [
        f"#   {check.name} target={check.target:.9g} achieved={check.achieved}"
        f" {'pass' if check.passed else 'FAIL'}"
        for check in w.checks
    ]
    lines += ["# x", format_sequence(w.x).rstrip("\n")]
    lines += ["# y", format_sequence(w.y).rstrip("\n")]
    return "\n".join(lines) + "\n"


def parse_witness(text: str) -> WitnessPair:
    """Read back the output of format_witness. Checks are not restored."""
    kind = None
    branch = ""
    constants: dict[str, float] = {}
    blocks: dict[str, list[str]] = {}
    current = None

    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("# kind:"):
            kind = WitnessKind(line.partition(":")[2].strip())
        elif line.startswith("# branch:"):
            branch = line.partition(":")[2].strip()
        elif line.startswith("# constants:"):
            for pair in line.partition(":")[2].split():
                key, _, value = pair.partition("=")
                constants[key] = float(value)
        elif line in ("# x", "# y"):
            current = line[-1]
            blocks[current] = []
        elif current is not None:
            blocks[current].append(raw)

    if kind is None or blocks.keys() != {"x", "y"}:
        raise WitnessException(
            message="witness text needs '# kind:', '# x' and '# y'", code="SYNTAX"
        )
    try:
        x = parse_sequence("\n".join(blocks["x"]))
        y = parse_sequence("\n".join(blocks["y"]))
    except SequenceException as err:
        raise WitnessException(message=str(err), code="SYNTAX")

    return WitnessPair(x=x, y=y, kind=kind, branch=branch, constants=constants)
