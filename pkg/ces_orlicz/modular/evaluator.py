import logging
import math
import sys
from typing import Any, Callable, Optional

import numpy as np

from ces_orlicz.modular.bisection import (
    BracketException,
    down,
    solve_unit_level,
    up,
)
from ces_orlicz.modular.models import CertifiedValue, NormModularGap, Sequence
from ces_orlicz.modular.sequences import is_zero
from ces_orlicz.orlicz.function import eval_phi, first_piece_end
from ces_orlicz.orlicz.models import OrliczFunction

logger = logging.getLogger(__name__)

ULP_SLACK = 4
MIN_TRUNCATION = 16
MAX_TRUNCATION = 2**22
# first modular width requested by the norm bisection, tightened on straddles
LEVEL_EPS = 1e-3
MAX_START = 1e300
# certified lower end once a term or a partial sum leaves float range
OVERFLOW_FLOOR = sys.float_info.max / 2

PartialSums = Callable[[np.ndarray], np.ndarray]


class ModularException(Exception):
    def __init__(self, **kwargs: Any) -> None:
        super().__init__(kwargs.get("message"))
        self.code: str = kwargs.get("code", "PRECONDITION")


def widen(lo: float, hi: float) -> CertifiedValue:
    """Fold the rounding slack into both bounds of a nonnegative quantity."""
    if lo == math.inf:
        return CertifiedValue.infinite()
    return CertifiedValue(
        lo=max(lo - ULP_SLACK * math.ulp(lo), 0.0),
        hi=hi + ULP_SLACK * math.ulp(hi),
    )


def _head_abs(x: Sequence) -> np.ndarray:
    return np.abs(np.asarray(x.head, dtype=float))


def total_mass(x: Sequence) -> float:
    """S_inf = sum of |x(i)| over all i."""
    head = math.fsum(abs(v) for v in x.head)
    if x.tail is None:
        return head
    gamma = x.tail.gamma
    return head + abs(x.tail.c) * gamma / (1 - gamma)


def prefix_sums(x: Sequence) -> PartialSums:
    """n -> S_n for integer arrays n >= 1, exact up to rounding."""
    cum = np.cumsum(_head_abs(x))
    m = len(cum)
    head_total = float(cum[-1]) if m else 0.0
    tail = x.tail

    def sums(n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        out = np.empty(n.shape, dtype=float)
        inside = n <= m
        out[inside] = cum[n[inside] - 1]

        outside = ~inside
        if tail is None:
            out[outside] = head_total
        else:
            gamma = tail.gamma
            k = (n[outside] - m).astype(float)
            # sum_{j=1..k} gamma^j = gamma (1 - gamma^k) / (1 - gamma)
            geometric = gamma * -np.expm1(k * math.log(gamma)) / (1 - gamma)
            out[outside] = head_total + abs(tail.c) * geometric
        return out

    return sums


def partial_sum(x: Sequence, n: int) -> float:
    return float(prefix_sums(x)(np.array([n]))[0])


def cesaro_mean(x: Sequence, n: int) -> float:
    """sigma x(n) = S_n / n"""
    if n < 1:
        raise ValueError("n must be a positive integer")
    return partial_sum(x, n) / n


def modular_tail_bound(
    phi: OrliczFunction, S_lo: float, S_hi: float, N: int, refined: bool = False
) -> CertifiedValue:
    """
    Bracket sum_{n >= N} phi(s_n / n) for any s_n in [S_lo, S_hi] by the
    integral test on the first piece of phi. With refined=True the bracket is
    intersected with the trapezoid bracket, which holds because n^-p is convex
    with decreasing second derivative.
    """

    if not 0 <= S_lo <= S_hi:
        raise ModularException(
            message=f"need 0 <= S_lo <= S_hi, got {S_lo!r}, {S_hi!r}",
            code="PRECONDITION",
        )
    if S_hi == 0:
        return CertifiedValue.exact(0.0)

    end = first_piece_end(phi)
    if S_hi / N > end:
        raise ModularException(
            message=f"S_hi / N = {S_hi / N!r} leaves the first piece ending at {end!r}",
            code="PRECONDITION",
        )

    first = phi.first
    if first.is_zero:
        return CertifiedValue.exact(0.0)

    if first.slope_offset > 0:
        # dominated from below by the harmonic series s0 * S_lo / n
        if S_lo > 0:
            return CertifiedValue.infinite()
        return CertifiedValue(lo=0.0, hi=math.inf)

    a, p = first.coeff, first.exponent
    integral = N ** (1 - p) / (p - 1)
    lo_sum = integral
    hi_sum = N**-p + integral
    if refined:
        trapezoid = integral + N**-p / 2
        lo_sum = max(lo_sum, trapezoid)
        hi_sum = min(
            hi_sum, trapezoid + (p * N ** (-p - 1) + p * (p + 1) * N ** (-p - 2)) / 12
        )

    return widen(a * S_lo**p * lo_sum, a * S_hi**p * hi_sum)


def _overflowed() -> CertifiedValue:
    return CertifiedValue(lo=OVERFLOW_FLOOR, hi=math.inf)


def _series(
    phi: OrliczFunction,
    sums: PartialSums,
    mass: float,
    start: int,
    min_truncation: int,
    eps: float,
    level: Optional[float] = None,
) -> CertifiedValue:
    """
    Certified sum_{n >= start} phi(S_n / n) for nondecreasing S_n -> mass.
    Terms below the truncation N are summed exactly, the rest is bracketed
    with [S_N, mass]; N doubles until the width is at most eps.

    With a level, the sum also stops as soon as it is certified to lie above
    or at most at that level, so the returned width may exceed eps and the
    upper end may be +inf.
    """

    if mass == 0:
        return CertifiedValue.exact(0.0)

    # the tail bracket needs every S_n / n past N on the first piece
    end = first_piece_end(phi)
    tail_from = max(start, min_truncation)
    if math.isfinite(end):
        tail_from = max(tail_from, math.ceil(mass / end) + 1)

    N = max(start, MIN_TRUNCATION)
    done = start
    blocks: list[float] = []
    S_N = min(float(sums(np.array([N]))[0]), mass) if N == done else 0.0
    while True:
        if N > done:
            n = np.arange(done, N + 1, dtype=np.int64)
            s = sums(n)
            with np.errstate(over="ignore"):
                terms = eval_phi(phi, s[:-1] / n[:-1])
            if not np.isfinite(terms).all():
                logger.debug("modular term overflow below n=%d", N)
                return _overflowed()
            try:
                blocks.append(math.fsum(terms.tolist()))
            except OverflowError:
                return _overflowed()
            S_N = min(float(s[-1]), mass)
            done = N

        try:
            head = math.fsum(blocks)
        except OverflowError:
            return _overflowed()
        if level is not None and down(head) > level:
            return CertifiedValue(lo=down(head), hi=math.inf)

        if N >= tail_from:
            tail = modular_tail_bound(phi, S_N, mass, N, refined=True)
            if tail.is_infinite:
                return tail
            if not math.isfinite(head + tail.lo):
                return _overflowed()
            value = widen(head + tail.lo, head + tail.hi)
            if value.width <= eps:
                return value
            if level is not None and (value.lo > level or value.hi <= level):
                return value
        else:
            value = CertifiedValue(lo=down(head), hi=math.inf)

        if N >= MAX_TRUNCATION:
            logger.warning(
                "modular bracket %s wider than eps %r at truncation cap %d",
                value,
                eps,
                N,
            )
            return value

        N = min(2 * N, MAX_TRUNCATION)
        logger.debug("modular bracket %s, truncation grows to %d", value, N)


def modular(phi: OrliczFunction, x: Sequence, eps: float) -> CertifiedValue:
    """rho_phi(x) = sum over n of phi(sigma x(n)), certified to width eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if is_zero(x):
        return CertifiedValue.exact(0.0)
    return _series(phi, prefix_sums(x), total_mass(x), 1, len(x.head) + 1, eps)


def scaled_modular(
    phi: OrliczFunction,
    x: Sequence,
    t: float,
    eps: float,
    level: Optional[float] = None,
) -> CertifiedValue:
    """rho_phi(t x) without materialising the scaled sequence."""
    sums = prefix_sums(x)
    return _series(
        phi,
        lambda n: t * sums(n),
        t * total_mass(x),
        1,
        len(x.head) + 1,
        eps,
        level,
    )


def series_from(
    phi: OrliczFunction, s: float, start: int, eps: float
) -> CertifiedValue:
    """Certified sum_{n >= start} phi(s / n)."""
    s = abs(s)
    return _series(phi, lambda n: np.full(n.shape, s), s, start, start, eps)


def luxemburg_norm(phi: OrliczFunction, x: Sequence, tol: float) -> CertifiedValue:
    """
    inf{lam > 0 : rho_phi(x / lam) <= 1} to width tol. The search runs over
    t = 1 / lam, where t -> rho_phi(t x) is convex, nondecreasing and
    vanishes at 0, so each evaluation only has to settle rho_phi(t x) against 1.
    """

    if tol <= 0:
        raise ValueError("tol must be positive")
    if is_zero(x):
        return CertifiedValue.exact(0.0)

    mass = total_mass(x)
    sums = prefix_sums(x)
    m = len(x.head) + 1

    def measure(t: float, eps: float) -> CertifiedValue:
        return _series(phi, lambda n: t * sums(n), t * mass, 1, m, eps, level=1.0)

    def converged(t_lo: float, t_hi: float) -> bool:
        return t_lo > 0 and 1 / t_lo - 1 / t_hi <= tol / 2

    try:
        level = solve_unit_level(
            measure,
            # sigma(t x)(n) <= 1 / n here
            start=min(1 / mass, MAX_START),
            converged=converged,
            eps=LEVEL_EPS,
            homogeneous=True,
        )
    except BracketException as err:
        raise ModularException(
            message=f"no scaling of x has a finite modular: {err}",
            code="NO_FINITE_SCALING",
        )

    lam_lo = down(1 / level.hi)
    lam_hi = up(1 / level.lo)
    if lam_hi - lam_lo > tol + 16 * math.ulp(lam_hi):
        raise ModularException(
            message=f"norm bracket [{lam_lo!r}, {lam_hi!r}] wider than {tol!r}",
            code="UNDECIDABLE",
        )
    return CertifiedValue(lo=lam_lo, hi=lam_hi)


def norm_modular_gap(phi: OrliczFunction, x: Sequence, tol: float) -> NormModularGap:
    """
    Check the norm-modular relations: rho <= 1 gives rho <= |x| <= 1,
    rho > 1 gives 1 <= |x| <= rho, and always ||x| - 1| <= |rho - 1|.
    """

    rho = modular(phi, x, tol)
    norm = luxemburg_norm(phi, x, tol)
    slack = 2 * tol

    if rho.hi <= 1:
        regime = "below"
        ordered = rho.lo <= norm.hi + slack and norm.lo <= 1 + slack
    elif rho.lo > 1:
        regime = "above"
        ordered = norm.hi >= 1 - slack and norm.lo <= rho.hi + slack
    else:
        regime = "boundary"
        ordered = norm.within(1.0, rho.width + slack)

    # distances of each interval from 1
    norm_distance = max(norm.lo - 1, 1 - norm.hi, 0.0)
    rho_distance = max(rho.lo - 1, 1 - rho.hi, 0.0)
    bounded = rho.is_infinite or norm_distance <= rho_distance + rho.width + slack

    return NormModularGap(
        modular=rho,
        norm=norm,
        regime=regime,
        ordered=ordered,
        gap_bounded=bounded,
    )
