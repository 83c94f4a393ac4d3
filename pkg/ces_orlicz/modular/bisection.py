import logging
import math
from typing import Any, Callable, Optional

from pydantic import BaseModel

from ces_orlicz.modular.models import CertifiedValue

logger = logging.getLogger(__name__)

TOL_FLOOR = 1e-14
MAX_DOUBLINGS = 64
MAX_ITERATIONS = 400
ULP_SLACK = 4

Measure = Callable[[float, float], CertifiedValue]


class BracketException(Exception):
    def __init__(self, **kwargs: Any) -> None:
        super().__init__(kwargs.get("message"))
        self.code: str = kwargs.get("code", "NO_BRACKET")


class LevelSolution(BaseModel):
    """
    Bracket [lo, hi] of t* = sup{t >= 0 : g(t) <= 1}. `point` is the last
    evaluated t whose certified g(t) fell inside the requested band around 1.
    """

    lo: float
    hi: float
    point: Optional[float] = None
    value: Optional[CertifiedValue] = None


def down(value: float) -> float:
    return max(value - ULP_SLACK * math.ulp(value), 0.0)


def up(value: float) -> float:
    return value + ULP_SLACK * math.ulp(value)


class _Bracket:
    __slots__ = "lo", "hi", "homogeneous", "history", "decided"

    def __init__(self, homogeneous: bool) -> None:
        self.lo = 0.0
        self.hi = math.inf
        self.homogeneous = homogeneous
        # (log t, log g(t)) of the last two evaluations with a finite positive g
        self.history: list[tuple[float, float]] = []
        self.decided = False

    def next_point(self) -> float:
        """
        Arithmetic midpoint in general. For homogeneous g the step is a secant
        on log g against log t, kept strictly inside the bracket and falling
        back to the geometric midpoint.
        """

        if not (self.homogeneous and self.lo > 0):
            return (self.lo + self.hi) / 2
        if self.decided and len(self.history) == 2:
            (t0, g0), (t1, g1) = self.history
            if t1 != t0 and (g1 - g0) / (t1 - t0) > 0:
                s = t1 - g1 * (t1 - t0) / (g1 - g0)
                if math.log(self.lo) < s < math.log(self.hi):
                    t = math.exp(s)
                    if self.lo < t < self.hi:
                        return t
        return math.sqrt(self.lo) * math.sqrt(self.hi)

    def update(self, t: float, g: CertifiedValue) -> None:
        self.decided = g.hi <= 1 or g.lo > 1
        if self.homogeneous and g.lo > 0 and math.isfinite(g.mid):
            self.history = [*self.history[-1:], (math.log(t), math.log(g.mid))]
        if g.hi <= 1:
            self.lo = max(self.lo, t)
            if self.homogeneous and g.lo > 0:
                # g(s) >= (s / t) g(t) for s >= t
                self.hi = min(self.hi, up(t / g.lo))
        elif g.lo > 1:
            self.hi = min(self.hi, t)
            if self.homogeneous and math.isfinite(g.hi):
                # g(s) <= (s / t) g(t) for s <= t
                self.lo = max(self.lo, down(t / g.hi))
        elif self.homogeneous:
            self.lo = max(self.lo, down(t / g.hi))
            if g.lo > 0:
                self.hi = min(self.hi, up(t / g.lo))


def solve_unit_level(
    measure: Measure,
    start: float,
    converged: Callable[[float, float], bool],
    eps: float,
    homogeneous: bool,
    band: Optional[float] = None,
    floor: float = 0.0,
    lower_known: bool = False,
) -> LevelSolution:
    """
    Certified bisection for t* = sup{t >= floor : g(t) <= 1} where g is
    nondecreasing and continuous and measure(t, eps) returns g(t) to width eps.
    With homogeneous=True, g is also convex with g(0) = 0, so every evaluation
    brackets t* by itself: t* lies in [t / g_hi, t / g_lo]. Pass lower_known
    when g(floor) <= 1 has already been certified.
    """

    bracket = _Bracket(homogeneous)
    bracket.lo = floor

    def decide(t: float) -> CertifiedValue:
        e = eps
        while True:
            g = measure(t, e)
            if g.hi <= 1 or g.lo > 1:
                return g
            if math.isinf(g.hi):
                return g
            if band is not None and g.within(1.0, band):
                return g
            if homogeneous and g.lo > 0 and converged(down(t / g.hi), up(t / g.lo)):
                return g
            if e <= TOL_FLOOR:
                return g
            e = max(e / 10, TOL_FLOOR)
            logger.debug("straddle at t=%r, tightening eps to %r", t, e)

    def accept(t: float, g: CertifiedValue) -> Optional[LevelSolution]:
        bracket.update(t, g)
        if band is not None and g.within(1.0, band):
            return LevelSolution(lo=bracket.lo, hi=bracket.hi, point=t, value=g)
        return None

    t = start
    g = decide(t)
    if done := accept(t, g):
        return done

    doublings = 0
    while not math.isfinite(bracket.hi):
        if doublings == MAX_DOUBLINGS:
            raise BracketException(
                message=f"level 1 not exceeded up to t={t!r}", code="NO_UPPER_BRACKET"
            )
        doublings += 1
        t *= 2
        g = decide(t)
        if done := accept(t, g):
            return done

    t, halvings = start, 0
    while not (bracket.lo > floor or lower_known):
        if halvings == MAX_DOUBLINGS:
            raise BracketException(
                message=f"level 1 exceeded down to t={t!r}, g={g}",
                code="NO_LOWER_BRACKET",
            )
        halvings += 1
        t = floor + (t - floor) / 2
        g = decide(t)
        if done := accept(t, g):
            return done

    for _ in range(MAX_ITERATIONS):
        if converged(bracket.lo, bracket.hi):
            break
        t = bracket.next_point()
        if t <= bracket.lo or t >= bracket.hi:
            break
        g = decide(t)
        if done := accept(t, g):
            return done
        if not (g.hi <= 1 or g.lo > 1) and not homogeneous:
            logger.debug("undecidable comparison at t=%r, g=%s", t, g)
            return LevelSolution(lo=bracket.lo, hi=bracket.hi, point=t, value=g)

    logger.debug("level bracket [%r, %r]", bracket.lo, bracket.hi)
    return LevelSolution(lo=bracket.lo, hi=bracket.hi)
