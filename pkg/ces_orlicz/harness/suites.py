import asyncio
import logging
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import nullcontext
from typing import Callable, ContextManager, Optional

import numpy as np

from ces_orlicz.certifier.certifier import certify_nontrivial
from ces_orlicz.certifier.models import Verdict
from ces_orlicz.harness.models import (
    SequenceGenConfig,
    Suite,
    SuiteConfig,
    SuiteReport,
    TrialFailure,
    TrialOutcome,
)
from ces_orlicz.modular.bisection import TOL_FLOOR
from ces_orlicz.modular.evaluator import (
    ModularException,
    luxemburg_norm,
    modular,
    norm_modular_gap,
)
from ces_orlicz.modular.models import CertifiedValue, GeometricTail, Sequence
from ces_orlicz.modular.sequences import (
    SequenceException,
    add,
    dominates,
    drop_head,
    scale,
    truncate,
)
from ces_orlicz.orlicz.function import a_phi, delta2_at_zero
from ces_orlicz.orlicz.models import OrliczFunction
from ces_orlicz.witness.builder import WitnessException, sm_failure_witness

logger = logging.getLogger(__name__)

SUITE_IDS = {suite: i for i, suite in enumerate(Suite)}
# relative width of the ladder modulars; neighbouring rungs differ by 2^p >= 2
LADDER_REL = 1e-3


class _Trial:
    __slots__ = "cfg", "suite", "phi", "outcome", "rng"

    def __init__(
        self,
        cfg: SuiteConfig,
        suite: Suite,
        index: int,
        phi: OrliczFunction,
        trial: int,
    ) -> None:
        self.cfg = cfg
        self.suite = suite
        self.phi = phi
        self.outcome = TrialOutcome(phi=index, trial=trial)
        self.rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, SUITE_IDS[suite], trial])
        )

    @property
    def tol(self) -> float:
        return self.cfg.tol

    def check(self, name: str, passed: bool, lhs: float, rhs: float) -> bool:
        if not passed:
            self.outcome.failures.append(
                TrialFailure(
                    suite=self.suite,
                    phi=self.outcome.phi,
                    trial=self.outcome.trial,
                    seed=self.cfg.seed,
                    check=name,
                    lhs=lhs,
                    rhs=rhs,
                )
            )
        return passed

    def estimate(self, key: str, value: float) -> None:
        estimates = self.outcome.estimates
        estimates[key] = _merge(key, estimates.get(key), value)

    def norm(self, x: Sequence, tol: Optional[float] = None) -> CertifiedValue:
        return luxemburg_norm(self.phi, x, tol or self.tol)

    def modular(self, x: Sequence, eps: Optional[float] = None) -> CertifiedValue:
        return modular(self.phi, x, eps or self.tol)


def _merge(key: str, old: Optional[float], new: float) -> float:
    if old is None:
        return new
    return max(old, new) if key.startswith("max_") else min(old, new)


def draw_sequence(
    rng: np.random.Generator,
    gen: SequenceGenConfig,
    nonnegative: bool = False,
    with_tail: Optional[bool] = None,
) -> Sequence:
    """A nonzero sequence; the same number of draws is taken on every path."""
    m = int(rng.integers(gen.support_min, gen.support_max, endpoint=True))
    head = rng.uniform(gen.magnitude_min, gen.magnitude_max, size=m)
    signs = rng.choice((-1.0, 1.0), size=m)
    tail_draw = rng.random()
    c = rng.uniform(gen.magnitude_max / 10, gen.magnitude_max)
    gamma = rng.uniform(gen.gamma_min, gen.gamma_max)

    if not nonnegative:
        head = head * signs
    if not np.any(head):
        head[0] = gen.magnitude_max
    if with_tail is None:
        with_tail = tail_draw < gen.tail_probability

    return Sequence(
        head=tuple(float(v) for v in head),
        tail=GeometricTail(c=float(c), gamma=float(gamma)) if with_tail else None,
    )


def _ladder(depth: int) -> list[int]:
    """1, 2, 4, ... below depth, then depth itself."""
    steps = [2**j for j in range(depth.bit_length()) if 2**j < depth]
    return steps + [depth]


def _relative_modular(phi: OrliczFunction, x: Sequence, rel: float) -> CertifiedValue:
    eps = 1.0
    while True:
        g = modular(phi, x, eps)
        if g.is_infinite or g.width <= rel * g.lo or eps <= TOL_FLOOR:
            return g
        eps = max(min(eps / 16, rel * g.lo), TOL_FLOOR)


def _normalize(t: _Trial, x: Sequence) -> Optional[Sequence]:
    """x / ||x||, with the norm refined once the scale is near 1."""
    coarse = t.norm(x)
    if coarse.lo == 0:
        return None
    y = scale(x, 1 / coarse.mid)
    fine = t.norm(y, t.tol / 16)
    return scale(y, 1 / fine.mid)


def _koethe_trial(t: _Trial) -> None:
    y = draw_sequence(t.rng, t.cfg.sequence_gen)
    m = len(y.head)
    factors = t.rng.uniform(0.0, 1.0, size=m) * t.rng.choice((-1.0, 1.0), size=m)
    shrink = float(t.rng.uniform(0.0, 1.0))

    x = Sequence(
        head=tuple(float(f * v) for f, v in zip(factors, y.head)),
        tail=None
        if y.tail is None
        else GeometricTail(c=shrink * y.tail.c, gamma=y.tail.gamma),
    )
    t.check("dominated", dominates(y, x), 0.0, 0.0)

    norm_x, norm_y = t.norm(x), t.norm(y)
    t.check("finite_norm", math.isfinite(norm_x.hi), norm_x.hi, math.inf)
    t.check(
        "norm_monotone", norm_x.lo <= norm_y.hi + 2 * t.tol, norm_x.lo, norm_y.hi
    )


def _fatou_trial(t: _Trial) -> None:
    x = draw_sequence(t.rng, t.cfg.sequence_gen, nonnegative=True, with_tail=True)
    depths = _ladder(t.cfg.fatou_depth)
    norms = [t.norm(truncate(x, k)) for k in depths]

    for k, prev, cur in zip(depths[1:], norms, norms[1:]):
        t.check(f"truncation_monotone@{k}", cur.hi >= prev.lo, cur.hi, prev.lo)

    full = t.norm(x)
    t.check("limit_dominates", full.hi >= norms[-1].lo, full.hi, norms[-1].lo)
    gap = full.lo - norms[-1].hi
    t.check(f"truncation_limit@{depths[-1]}", gap <= t.tol, gap, t.tol)
    t.estimate("max_gap", max(gap, 0.0))


def _order_continuity_trial(t: _Trial) -> None:
    x = draw_sequence(t.rng, t.cfg.sequence_gen, with_tail=True)
    depths = _ladder(t.cfg.order_depth)
    norms = [t.norm(drop_head(x, n)) for n in depths]

    for n, prev, cur in zip(depths[1:], norms, norms[1:]):
        t.check(f"tail_norm_decreasing@{n}", cur.lo <= prev.hi, cur.lo, prev.hi)

    last = t.norm(drop_head(x, depths[-1]), t.tol / 10)
    t.check(f"tail_norm_vanishes@{depths[-1]}", last.hi <= t.tol, last.hi, t.tol)
    t.estimate("max_tail_norm", last.hi)


def _ladders(t: _Trial, z: Sequence) -> None:
    cfg = t.cfg
    steps = range(1, cfg.ladder_length + 1)

    # x / 2^n: modular and norm vanish together
    rhos = [_relative_modular(t.phi, scale(z, 2.0**-n), LADDER_REL) for n in steps]
    norm_last = t.norm(scale(z, 2.0**-steps[-1]))
    for n, prev, cur in zip(steps[1:], rhos, rhos[1:]):
        t.check(f"modular_shrinks@{n}", cur.hi < prev.lo, cur.hi, prev.lo)
    small = cfg.small_threshold
    t.check("modular_small", rhos[-1].hi <= small, rhos[-1].hi, small)
    t.check("norm_small", norm_last.hi <= small, norm_last.hi, small)

    # x * 2^n: a diverging modular drags the norm along
    rhos = [_relative_modular(t.phi, scale(z, 2.0**n), LADDER_REL) for n in steps]
    norms = [t.norm(scale(z, 2.0**n), t.tol * 2.0**n) for n in steps]
    for n, prev, cur in zip(steps[1:], rhos, rhos[1:]):
        t.check(f"modular_grows@{n}", cur.lo > prev.hi, cur.lo, prev.hi)
    for n, prev, cur in zip(steps[1:], norms, norms[1:]):
        t.check(f"norm_grows@{n}", cur.lo > prev.hi, cur.lo, prev.hi)
    large = cfg.large_threshold
    t.check("modular_large", rhos[-1].lo >= large, rhos[-1].lo, large)
    t.check("norm_large", norms[-1].lo >= large, norms[-1].lo, large)


def _continuity(t: _Trial, z: Sequence, rho_z: CertifiedValue) -> None:
    gen = t.cfg.sequence_gen
    v = truncate(draw_sequence(t.rng, gen), gen.support_max)
    eps = t.cfg.continuity_eps

    for j in range(t.cfg.continuity_steps):
        s = scale(v, 2.0**-j)
        moved = t.modular(add(z, s))
        diff = max(moved.hi - rho_z.lo, rho_z.hi - moved.lo)
        if diff < eps:
            t.estimate("continuity_delta", t.modular(s).hi)
            return
    t.check("modular_continuity", False, diff, eps)


def _norm_modular_trial(t: _Trial) -> None:
    x = draw_sequence(t.rng, t.cfg.sequence_gen)
    z = _normalize(t, x)
    if z is None:
        return

    rho_z = t.modular(z, t.tol / 4)
    t.check("unit_modular", rho_z.within(1.0, t.tol), rho_z.mid, 1.0)

    _ladders(t, z)

    gap = norm_modular_gap(t.phi, x, t.tol)
    t.check(f"norm_modular_gap:{gap.regime}", gap.passed, gap.norm.mid, gap.modular.mid)

    K, a = (delta2_at_zero(t.phi).constants[key] for key in ("K", "a"))
    peak = max(abs(v) for v in x.head)
    if x.tail is not None:
        peak = max(peak, abs(x.tail.c) * x.tail.gamma)
    w = scale(x, a / peak)
    rho_w, rho_2w = t.modular(w), t.modular(scale(w, 2.0))
    bound = K * rho_w.hi
    t.check("delta2_modular", rho_2w.lo <= bound + t.tol, rho_2w.lo, bound)

    _continuity(t, z, rho_z)


def _monotonicity_trial(t: _Trial) -> None:
    gen = t.cfg.sequence_gen
    z = _normalize(t, draw_sequence(t.rng, gen, nonnegative=True))
    if z is None:
        return
    norm_z, rho_z = t.norm(z), t.modular(z)

    for eps in t.cfg.epsilons:
        v = truncate(draw_sequence(t.rng, gen, nonnegative=True), gen.support_max)
        stretch = 1 + float(t.rng.random())
        norm_v = t.norm(v)
        if norm_v.lo == 0:
            continue

        y = scale(v, eps * stretch / norm_v.lo)
        s = add(z, y)
        gap = t.norm(s).lo - norm_z.hi
        t.check(f"monotone_gap@{eps:g}", gap > 0, gap, 0.0)
        t.estimate(f"delta({eps:g})", gap)

        rho_s, rho_y = t.modular(s), t.modular(y)
        if t.cfg.corrupt_superadditivity:
            lhs, rhs = rho_s.lo, rho_z.hi + rho_y.hi + 2 * t.tol
        else:
            lhs, rhs = rho_z.lo + rho_y.lo, rho_s.hi + 2 * t.tol
        t.check(f"superadditive@{eps:g}", lhs <= rhs, lhs, rhs)


def _execute(run: Callable[[_Trial], None], t: _Trial) -> TrialOutcome:
    try:
        run(t)
    except (ModularException, SequenceException) as err:
        t.check(f"raised:{err.code}", False, math.nan, math.nan)
    return t.outcome


def _nontrivial(phi: OrliczFunction) -> Optional[str]:
    verdict = certify_nontrivial(phi).verdict
    return None if verdict == Verdict.holds else f"NONTRIVIAL {verdict.value}"


def _delta2(phi: OrliczFunction) -> Optional[str]:
    if reason := _nontrivial(phi):
        return reason
    verdict = delta2_at_zero(phi).verdict
    return None if verdict == Verdict.holds else f"DELTA2_AT_ZERO {verdict.value}"


def _executor(cfg: SuiteConfig) -> ContextManager[Optional[Executor]]:
    if cfg.processes:
        return ProcessPoolExecutor(max_workers=cfg.processes)
    return nullcontext()


async def _run_suite(
    cfg: SuiteConfig,
    suite: Suite,
    admit: Callable[[OrliczFunction], Optional[str]],
    run: Callable[[_Trial], None],
) -> SuiteReport:
    report = SuiteReport(suite=suite)
    admitted = []
    for i, phi in enumerate(cfg.phi_pool):
        if reason := admit(phi):
            report.skipped.append(f"phi#{i} ({reason})")
        else:
            admitted.append((i, phi))

    loop = asyncio.get_running_loop()
    with _executor(cfg) as pool:
        outcomes = await asyncio.gather(
            *(
                loop.run_in_executor(pool, _execute, run, _Trial(cfg, suite, i, phi, k))
                for i, phi in admitted
                for k in range(cfg.trials)
            )
        )

    for outcome in sorted(outcomes, key=lambda o: (o.phi, o.trial)):
        report.failures.extend(outcome.failures)
        for key, value in outcome.estimates.items():
            label = f"phi#{outcome.phi} {key}"
            report.estimates[label] = _merge(key, report.estimates.get(label), value)
    report.trials = len(outcomes)

    logger.info(
        "%s: %d trials, %d failures", suite.value, report.trials, len(report.failures)
    )
    return report


async def run_koethe_suite(cfg: SuiteConfig) -> SuiteReport:
    return await _run_suite(cfg, Suite.koethe, _nontrivial, _koethe_trial)


async def run_fatou_suite(cfg: SuiteConfig) -> SuiteReport:
    return await _run_suite(cfg, Suite.fatou, _nontrivial, _fatou_trial)


async def run_order_continuity_suite(cfg: SuiteConfig) -> SuiteReport:
    return await _run_suite(
        cfg, Suite.order_continuity, _delta2, _order_continuity_trial
    )


async def run_norm_modular_suite(cfg: SuiteConfig) -> SuiteReport:
    return await _run_suite(cfg, Suite.norm_modular, _delta2, _norm_modular_trial)


def _injected_sm_check(
    cfg: SuiteConfig, index: int, phi: OrliczFunction
) -> TrialFailure | str:
    """The strict monotonicity witness: x <= y, x != y, yet ||y|| = ||x||."""
    try:
        w = sm_failure_witness(phi, cfg.tol)
    except WitnessException as err:
        return f"phi#{index}: no strict monotonicity witness ({err.code})"

    norm_x = luxemburg_norm(phi, w.x, cfg.tol)
    norm_y = luxemburg_norm(phi, w.y, cfg.tol)
    diff = CertifiedValue(lo=norm_y.lo - norm_x.hi, hi=norm_y.hi - norm_x.lo)
    if diff.hi > 2 * cfg.tol:
        return TrialFailure(
            suite=Suite.monotonicity,
            phi=index,
            trial=-1,
            seed=cfg.seed,
            check="sm_witness_norm_gap",
            lhs=diff.hi,
            rhs=2 * cfg.tol,
        )
    return (
        f"phi#{index}: strict monotonicity fails as expected,"
        f" ||y|| - ||x|| in {diff}"
    )


async def run_monotonicity_suite(cfg: SuiteConfig) -> SuiteReport:
    report = await _run_suite(cfg, Suite.monotonicity, _delta2, _monotonicity_trial)

    loop = asyncio.get_running_loop()
    for i, phi in enumerate(cfg.phi_pool):
        if _nontrivial(phi) is not None or a_phi(phi) == 0:
            continue
        result = await loop.run_in_executor(None, _injected_sm_check, cfg, i, phi)
        if isinstance(result, TrialFailure):
            report.failures.append(result)
        else:
            report.expected.append(result)
    return report


async def run_all_suites(cfg: SuiteConfig) -> list[SuiteReport]:
    return [
        await run_koethe_suite(cfg),
        await run_fatou_suite(cfg),
        await run_order_continuity_suite(cfg),
        await run_norm_modular_suite(cfg),
        await run_monotonicity_suite(cfg),
    ]


def format_report(reports: list[SuiteReport]) -> str:
    lines = []
    for report in reports:
        lines += [
            f"FAIL suite={f.suite.value} trial={f.trial} phi={f.phi} seed={f.seed}"
            f" check={f.check} lhs={f.lhs:.9g} rhs={f.rhs:.9g}"
            for f in report.failures
        ]

    lines.append("summary:")
    for report in reports:
        lines.append(
            f"  {report.suite.value}: trials={report.trials}"
            f" failures={len(report.failures)}"
        )
        lines += [f"    skipped {entry}" for entry in report.skipped]
        lines += [f"    expected {entry}" for entry in report.expected]
        lines += [
            f"    estimate {key}={value:.9g}" for key, value in report.estimates.items()
        ]

    failures = sum(len(report.failures) for report in reports)
    lines.append(f"  total: suites={len(reports)} failures={failures}")
    return "\n".join(lines) + "\n"
