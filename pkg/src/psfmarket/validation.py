"""Analytic-versus-simulation cross-checks run by the ``validate`` command.

Each check returns a :class:`CheckResult`; ``run_checks`` executes the
whole battery at either ``quick`` or ``full`` scale.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import analytic
from .params import CustomerSectorParams, ExpertiseParams, MarketScenario
from .simulation import (
    expected_growth_rate,
    expected_tail_exponent,
    fit_growth_rate,
    fit_price_slope,
    fit_tail_exponent,
    simulate_coupled_market,
    simulate_customer_population,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.1f}s)"


@dataclass(frozen=True)
class Scale:
    seeds: int
    n0: int
    horizon: float
    dt: float
    coupled_seeds: int
    coupled_horizon: float
    coupled_dt: float


FULL = Scale(seeds=10, n0=50_000, horizon=60.0, dt=0.02,
             coupled_seeds=10, coupled_horizon=60.0, coupled_dt=0.05)
QUICK = Scale(seeds=3, n0=20_000, horizon=60.0, dt=0.05,
              coupled_seeds=3, coupled_horizon=40.0, coupled_dt=0.1)

# Property-1 customer sector used by the population checks.
SECTIONAL = CustomerSectorParams(alpha=0.5, psi=0.1, mu=0.03)
CUSTOMER_BURN_IN = 10.0

# Growth regime: g = 0.12 against 2 * phi = 0.02.
GROWTH_CUSTOMER = CustomerSectorParams(alpha=1.0, psi=0.15, mu=0.03, nu=0.5, f0=20_000.0)
GROWTH_EXPERTISE = ExpertiseParams(phi=0.01, rho=0.05, theta=2.0)

# Consolidation with alpha = 1, theta = 4: g = 0.01 against 2 * phi = 0.06.
CONSOLIDATION_CUSTOMER = CustomerSectorParams(alpha=1.0, psi=0.05, mu=0.04, nu=0.5, f0=20_000.0)
CONSOLIDATION_EXPERTISE = ExpertiseParams(phi=0.03, rho=0.01, theta=4.0)
CONSOLIDATION_BURN_IN = 10.0


def _timed(name: str, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as err:  # a crash is a failed check, reported as such
        ok, detail = False, f"error: {type(err).__name__}: {err}"
    return CheckResult(name, ok, detail, time.perf_counter() - start)


def _rel(value: float, target: float) -> float:
    return abs(value - target) / abs(target)


# --------------------------------------------------------------------------
# customer population
# --------------------------------------------------------------------------


def customer_fits(scale: Scale, entry_mode: str, customer: CustomerSectorParams = SECTIONAL):
    """Per-seed ``(tail, slope)`` fits of final populations and count paths."""
    tails, slopes = [], []
    for seed in range(scale.seeds):
        traj, pop = simulate_customer_population(
            customer, scale.horizon, scale.dt, seed=seed, n0=scale.n0, entry_mode=entry_mode)
        tails.append(fit_tail_exponent(pop).value)
        slopes.append(fit_growth_rate(traj, burn_in=CUSTOMER_BURN_IN).value)
    return np.array(tails), np.array(slopes)


def check_tail_and_growth(scale: Scale, cache: dict | None = None) -> list[CheckResult]:
    """Flux entry: tail within 0.1 of alpha, count slope within 15% of g."""
    cache = {} if cache is None else cache
    start = time.perf_counter()
    try:
        if "flux" not in cache:
            cache["flux"] = customer_fits(scale, "flux")
    except Exception as err:
        detail = f"error: {type(err).__name__}: {err}"
        secs = time.perf_counter() - start
        return [CheckResult("tail exponent (flux entry)", False, detail, secs),
                CheckResult("count growth (flux entry)", False, detail, 0.0)]
    tails, slopes = cache["flux"]
    secs = time.perf_counter() - start
    tail, slope = float(tails.mean()), float(slopes.mean())
    want_tail = expected_tail_exponent(SECTIONAL, "flux")
    want_slope = expected_growth_rate(SECTIONAL, "flux")
    return [
        CheckResult("tail exponent (flux entry)", abs(tail - want_tail) <= 0.1,
                    f"mean Hill {tail:.4f} vs {want_tail:g} +/- 0.1 over {len(tails)} seeds", secs),
        CheckResult("count growth (flux entry)", _rel(slope, want_slope) <= 0.15,
                    f"mean slope {slope:.5f} vs {want_slope:g} +/- 15%", 0.0),
    ]


def check_prose_contrast(scale: Scale, cache: dict | None = None) -> CheckResult:
    """Count-form entry: slope alpha - mu within 10%, tail alpha/psi within 20%."""
    cache = {} if cache is None else cache

    def run():
        if "prose" not in cache:
            cache["prose"] = customer_fits(scale, "prose")
        tails, slopes = cache["prose"]
        tail, slope = float(tails.mean()), float(slopes.mean())
        want_tail = expected_tail_exponent(SECTIONAL, "prose")
        want_slope = expected_growth_rate(SECTIONAL, "prose")
        ok = _rel(slope, want_slope) <= 0.10 and _rel(tail, want_tail) <= 0.20
        return ok, (f"slope {slope:.4f} vs {want_slope:g} +/- 10%, "
                    f"tail {tail:.3f} vs {want_tail:g} +/- 20%")

    return _timed("entry-rule contrast (count entry)", run)


# --------------------------------------------------------------------------
# analytic growth equilibrium
# --------------------------------------------------------------------------


def growth_supply_check(t: float = 50.0, step: float = 0.01, delta: float = 0.5,
                        customer: CustomerSectorParams = GROWTH_CUSTOMER,
                        expertise: ExpertiseParams = GROWTH_EXPERTISE):
    """Log-slope of supply at ``t`` and the supply/demand ratio there.

    Returns ``(slope, ratio, g)``; the slope is a centred difference of
    ``ln S`` over ``[t - delta, t + delta]``.
    """
    flow = analytic.growth_entry_series(customer, expertise, t + delta, step)
    s_lo = analytic.supply(expertise, flow, t - delta)
    s_hi = analytic.supply(expertise, flow, t + delta)
    slope = (math.log(s_hi) - math.log(s_lo)) / (2 * delta)
    ratio = analytic.supply(expertise, flow, t) / analytic.demand(
        customer, t, analytic.growth_price(expertise))
    return slope, ratio, customer.net_growth()


def check_growth_supply() -> CheckResult:
    def run():
        slope, ratio, g = growth_supply_check()
        ok = abs(slope - g) <= 1e-3 and 0.95 <= ratio <= 1.05
        return ok, f"d ln S/dt {slope:.5f} vs g {g:g} +/- 1e-3, S/D {ratio:.4f} in [0.95, 1.05]"

    return _timed("growth supply tracks demand", run)


# --------------------------------------------------------------------------
# coupled market
# --------------------------------------------------------------------------


def coupled_growth_deviation(scale: Scale, seed: int = 0, burn_in: float = 20.0,
                             customer: CustomerSectorParams = GROWTH_CUSTOMER,
                             expertise: ExpertiseParams = GROWTH_EXPERTISE) -> float:
    """Largest relative gap between the clearing price and ``n*C_m`` after burn-in."""
    sc = MarketScenario(customer, expertise, scale.coupled_horizon, scale.coupled_dt, seed=seed)
    traj = simulate_coupled_market(sc)
    p0 = analytic.growth_price(expertise)
    sel = traj.t >= burn_in
    return float(np.max(np.abs(traj.price[sel] / p0 - 1.0)))


def check_coupled_growth(scale: Scale, customer: CustomerSectorParams = GROWTH_CUSTOMER,
                         expertise: ExpertiseParams = GROWTH_EXPERTISE) -> CheckResult:
    def run():
        dev = coupled_growth_deviation(scale, customer=customer, expertise=expertise)
        return dev <= 1e-3, f"max |p/(n C_m) - 1| after burn-in {dev:.2e} <= 1e-3"

    return _timed("coupled growth holds price at n*C_m", run)


def consolidation_fits(scale: Scale, customer: CustomerSectorParams = CONSOLIDATION_CUSTOMER,
                       expertise: ExpertiseParams = CONSOLIDATION_EXPERTISE):
    """Per-seed fitted log-price slopes and final ``min_size / s_min(t)`` ratios."""
    cust, exp_ = customer, expertise
    path = analytic.consolidation_path(cust, exp_, scale.coupled_horizon, scale.coupled_dt)
    slopes, size_ratios = [], []
    for seed in range(scale.coupled_seeds):
        sc = MarketScenario(cust, exp_, scale.coupled_horizon, scale.coupled_dt, seed=seed)
        traj = simulate_coupled_market(sc)
        slopes.append(fit_price_slope(traj, burn_in=CONSOLIDATION_BURN_IN).value)
        size_ratios.append(traj.min_size[-1] / path.s_min[-1])
    return np.array(slopes), np.array(size_ratios), path


def check_consolidation(scale: Scale, customer: CustomerSectorParams = CONSOLIDATION_CUSTOMER,
                        expertise: ExpertiseParams = CONSOLIDATION_EXPERTISE) -> CheckResult:
    def run():
        slopes, ratios, path = consolidation_fits(scale, customer, expertise)
        slope, ratio = float(slopes.mean()), float(ratios.mean())
        ok = _rel(slope, path.price_rate) <= 0.25 and abs(ratio - 1.0) <= 0.25
        return ok, (f"price slope {slope:.5f} vs {path.price_rate:.5f} +/- 25%, "
                    f"min size / s_min {ratio:.3f} vs 1 +/- 25%")

    return _timed("consolidation price and size paths", run)


# --------------------------------------------------------------------------
# break-even identity
# --------------------------------------------------------------------------


def random_break_even_errors(n_sets: int = 100, seed: int = 0) -> np.ndarray:
    """Relative profit at the minimal viable size for random parameters and prices."""
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(n_sets):
        e = ExpertiseParams(
            phi=float(rng.uniform(0.001, 0.1)), rho=float(rng.uniform(0.0, 0.3)),
            theta=float(rng.uniform(0.1, 5.0)), s_m=float(rng.uniform(0.5, 50.0)),
            C_m=float(rng.uniform(0.01, 100.0)), n=float(rng.uniform(1.0, 20.0)),
        )
        p = float(e.n * e.C_m * rng.uniform(1e-3, 1.0))
        s = analytic.min_viable_size(e, p)
        scale = s / e.n * p
        errors.append(abs(analytic.profitability(e, p, s)) / scale)
    return np.array(errors)


def check_break_even() -> CheckResult:
    def run():
        worst = float(random_break_even_errors().max())
        return worst <= 1e-10, f"max relative profit at min viable size {worst:.2e} <= 1e-10"

    return _timed("break-even at minimal viable size", run)


# --------------------------------------------------------------------------


def run_checks(quick: bool = False, report: Callable[[CheckResult], None] | None = None,
               growth: tuple[CustomerSectorParams, ExpertiseParams] | None = None,
               consolidation: tuple[CustomerSectorParams, ExpertiseParams] | None = None):
    """Run every check; ``report`` is called as each result becomes available.

    ``growth`` and ``consolidation`` replace the built-in coupled-market
    parameter pairs.
    """
    growth = growth or (GROWTH_CUSTOMER, GROWTH_EXPERTISE)
    consolidation = consolidation or (CONSOLIDATION_CUSTOMER, CONSOLIDATION_EXPERTISE)
    scale = QUICK if quick else FULL
    cache: dict = {}
    results: list[CheckResult] = []

    def emit(r):
        results.append(r)
        if report:
            report(r)

    for r in check_tail_and_growth(scale, cache):
        emit(r)
    emit(check_prose_contrast(scale, cache))
    emit(check_growth_supply())
    emit(check_coupled_growth(scale, *growth))
    emit(check_consolidation(scale, *consolidation))
    emit(check_break_even())
    return results
