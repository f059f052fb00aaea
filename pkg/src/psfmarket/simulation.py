"""Seeded Monte Carlo simulation of customer-firm and practice populations.

Firms are tracked as cohorts: every firm that entered in the same step has
the same size forever (growth is deterministic), so a population is a list
of ``(size, count)`` pairs and survival is one binomial draw per cohort.
This is exact in distribution and keeps memory bounded even when the
population reaches billions of firms.

Cohorts are stored in entry order; because all firms grow by the same
factor and entrants arrive at the smallest size, sizes are always
non-increasing along the arrays.  The coupled market relies on that order.

Step order (fixed):

1. random exits, each firm surviving with probability ``exp(-rate * dt)``;
2. deterministic growth of survivors by ``exp(growth * dt)``;
3. market clearing (coupled runs only);
4. entry at the entry size, or competitive culls below the minimal viable
   size when the clearing price is under ``n * C_m``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.optimize import bisect

from . import analytic
from .errors import EstimationError, InsufficientDataError, SimulationError
from .params import (
    ENTRY_MODES,
    CustomerSectorParams,
    EntryFlowSeries,
    ExpertiseParams,
    MarketScenario,
    net_growth,
)

R_MAX_FACTOR = 1e4
DEFAULT_N0 = 50_000


# --------------------------------------------------------------------------
# value types
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FirmPopulation:
    """Cross-section of firm sizes at time ``t`` as a multiset.

    ``sizes[i]`` occurs ``counts[i]`` times.  ``entries`` and ``exits`` are
    cumulative over the run that produced the population.
    """

    sizes: np.ndarray
    counts: np.ndarray
    t: float = 0.0
    entry_size: float = 1.0
    entries: int = 0
    exits: int = 0

    def __post_init__(self):
        sizes = np.array(self.sizes, dtype=float)
        counts = np.array(self.counts, dtype=np.int64)
        if sizes.shape != counts.shape or sizes.ndim != 1:
            raise ValueError("sizes and counts must be 1-d arrays of equal length")
        if np.any(counts < 0):
            raise ValueError("counts must be >= 0")
        keep = counts > 0
        sizes, counts = sizes[keep], counts[keep]
        if np.any(sizes < self.entry_size * (1 - 1e-12)):
            raise ValueError("a firm is below its population's entry size")
        sizes.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_sizes(cls, sizes, entry_size: float | None = None, t: float = 0.0):
        sizes = np.asarray(sizes, dtype=float)
        if entry_size is None:
            entry_size = float(sizes.min()) if sizes.size else 1.0
        return cls(sizes, np.ones(sizes.shape, dtype=np.int64), t=t, entry_size=entry_size)

    @property
    def size(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return self.size

    @property
    def total_size(self) -> float:
        return float(np.dot(self.sizes, self.counts))

    def expanded(self) -> np.ndarray:
        """All individual sizes; only sensible for small populations."""
        return np.repeat(self.sizes, self.counts)


TRAJECTORY_COLUMNS = (
    "t",
    "count",
    "total_size",
    "entries",
    "exits",
    "exits_random",
    "exits_competitive",
    "price",
    "regime",
    "cull_threshold",
    "min_size",
    "customers",
)


@dataclass(frozen=True, eq=False)
class SimTrajectory:
    """Per-step record of a run on a uniform time grid.

    Row ``i`` describes the state after step ``i``; row 0 is the initial
    state.  ``count[i] == count[i-1] + entries[i] - exits[i]`` always holds.
    Market columns (price, regime, ...) are ``None`` for pure population runs.
    """

    t: np.ndarray
    count: np.ndarray
    total_size: np.ndarray
    entries: np.ndarray
    exits: np.ndarray
    exits_random: np.ndarray | None = None
    exits_competitive: np.ndarray | None = None
    price: np.ndarray | None = None
    regime: tuple | None = None
    cull_threshold: np.ndarray | None = None
    min_size: np.ndarray | None = None
    customers: np.ndarray | None = None
    extinct_at: float | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else float("nan")

    def columns(self) -> list[str]:
        return [c for c in TRAJECTORY_COLUMNS if getattr(self, c) is not None]

    def rows(self):
        cols = self.columns()
        data = [getattr(self, c) for c in cols]
        for i in range(len(self.t)):
            yield {c: _cell(d[i]) for c, d in zip(cols, data)}

    def write_table(self, path, delimiter: str = ",") -> Path:
        """One row per step, columns in ``TRAJECTORY_COLUMNS`` order."""
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=self.columns(), delimiter=delimiter,
                               lineterminator="\n")
            w.writeheader()
            for row in self.rows():
                w.writerow({k: _fmt(v) for k, v in row.items()})
        return path

    def same_as(self, other: "SimTrajectory") -> bool:
        """Bitwise equality of every recorded column."""
        if self.columns() != other.columns() or self.extinct_at != other.extinct_at:
            return False
        for c in self.columns():
            a, b = getattr(self, c), getattr(other, c)
            if isinstance(a, tuple):
                if a != b:
                    return False
            elif not np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True):
                return False
        return True


def _cell(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# --------------------------------------------------------------------------
# cohort storage
# --------------------------------------------------------------------------


class _Cohorts:
    """Mutable run state: preallocated, append-only cohort arrays."""

    def __init__(self, sizes, counts, capacity):
        n = len(sizes)
        self.sizes = np.empty(max(capacity, n), dtype=float)
        self.counts = np.zeros(max(capacity, n), dtype=np.int64)
        self.sizes[:n] = sizes
        self.counts[:n] = counts
        self.n = n
        self.total = int(self.counts[:n].sum())
        self._dead = int(np.count_nonzero(self.counts[:n] == 0))

    def survive(self, rng, p) -> int:
        if self.n == 0 or self.total == 0:
            return 0
        c = self.counts[: self.n]
        after = rng.binomial(c, p)
        exits = self.total - int(after.sum())
        became_dead = np.count_nonzero((after == 0) & (c > 0))
        c[:] = after
        self.total -= exits
        self._dead += int(became_dead)
        if self._dead > 1024 and self._dead * 2 > self.n:
            self.compact()
        return exits

    def grow(self, factor) -> None:
        if factor != 1.0:
            self.sizes[: self.n] *= factor

    def add(self, size, count) -> None:
        if count <= 0:
            return
        if self.n == len(self.sizes):
            grow = max(16, len(self.sizes))
            self.sizes = np.concatenate([self.sizes, np.empty(grow)])
            self.counts = np.concatenate([self.counts, np.zeros(grow, dtype=np.int64)])
        self.sizes[self.n] = size
        self.counts[self.n] = count
        self.n += 1
        self.total += int(count)

    def compact(self) -> None:
        keep = self.counts[: self.n] > 0
        m = int(keep.sum())
        self.sizes[:m] = self.sizes[: self.n][keep]
        self.counts[:m] = self.counts[: self.n][keep]
        self.counts[m : self.n] = 0
        self.n = m
        self._dead = 0

    def cull_below(self, threshold) -> int:
        """Remove every firm strictly smaller than ``threshold``."""
        s = self.sizes[: self.n]
        # sizes are non-increasing, the doomed cohorts form the tail
        first = int(np.searchsorted(-s, -threshold, side="right"))
        removed = int(self.counts[first : self.n].sum())
        self.counts[first : self.n] = 0
        self.n = first
        self.total -= removed
        self._dead = int(np.count_nonzero(self.counts[: self.n] == 0))
        return removed

    def total_size(self) -> float:
        return float(np.dot(self.sizes[: self.n], self.counts[: self.n]))

    def min_size(self) -> float:
        alive = self.counts[: self.n] > 0
        if not alive.any():
            return float("nan")
        return float(self.sizes[: self.n][alive].min())

    def count_at_least(self, threshold) -> int:
        s = self.sizes[: self.n]
        last = int(np.searchsorted(-s, -threshold, side="right"))
        return int(self.counts[:last].sum())

    def population(self, t, entry_size, entries, exits) -> FirmPopulation:
        return FirmPopulation(
            self.sizes[: self.n].copy(),
            self.counts[: self.n].copy(),
            t=t,
            entry_size=entry_size,
            entries=entries,
            exits=exits,
        )


def _steps(horizon: float, dt: float) -> int:
    if not 0 < dt <= 0.25:
        raise ValueError("dt must lie in (0, 0.25]")
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    return int(round(horizon / dt))


# --------------------------------------------------------------------------
# initial conditions
# --------------------------------------------------------------------------


def sample_power_law(rng, n: int, alpha: float, x_min: float, x_max: float) -> np.ndarray:
    """Inverse-CDF draws from density ``x^-(1+alpha)`` on ``[x_min, x_max]``."""
    u = rng.random(n)
    ratio = x_max / x_min
    if alpha == 0:
        return x_min * ratio**u
    return x_min * (1.0 - u * (1.0 - ratio ** (-alpha))) ** (-1.0 / alpha)


def initial_density_scale(customer: CustomerSectorParams, n0: int,
                          r_max_factor: float = R_MAX_FACTOR) -> float:
    """``f0`` implied by ``n0`` firms drawn from the truncated power law."""
    a = customer.alpha
    if a == 0:
        mass = math.log(r_max_factor)
    else:
        mass = (1.0 - r_max_factor ** (-a)) / a
    return n0 / (customer.r_m * mass)


# --------------------------------------------------------------------------
# populations
# --------------------------------------------------------------------------


def simulate_customer_population(
    customer: CustomerSectorParams,
    horizon: float,
    dt: float,
    seed: int = 0,
    n0: int = DEFAULT_N0,
    entry_mode: str = "flux",
    r_max_factor: float = R_MAX_FACTOR,
) -> tuple[SimTrajectory, FirmPopulation]:
    """Simulate a customer sector's firms.

    Entry modes:

    ``"flux"``
        Poisson entrants with mean ``alpha * psi * F * dt`` (``F`` the firm
        count, revenue in units of ``r_m``): the flux implied by the
        boundary density.  Reproduces the closed-form power law.
    ``"prose"``
        Poisson entrants with mean ``alpha * F * dt``.  Count grows at
        ``alpha - mu`` and the size tail has CCDF exponent ``alpha / psi``.

    The run stops early on extinction; ``extinct_at`` records when.
    """
    if entry_mode not in ENTRY_MODES:
        raise ValueError(f"entry_mode must be one of {ENTRY_MODES}")
    steps = _steps(horizon, dt)
    rng = np.random.default_rng(seed)
    r_m = customer.r_m
    init = np.sort(sample_power_law(rng, n0, customer.alpha, r_m, r_m * r_max_factor))[::-1]
    pop = _Cohorts(init, np.ones(n0, dtype=np.int64), n0 + steps + 1)

    survival = math.exp(-customer.mu * dt)
    growth = math.exp(customer.psi * dt)
    rate = customer.alpha * customer.psi if entry_mode == "flux" else customer.alpha

    ts, counts, totals, ins, outs = [0.0], [pop.total], [pop.total_size()], [0], [0]
    cum_in = cum_out = 0
    extinct_at = None
    for i in range(1, steps + 1):
        before = pop.total
        ex = pop.survive(rng, survival)
        pop.grow(growth)
        k = int(rng.poisson(rate * before * dt)) if before else 0
        pop.add(r_m, k)
        cum_in += k
        cum_out += ex
        ts.append(i * dt)
        counts.append(pop.total)
        totals.append(pop.total_size())
        ins.append(k)
        outs.append(ex)
        if pop.total == 0:
            extinct_at = i * dt
            break
    traj = SimTrajectory(
        t=np.array(ts),
        count=np.array(counts, dtype=np.int64),
        total_size=np.array(totals),
        entries=np.array(ins, dtype=np.int64),
        exits=np.array(outs, dtype=np.int64),
        extinct_at=extinct_at,
        meta={"kind": "customer", "entry_mode": entry_mode, "seed": seed, "n0": n0},
    )
    return traj, pop.population(ts[-1], r_m, cum_in, cum_out)


def poisson_entry_counts(expertise: ExpertiseParams, flow: EntryFlowSeries, seed=0) -> np.ndarray:
    """Per-step entrant counts for a boundary density ``h``.

    The entrant flux through ``s_m`` of a density ``h`` is ``phi * s_m * h``;
    count ``i`` covers the step ending at ``flow.times[i + 1]``.
    """
    rng = np.random.default_rng(seed)
    mean = expertise.phi * expertise.s_m * flow.values[1:] * flow.dt
    return rng.poisson(mean).astype(np.int64)


def simulate_psf_population(
    expertise: ExpertiseParams,
    entry_counts,
    horizon: float,
    dt: float,
    seed: int = 0,
    initial: FirmPopulation | int | None = None,
) -> tuple[SimTrajectory, FirmPopulation]:
    """Simulate practices with a prescribed number of entrants per step.

    ``entry_counts[i]`` practices of ``s_m`` experts enter at the end of
    step ``i + 1``.  ``initial`` is either a population or a number of
    practices at ``s_m`` present at ``t = 0``.
    """
    steps = _steps(horizon, dt)
    entry_counts = np.asarray(entry_counts)
    if entry_counts.shape != (steps,):
        raise ValueError(f"entry_counts must have one value per step ({steps})")
    if np.any(entry_counts < 0) or not np.all(np.equal(np.mod(entry_counts, 1), 0)):
        raise ValueError("entry_counts must be non-negative integers")
    entry_counts = entry_counts.astype(np.int64)
    rng = np.random.default_rng(seed)
    s_m = expertise.s_m
    if initial is None:
        sizes, cnt = np.empty(0), np.empty(0, dtype=np.int64)
    elif isinstance(initial, FirmPopulation):
        order = np.argsort(-initial.sizes, kind="stable")
        sizes, cnt = initial.sizes[order], initial.counts[order]
    else:
        sizes, cnt = np.array([s_m]), np.array([int(initial)], dtype=np.int64)
    pop = _Cohorts(sizes, cnt, len(sizes) + steps + 1)

    survival = math.exp(-expertise.rho * dt)
    growth = math.exp(expertise.phi * dt)
    ts, counts, totals, ins, outs = [0.0], [pop.total], [pop.total_size()], [0], [0]
    cum_in = cum_out = 0
    for i in range(1, steps + 1):
        ex = pop.survive(rng, survival)
        pop.grow(growth)
        k = int(entry_counts[i - 1])
        pop.add(s_m, k)
        cum_in += k
        cum_out += ex
        ts.append(i * dt)
        counts.append(pop.total)
        totals.append(pop.total_size())
        ins.append(k)
        outs.append(ex)
    traj = SimTrajectory(
        t=np.array(ts),
        count=np.array(counts, dtype=np.int64),
        total_size=np.array(totals),
        entries=np.array(ins, dtype=np.int64),
        exits=np.array(outs, dtype=np.int64),
        meta={"kind": "psf", "seed": seed},
    )
    return traj, pop.population(ts[-1], s_m, cum_in, cum_out)


# --------------------------------------------------------------------------
# coupled market
# --------------------------------------------------------------------------


NO_DEMAND = "NoDemand"
# Clearing prices within this relative distance of n*C_m count as break-even;
# bisection rounding otherwise flips the label of an exactly balanced market.
PRICE_RTOL = 1e-9


def _clear_analytic(customer, t, capacity, step):
    """Price at which analytic demand equals ``capacity`` (bisection in log p)."""
    if capacity <= 0:
        return math.inf
    total = analytic.total_firms(customer, t)
    if capacity > total * (1 + 1e-12):
        raise SimulationError(
            f"step {step}: capacity {capacity:.6g} exceeds total demand {total:.6g}"
        )
    lo = math.log(customer.nu * customer.r_m)
    if capacity >= total:
        return math.exp(lo)
    hi = lo + 1.0
    while analytic.demand(customer, t, math.exp(hi)) > capacity:
        hi += 2 * (hi - lo)
    root = bisect(lambda lp: analytic.demand(customer, t, math.exp(lp)) - capacity,
                  lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=400)
    return math.exp(root)


def _clear_simulated(customers: _Cohorts, nu, capacity, step):
    """Largest price at which at least ``capacity`` simulated firms still buy.

    Customer sizes are non-increasing, so the search over the cumulative
    count is a bisection on the sorted array.
    """
    if customers.total == 0:
        return math.nan
    if capacity <= 0:
        return math.inf
    if capacity > customers.total:
        raise SimulationError(
            f"step {step}: capacity {capacity:.6g} exceeds total demand {customers.total}"
        )
    cum = np.cumsum(customers.counts[: customers.n])
    idx = int(np.searchsorted(cum, capacity, side="left"))
    return float(customers.sizes[idx]) * nu


def simulate_coupled_market(scenario: MarketScenario) -> SimTrajectory:
    """Practices facing a sector's demand, with price set by market clearing.

    Each step the practice capacity ``K = experts / n`` is cleared against
    demand.  At a price of at least ``n * C_m`` entrants arrive with the
    flux implied by ``growth_entry_flow`` (growth-regime parameters only),
    capped so that entry never pushes the price below ``n * C_m``.  Below
    that price nobody enters and practices smaller than the minimal viable
    size are culled after the random exits.  The recorded price is the
    clearing price at the end of the step.
    """
    cust, exp_ = scenario.customer, scenario.expertise
    dt = scenario.dt
    steps = _steps(scenario.horizon, dt)
    rng = np.random.default_rng(scenario.seed)
    p_entry = analytic.growth_price(exp_)
    p_floor = p_entry * (1 - PRICE_RTOL)
    regime = analytic.classify_regime(cust, exp_)
    simulated = scenario.demand == "simulated"

    customers = None
    if simulated:
        n0 = scenario.n_customers
        init = np.sort(sample_power_law(rng, n0, cust.alpha, cust.r_m, cust.r_m * R_MAX_FACTOR))[::-1]
        customers = _Cohorts(init, np.ones(n0, dtype=np.int64), n0 + steps + 1)
        c_survival = math.exp(-cust.mu * dt)
        c_growth = math.exp(cust.psi * dt)
        c_rate = cust.alpha * cust.psi if scenario.entry_mode == "flux" else cust.alpha
        f0 = initial_density_scale(cust, n0) if n0 else cust.f0
        cust_eff = CustomerSectorParams(cust.alpha, cust.psi, cust.mu, cust.r_m, cust.nu, f0)
    else:
        cust_eff = cust

    def demand_at(t, p):
        if simulated:
            return customers.count_at_least(p / cust.nu)
        return analytic.demand(cust_eff, t, p)

    def clear(t, capacity, step):
        if simulated:
            return _clear_simulated(customers, cust.nu, capacity, step)
        return _clear_analytic(cust_eff, t, capacity, step)

    if scenario.initial_practices is None:
        n_init = int(math.floor(exp_.n * demand_at(0.0, p_entry) / exp_.s_m))
    else:
        n_init = scenario.initial_practices
    psf = _Cohorts(np.array([exp_.s_m]), np.array([n_init], dtype=np.int64), steps + 2)

    survival = math.exp(-exp_.rho * dt)
    growth = math.exp(exp_.phi * dt)
    rows = {
        "t": [], "count": [], "total_size": [], "entries": [], "exits": [],
        "exits_random": [], "exits_competitive": [], "price": [], "regime": [],
        "cull_threshold": [], "min_size": [], "customers": [],
    }

    def label(price):
        if math.isnan(price):
            return NO_DEMAND
        return "Growth" if price >= p_floor else "Consolidation"

    def record(t, k, ex_r, ex_c, price, thr):
        rows["t"].append(t)
        rows["count"].append(psf.total)
        rows["total_size"].append(psf.total_size())
        rows["entries"].append(k)
        rows["exits"].append(ex_r + ex_c)
        rows["exits_random"].append(ex_r)
        rows["exits_competitive"].append(ex_c)
        rows["price"].append(price)
        rows["regime"].append(label(price))
        rows["cull_threshold"].append(thr)
        rows["min_size"].append(psf.min_size())
        rows["customers"].append(
            customers.total if simulated else float(analytic.total_firms(cust_eff, t))
        )

    price0 = clear(0.0, psf.total_size() / exp_.n, 0)
    record(0.0, 0, 0, 0, price0, math.nan)

    for i in range(1, steps + 1):
        t = i * dt
        if simulated:
            before = customers.total
            customers.survive(rng, c_survival)
            customers.grow(c_growth)
            customers.add(cust.r_m, int(rng.poisson(c_rate * before * dt)) if before else 0)

        ex_r = psf.survive(rng, survival)
        psf.grow(growth)
        price = clear(t, psf.total_size() / exp_.n, i)
        k = ex_c = 0
        thr = math.nan
        if math.isnan(price):
            pass
        elif price >= p_floor:
            if regime.is_growth:
                h = analytic.growth_entry_flow(cust, exp_, t)
                k = int(rng.poisson(exp_.phi * exp_.s_m * h * dt))
                room = exp_.n * demand_at(t, p_entry) - psf.total_size()
                k = min(k, max(0, int(math.floor(room / exp_.s_m + 1e-9))))
                if k:
                    psf.add(exp_.s_m, k)
                    price = clear(t, psf.total_size() / exp_.n, i)
        else:
            thr = analytic.min_viable_size(exp_, price)
            ex_c = psf.cull_below(thr)
            if ex_c:
                price = clear(t, psf.total_size() / exp_.n, i)
        record(t, k, ex_r, ex_c, price, thr)

    return SimTrajectory(
        t=np.array(rows["t"]),
        count=np.array(rows["count"], dtype=np.int64),
        total_size=np.array(rows["total_size"]),
        entries=np.array(rows["entries"], dtype=np.int64),
        exits=np.array(rows["exits"], dtype=np.int64),
        exits_random=np.array(rows["exits_random"], dtype=np.int64),
        exits_competitive=np.array(rows["exits_competitive"], dtype=np.int64),
        price=np.array(rows["price"]),
        regime=tuple(rows["regime"]),
        cull_threshold=np.array(rows["cull_threshold"]),
        min_size=np.array(rows["min_size"]),
        customers=np.array(rows["customers"], dtype=float),
        meta={"kind": "coupled", "seed": scenario.seed, "regime": str(regime)},
    )


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Fit:
    value: float
    stderr: float
    n: int


MIN_TAIL_SAMPLE = 1000


def fit_tail_exponent(pop: FirmPopulation, tail_fraction: float = 0.1,
                      min_sample: int = MIN_TAIL_SAMPLE) -> Fit:
    """Hill estimate of the CCDF tail exponent from the top ``tail_fraction``.

    With ``k`` top order statistics above threshold ``x_(k+1)``:
    ``1 / mean(ln(x_i / x_(k+1)))``; standard error ``estimate / sqrt(k)``.
    """
    total = pop.size
    if total < min_sample:
        raise InsufficientDataError(f"need at least {min_sample} firms, got {total}")
    order = np.argsort(-pop.sizes, kind="stable")
    sizes, counts = pop.sizes[order], pop.counts[order]
    k = int(math.floor(tail_fraction * total))
    if k < 1:
        raise InsufficientDataError("tail fraction selects no firms")
    cum = np.cumsum(counts)
    threshold = sizes[int(np.searchsorted(cum, k + 1, side="left"))]
    taken = np.clip(k - (cum - counts), 0, counts)
    log_sum = float(np.dot(taken, np.log(sizes / threshold)))
    if log_sum <= 0:
        raise EstimationError("degenerate sample: no spread in the tail")
    est = k / log_sum
    return Fit(est, est / math.sqrt(k), k)


def _log_slope(t, y, burn_in, min_points, what):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = (t >= burn_in - 1e-12) & np.isfinite(y) & (y > 0)
    if sel.sum() < min_points:
        raise InsufficientDataError(
            f"need >= {min_points} positive {what} values after burn-in t={burn_in:g}, "
            f"got {int(sel.sum())}"
        )
    res = stats.linregress(t[sel], np.log(y[sel]))
    return Fit(float(res.slope), float(res.stderr), int(sel.sum()))


def fit_growth_rate(traj: SimTrajectory, burn_in: float = 0.0, min_points: int = 20) -> Fit:
    """Least-squares slope of ``ln(count)`` against ``t`` after ``burn_in``."""
    if traj.extinct_at is not None and traj.extinct_at <= burn_in:
        raise InsufficientDataError(f"population extinct at t={traj.extinct_at:g}, before burn-in end")
    return _log_slope(traj.t, traj.count, burn_in, min_points, "count")


def fit_price_slope(traj: SimTrajectory, burn_in: float = 0.0, min_points: int = 20) -> Fit:
    """Least-squares slope of ``ln(price)`` against ``t`` after ``burn_in``."""
    if traj.price is None:
        raise ValueError("trajectory has no price column")
    return _log_slope(traj.t, traj.price, burn_in, min_points, "price")


def log_bins(lo: float, hi: float, nbins: int) -> np.ndarray:
    return np.geomspace(lo, hi, nbins + 1)


def empirical_density(pop: FirmPopulation, bins=None, nbins: int = 20):
    """Histogram density of a population.

    ``bins`` is an array of edges; by default ``nbins`` log-spaced bins
    spanning the whole population.  Returns ``(edges, density, counts)``
    where ``sum(density * width) == sum(counts)``.
    """
    if pop.size == 0:
        raise EstimationError("empty population")
    if bins is None:
        lo, hi = float(pop.sizes.min()), float(pop.sizes.max())
        hi = max(hi * (1 + 1e-9), lo * (1 + 1e-9))
        bins = log_bins(lo, hi, nbins)
    edges = np.asarray(bins, dtype=float)
    counts, _ = np.histogram(pop.sizes, bins=edges, weights=pop.counts.astype(float))
    density = counts / np.diff(edges)
    return edges, density, counts


def expected_growth_rate(customer: CustomerSectorParams, entry_mode: str = "flux") -> float:
    """Long-run count growth rate predicted for a customer entry mode."""
    if entry_mode == "flux":
        return net_growth(customer)
    return customer.alpha - customer.mu


def expected_tail_exponent(customer: CustomerSectorParams, entry_mode: str = "flux") -> float:
    """Long-run CCDF tail exponent predicted for a customer entry mode."""
    if entry_mode == "flux":
        return customer.alpha
    return customer.alpha / customer.psi
