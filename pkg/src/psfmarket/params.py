"""Model parameters and shared value types.

Conventions used everywhere in the package:

* every rate is expressed per year; ``dt`` is a fraction of a year;
* customer revenue is measured in units of the minimal entrant revenue
  ``r_m`` internally, so the sectoral boundary condition (entrant density
  equals ``alpha`` times the firm count) is dimensionally exact.  Callers may
  pass any ``r_m > 0``; functions rescale on the way in and out;
* a ``Regime`` margin of exactly zero is a consolidation verdict.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import CoverageError, ParameterError


@dataclass(frozen=True)
class CustomerSectorParams:
    """Demand-side description of one industrial sector."""

    alpha: float  # entry intensity
    psi: float  # revenue growth rate
    mu: float  # failure rate
    r_m: float = 1.0  # minimal entrant revenue
    nu: float = 0.1  # benefit factor: a firm buys iff r >= p / nu
    f0: float = 100.0  # density at (t=0, r=r_m)

    def __post_init__(self):
        _raise_if(_customer_violations(self))

    def net_growth(self) -> float:
        return net_growth(self)


@dataclass(frozen=True)
class ExpertiseParams:
    """Supply-side description of one professional expertise."""

    phi: float  # training speed
    rho: float  # practice failure rate
    theta: float = 1.0  # scale-economy exponent
    s_m: float = 1.0  # entrant practice size, experts
    C_m: float = 1.0  # unit cost at entry size, per engagement per year
    n: float = 1.0  # experts per engagement

    def __post_init__(self):
        _raise_if(_expertise_violations(self))

    def growth_price(self) -> float:
        return self.n * self.C_m


Params = Union[CustomerSectorParams, ExpertiseParams]


def _finite(value) -> bool:
    try:
        return math.isfinite(value)
    except TypeError:
        return False


def _customer_violations(p: CustomerSectorParams) -> dict[str, str]:
    out = {}
    for name in ("alpha", "psi", "mu", "r_m", "nu", "f0"):
        if not _finite(getattr(p, name)):
            out[name] = f"{name} must be a finite number"
    if out:
        return out
    if p.alpha < 0:
        out["alpha"] = "alpha must be >= 0"
    if not 0 <= p.mu <= 1:
        out["mu"] = "mu out of [0,1]"
    if p.psi < 0:
        out["psi"] = "psi must be >= 0"
    if p.r_m <= 0:
        out["r_m"] = "r_m must be > 0"
    if not 0 < p.nu <= 1:
        out["nu"] = "nu out of (0,1]"
    if p.f0 <= 0:
        out["f0"] = "f0 must be > 0"
    return out


def _expertise_violations(p: ExpertiseParams) -> dict[str, str]:
    out = {}
    for name in ("phi", "rho", "theta", "s_m", "C_m", "n"):
        if not _finite(getattr(p, name)):
            out[name] = f"{name} must be a finite number"
    if out:
        return out
    if p.phi < 0:
        out["phi"] = "phi must be >= 0"
    if not 0 <= p.rho <= 1:
        out["rho"] = "rho out of [0,1]"
    if p.theta <= 0:
        out["theta"] = "theta must be > 0"
    if p.s_m <= 0:
        out["s_m"] = "s_m must be > 0"
    if p.C_m <= 0:
        out["C_m"] = "C_m must be > 0"
    if p.n < 1:
        out["n"] = "n must be >= 1"
    return out


def _raise_if(violations: dict[str, str]) -> None:
    if violations:
        raise ParameterError(violations)


def validate(params: Params) -> Params:
    """Return ``params`` unchanged if every bound holds.

    Raises
    ------
    ParameterError
        With one entry per offending field, e.g. ``"mu out of [0,1]"``.
    """
    if isinstance(params, CustomerSectorParams):
        _raise_if(_customer_violations(params))
    elif isinstance(params, ExpertiseParams):
        _raise_if(_expertise_violations(params))
    else:
        raise TypeError(f"cannot validate {type(params).__name__}")
    return params


def net_growth(params: CustomerSectorParams) -> float:
    """Longitudinal growth rate ``alpha * psi - mu`` of a sector's firm count."""
    return params.alpha * params.psi - params.mu


class RegimeKind(str, enum.Enum):
    GROWTH = "Growth"
    CONSOLIDATION = "Consolidation"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    margin: float  # alpha*psi - mu - 2*phi, per year

    @classmethod
    def from_margin(cls, margin: float) -> "Regime":
        kind = RegimeKind.GROWTH if margin > 0 else RegimeKind.CONSOLIDATION
        return cls(kind, float(margin))

    @property
    def is_growth(self) -> bool:
        return self.kind is RegimeKind.GROWTH

    def __str__(self) -> str:
        return self.kind.value


@dataclass(frozen=True, eq=False)
class EntryFlowSeries:
    """Entry flow ``h`` sampled on a uniform grid starting at ``t = 0``.

    ``h`` is the boundary density of entering practices at size ``s_m``.
    Values between grid points are linearly interpolated.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise ValueError("times and values must be 1-d arrays of equal length >= 2")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise ValueError("time grid must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("time grid must be uniform")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("entry flow values must be finite and >= 0")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def covers(self, t: float) -> bool:
        tol = 1e-9 * max(1.0, abs(t))
        return self.times[0] <= tol and t <= self.times[-1] + tol

    def require_cover(self, t: float) -> None:
        if not self.covers(t):
            raise CoverageError(
                f"entry flow covers [{self.times[0]:g}, {self.times[-1]:g}], "
                f"needs [0, {t:g}]"
            )

    def __call__(self, x):
        return np.interp(x, self.times, self.values)

    @classmethod
    def from_function(
        cls, fn: Callable[[np.ndarray], np.ndarray], horizon: float, dt: float
    ) -> "EntryFlowSeries":
        n = int(round(horizon / dt))
        times = np.arange(n + 1) * dt
        return cls(times, np.asarray(fn(times), dtype=float) * np.ones_like(times))

    @classmethod
    def constant(cls, h0: float, horizon: float, dt: float) -> "EntryFlowSeries":
        return cls.from_function(lambda t: np.full_like(t, h0), horizon, dt)


ENTRY_MODES = ("flux", "prose")
DEMAND_MODES = ("analytic", "simulated")


@dataclass(frozen=True)
class MarketScenario:
    """Everything needed to reproduce one coupled-market run."""

    customer: CustomerSectorParams
    expertise: ExpertiseParams
    horizon: float
    dt: float
    seed: int = 0
    # customer-side realisation, used when demand == "simulated"
    demand: str = "analytic"
    n_customers: int = 50_000
    entry_mode: str = "flux"
    # initial practices at s_m; None sizes the market to clear at n*C_m
    initial_practices: int | None = None

    def __post_init__(self):
        bad = {}
        if not (_finite(self.horizon) and self.horizon > 0):
            bad["horizon"] = "horizon must be > 0"
        if not (_finite(self.dt) and 0 < self.dt <= 0.25):
            bad["dt"] = "dt out of (0, 0.25]"
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            bad["seed"] = "seed must be an integer"
        if self.demand not in DEMAND_MODES:
            bad["demand"] = f"demand must be one of {DEMAND_MODES}"
        if self.entry_mode not in ENTRY_MODES:
            bad["entry_mode"] = f"entry_mode must be one of {ENTRY_MODES}"
        if self.n_customers < 0:
            bad["n_customers"] = "n_customers must be >= 0"
        if self.initial_practices is not None and self.initial_practices < 0:
            bad["initial_practices"] = "initial_practices must be >= 0"
        _raise_if(bad)
