"""Closed-form market model: densities, demand, supply and equilibrium regimes.

All functions are pure and accept numpy arrays wherever a size, time or
price argument appears; scalars in give floats out.

Two conventions exist for the practice density ``g(t, s)`` and the supply it
implies:

``"closed_form"``
    ``g(t, s) = h(x) exp(-rho x)`` with entry time ``x = t - ln(s/s_m)/phi``,
    and ``S(t) = (s_m^2 phi / n) e^{2 phi t} int_0^t e^{-(2 phi + rho) x} h(x) dx``.
    These two are mutually consistent and are what the growth-regime entry
    flow and the consolidation price path were derived from.  Default.
``"transport"``
    The solution of ``d_t g + d_s(phi s g) = -rho g`` with boundary density
    ``h`` at ``s_m``: ``g(t, s) = h(x) exp(-(rho + phi)(t - x))``.  This is
    the density realised by the cohort simulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, ParameterError, RegimeError
from .params import (
    CustomerSectorParams,
    EntryFlowSeries,
    ExpertiseParams,
    Regime,
    net_growth,
)

CONVENTIONS = ("closed_form", "transport")
SUPPLY_RTOL = 1e-6


def _out(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def _require_alpha(customer: CustomerSectorParams, what: str) -> None:
    if customer.alpha <= 0:
        raise ParameterError({"alpha": f"alpha must be > 0 for {what}"})


def _require_phi(expertise: ExpertiseParams, what: str) -> None:
    if expertise.phi <= 0:
        raise ParameterError(
            {"phi": f"phi must be > 0 for {what} (entry-time map is singular at phi = 0)"}
        )


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


# --------------------------------------------------------------------------
# customers
# --------------------------------------------------------------------------


def firm_density(customer: CustomerSectorParams, t, r):
    """Density of sector firms at revenue ``r``; zero below ``r_m``."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    x = r / customer.r_m
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (
            customer.f0
            * np.exp(net_growth(customer) * t)
            * np.power(np.where(x >= 1, x, 1.0), -(1.0 + customer.alpha))
        )
    return _out(np.where(x >= 1, val, 0.0))


def total_firms(customer: CustomerSectorParams, t):
    """Integral of ``firm_density`` over all revenues."""
    _require_alpha(customer, "a finite firm count")
    t = np.asarray(t, dtype=float)
    return _out(customer.f0 * np.exp(net_growth(customer) * t) * customer.r_m / customer.alpha)


def demand(customer: CustomerSectorParams, t, p):
    """Number of firms for which buying the service at price ``p`` pays off.

    A firm buys iff ``r >= p / nu``; below the support boundary every firm
    buys and demand equals the total firm count.
    """
    _require_alpha(customer, "demand")
    p = np.asarray(p, dtype=float)
    threshold = p / (customer.nu * customer.r_m)
    total = np.asarray(total_firms(customer, t))
    return _out(total * np.power(np.maximum(threshold, 1.0), -customer.alpha))


# --------------------------------------------------------------------------
# practices
# --------------------------------------------------------------------------


def psf_density(
    expertise: ExpertiseParams,
    flow: EntryFlowSeries,
    t: float,
    s,
    convention: str = "closed_form",
):
    """Density of practices of size ``s`` experts at time ``t``.

    Zero for sizes whose implied entry time falls outside ``[0, t]``:
    no practice predates market opening.
    """
    _check_convention(convention)
    _require_phi(expertise, "psf_density")
    flow.require_cover(t)
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        age = np.log(s / expertise.s_m) / expertise.phi
    x = t - age
    inside = (s >= expertise.s_m) & (x >= 0) & (x <= t)
    x_safe = np.where(inside, x, 0.0)
    h = flow(x_safe)
    if convention == "closed_form":
        val = h * np.exp(-expertise.rho * x_safe)
    else:
        val = h * np.exp(-(expertise.rho + expertise.phi) * (t - x_safe))
    return _out(np.where(inside, val, 0.0))


def _trapezoid(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def supply(
    expertise: ExpertiseParams,
    flow: EntryFlowSeries,
    t: float,
    convention: str = "closed_form",
    rtol: float = SUPPLY_RTOL,
) -> float:
    """Number of clients the practice population can serve at time ``t``.

    The entry-time integral uses the composite trapezoid rule on the flow
    grid, checked against the same rule at twice the step.

    Raises
    ------
    AccuracyError
        If the two step sizes disagree by ``rtol`` or more (relative).
    CoverageError
        If ``flow`` does not span ``[0, t]``.
    """
    _check_convention(convention)
    _require_phi(expertise, "supply")
    flow.require_cover(t)
    if t <= 0:
        return 0.0
    grid = flow.times
    nodes = np.append(grid[grid < t - 1e-9 * flow.dt], t)
    h = flow(nodes)
    phi, rho = expertise.phi, expertise.rho
    lag = t - nodes
    if convention == "closed_form":
        # e^{2 phi t} e^{-(2 phi + rho) x}, combined to avoid overflow
        kernel = np.exp(2 * phi * lag - rho * nodes)
    else:
        kernel = np.exp((phi - rho) * lag)
    y = kernel * h
    fine = _trapezoid(y, nodes)
    if nodes.size >= 3:
        idx = np.arange(0, nodes.size, 2)
        if idx[-1] != nodes.size - 1:
            idx = np.append(idx, nodes.size - 1)
        coarse = _trapezoid(y[idx], nodes[idx])
        if abs(fine - coarse) >= rtol * abs(fine) and fine != 0:
            raise AccuracyError(
                f"supply quadrature not converged at t={t:g}: "
                f"step change {abs(fine - coarse) / abs(fine):.3e} >= {rtol:g}"
            )
    return expertise.s_m**2 * phi / expertise.n * fine


# --------------------------------------------------------------------------
# regimes
# --------------------------------------------------------------------------


def classify_regime(customer: CustomerSectorParams, expertise: ExpertiseParams) -> Regime:
    """Growth iff the client base outgrows twice the expert training speed."""
    return Regime.from_margin(net_growth(customer) - 2.0 * expertise.phi)


def growth_price(expertise: ExpertiseParams) -> float:
    """Welfare-maximising price under growth: the entrant break-even ``n*C_m``."""
    return expertise.n * expertise.C_m


def growth_entry_flow(customer: CustomerSectorParams, expertise: ExpertiseParams, t):
    """Entry flow ``h(t)`` that keeps supply in step with demand at ``n*C_m``.

    Raises
    ------
    RegimeError
        ``"not in growth regime"`` when the margin is not strictly positive.
    """
    regime = classify_regime(customer, expertise)
    if not regime.is_growth:
        raise RegimeError(f"not in growth regime (margin {regime.margin:.6g} <= 0)")
    _require_alpha(customer, "growth_entry_flow")
    _require_phi(expertise, "growth_entry_flow")
    a, n, s_m, phi = customer.alpha, expertise.n, expertise.s_m, expertise.phi
    g = net_growth(customer)
    t = np.asarray(t, dtype=float)
    # f0 * r_m is the density scale in r_m-normalised revenue units
    scale = (
        n
        * regime.margin
        * customer.f0
        * customer.r_m
        / (s_m**2 * phi)
        / a
        * (growth_price(expertise) / (customer.nu * customer.r_m)) ** (-a)
    )
    return _out(np.exp((g + expertise.rho) * t) * scale)


def growth_entry_series(
    customer: CustomerSectorParams, expertise: ExpertiseParams, horizon: float, dt: float
) -> EntryFlowSeries:
    return EntryFlowSeries.from_function(
        lambda x: growth_entry_flow(customer, expertise, x), horizon, dt
    )


# --------------------------------------------------------------------------
# costs and profits
# --------------------------------------------------------------------------


def _require_size(expertise: ExpertiseParams, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s < expertise.s_m):
        raise ValueError(f"size below entry size s_m={expertise.s_m:g}")
    return s


def unit_cost(expertise: ExpertiseParams, s):
    """Per-expert production cost of a practice of size ``s``."""
    s = _require_size(expertise, s)
    return _out(expertise.C_m * (s / expertise.s_m) ** (-expertise.theta))


def min_viable_size(expertise: ExpertiseParams, p):
    """Smallest size at which a practice breaks even at price ``p``."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ValueError("price must be > 0")
    return _out(expertise.s_m * (growth_price(expertise) / p) ** (1.0 / expertise.theta))


def profitability(expertise: ExpertiseParams, p, s, literal: bool = False):
    """Yearly profit of a practice of ``s`` experts selling at price ``p``.

    Default: clients served ``s/n`` times the margin ``p - n*c(s)``.
    ``literal=True`` returns the price-free power law ``s*n*C_m*(1-(s_m/s)^theta)``,
    which ignores ``p`` and carries an extra factor ``n``.
    """
    s = _require_size(expertise, s)
    if literal:
        return _out(
            s * expertise.n * expertise.C_m * (1.0 - (expertise.s_m / s) ** expertise.theta)
        )
    p = np.asarray(p, dtype=float)
    return _out(s / expertise.n * (p - expertise.n * np.asarray(unit_cost(expertise, s))))


# --------------------------------------------------------------------------
# consolidation
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConsolidationPath:
    times: np.ndarray
    price: np.ndarray
    s_min: np.ndarray
    price_rate: float  # d ln p / dt
    size_rate: float  # d ln s_min / dt


def consolidation_rates(
    customer: CustomerSectorParams, expertise: ExpertiseParams
) -> tuple[float, float]:
    """Exponential rates of the consolidation price and minimal viable size.

    Raises ``RegimeError`` outside strict consolidation or when scale
    economies are too weak (``alpha * theta <= 2``).
    """
    regime = classify_regime(customer, expertise)
    if regime.margin >= 0:
        raise RegimeError(f"not in consolidation regime (margin {regime.margin:.6g} >= 0)")
    a, theta = customer.alpha, expertise.theta
    if not 2.0 / theta < a:
        raise RegimeError(f"condition 2/theta < alpha violated (2/theta={2/theta:g}, alpha={a:g})")
    excess = 2 * expertise.phi - net_growth(customer)
    denom = 2.0 - a * theta
    return theta / denom * excess, -1.0 / denom * excess


def consolidation_path(
    customer: CustomerSectorParams,
    expertise: ExpertiseParams,
    horizon: float,
    dt: float,
) -> ConsolidationPath:
    price_rate, size_rate = consolidation_rates(customer, expertise)
    steps = int(round(horizon / dt))
    times = np.arange(steps + 1) * dt
    price = growth_price(expertise) * np.exp(price_rate * times)
    s_min = expertise.s_m * np.exp(size_rate * times)
    return ConsolidationPath(times, price, s_min, price_rate, size_rate)
