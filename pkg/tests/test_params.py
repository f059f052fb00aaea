import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from psfmarket import analytic
from psfmarket.errors import CoverageError, ParameterError
from psfmarket.params import (
    CustomerSectorParams,
    EntryFlowSeries,
    ExpertiseParams,
    MarketScenario,
    Regime,
    RegimeKind,
    net_growth,
    validate,
)

rates = st.floats(0.0, 0.5, allow_nan=False)


def test_valid_customer_example():
    p = CustomerSectorParams(alpha=0.08, psi=0.05, mu=0.06, r_m=1, nu=0.1, f0=100)
    assert validate(p) is p


def test_mu_out_of_range_names_field_and_bound():
    with pytest.raises(ParameterError, match=r"mu out of \[0,1\]") as info:
        CustomerSectorParams(alpha=0.5, psi=0.1, mu=1.2)
    assert set(info.value.violations) == {"mu"}


def test_theta_zero_rejected():
    with pytest.raises(ParameterError, match="theta must be > 0"):
        ExpertiseParams(phi=0.01, rho=0.05, theta=0)


def test_every_violation_is_reported():
    with pytest.raises(ParameterError) as info:
        ExpertiseParams(phi=-1, rho=2, theta=0, s_m=0, C_m=0, n=0.5)
    assert set(info.value.violations) == {"phi", "rho", "theta", "s_m", "C_m", "n"}


@pytest.mark.parametrize("field,value", [("nu", 0.0), ("nu", 1.5), ("r_m", 0.0), ("f0", -1.0),
                                         ("psi", -0.1), ("alpha", float("nan"))])
def test_customer_bounds(field, value):
    kwargs = dict(alpha=0.5, psi=0.1, mu=0.03)
    kwargs[field] = value
    with pytest.raises(ParameterError) as info:
        CustomerSectorParams(**kwargs)
    assert field in info.value.violations


def test_validate_rejects_other_types():
    with pytest.raises(TypeError):
        validate({"alpha": 1})


@given(alpha=st.floats(0, 3), psi=rates, mu=st.floats(0, 1))
def test_validate_is_idempotent(alpha, psi, mu):
    p = CustomerSectorParams(alpha, psi, mu)
    assert validate(validate(p)) == validate(p)


def test_net_growth_examples():
    assert net_growth(CustomerSectorParams(alpha=0, psi=0.3, mu=0)) == 0
    assert net_growth(CustomerSectorParams(alpha=0.5, psi=0.1, mu=0.04)) == pytest.approx(0.01, abs=1e-15)
    assert CustomerSectorParams(0.5, 0.1, 0.04).net_growth() == net_growth(CustomerSectorParams(0.5, 0.1, 0.04))


@given(alpha=st.floats(0, 3), psi=rates, mu=st.floats(0, 0.5), delta=st.floats(0, 0.5))
def test_net_growth_linear_in_mu(alpha, psi, mu, delta):
    a = net_growth(CustomerSectorParams(alpha, psi, mu))
    b = net_growth(CustomerSectorParams(alpha, psi, mu + delta))
    assert b == pytest.approx(a - delta, abs=1e-12)


def test_growth_price():
    assert ExpertiseParams(phi=0.01, rho=0.05, n=4, C_m=2.5).growth_price() == 10


@given(alpha=st.floats(0.01, 3), psi=st.floats(0, 0.2), mu=st.floats(0, 0.2),
       phi=st.floats(0, 0.2), k=st.floats(0.1, 4))
def test_regime_invariant_under_time_rescaling(alpha, psi, mu, phi, k):
    before = analytic.classify_regime(CustomerSectorParams(alpha, psi, mu),
                                      ExpertiseParams(phi=phi, rho=0.0))
    after = analytic.classify_regime(CustomerSectorParams(alpha, psi * k, mu * k),
                                     ExpertiseParams(phi=phi * k, rho=0.0))
    if abs(before.margin) > 1e-12:
        assert before.kind == after.kind


def test_regime_tie_is_consolidation():
    assert Regime.from_margin(0.0).kind is RegimeKind.CONSOLIDATION
    assert Regime.from_margin(1e-15).is_growth
    assert str(Regime.from_margin(-1.0)) == "Consolidation"


class TestEntryFlowSeries:
    def test_constant_and_interpolation(self):
        f = EntryFlowSeries.from_function(lambda t: 2 * t, horizon=1.0, dt=0.25)
        assert f.dt == pytest.approx(0.25)
        assert f.horizon == pytest.approx(1.0)
        assert f(0.125) == pytest.approx(0.25)
        assert np.all(EntryFlowSeries.constant(3.0, 2.0, 0.5).values == 3.0)

    def test_arrays_are_read_only(self):
        f = EntryFlowSeries.constant(1.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            f.values[0] = 5

    @pytest.mark.parametrize("times,values", [
        ([0, 1, 3], [1, 1, 1]),   # non-uniform
        ([0, 1, 1], [1, 1, 1]),   # not increasing
        ([0, 1, 2], [1, -1, 1]),  # negative flow
        ([0], [1]),               # too short
    ])
    def test_invalid_grids(self, times, values):
        with pytest.raises(ValueError):
            EntryFlowSeries(np.array(times, float), np.array(values, float))

    def test_coverage(self):
        f = EntryFlowSeries.constant(1.0, 5.0, 0.5)
        assert f.covers(5.0) and not f.covers(5.5)
        with pytest.raises(CoverageError):
            f.require_cover(6.0)


class TestMarketScenario:
    cust = CustomerSectorParams(1.0, 0.1, 0.03)
    exp_ = ExpertiseParams(phi=0.01, rho=0.05)

    @pytest.mark.parametrize("dt", [0.0, 0.3, -0.1, math.nan])
    def test_dt_bounds(self, dt):
        with pytest.raises(ParameterError, match="dt"):
            MarketScenario(self.cust, self.exp_, horizon=10, dt=dt)

    def test_horizon_must_be_positive(self):
        with pytest.raises(ParameterError, match="horizon"):
            MarketScenario(self.cust, self.exp_, horizon=0, dt=0.1)

    def test_modes_checked(self):
        with pytest.raises(ParameterError):
            MarketScenario(self.cust, self.exp_, 10, 0.1, demand="psychic")
        with pytest.raises(ParameterError):
            MarketScenario(self.cust, self.exp_, 10, 0.1, entry_mode="bulk")

    def test_dt_quarter_year_allowed(self):
        assert MarketScenario(self.cust, self.exp_, 10, 0.25).dt == 0.25
