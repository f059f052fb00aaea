"""Market model of professional-services firms and the sectors they serve."""

from .analytic import (
    classify_regime,
    consolidation_path,
    consolidation_rates,
    demand,
    firm_density,
    growth_entry_flow,
    growth_price,
    min_viable_size,
    profitability,
    psf_density,
    supply,
    total_firms,
    unit_cost,
)
from .errors import (
    AccuracyError,
    ConfigError,
    CoverageError,
    DataFormatError,
    EstimationError,
    InsufficientDataError,
    ParameterError,
    PsfMarketError,
    RegimeError,
    SimulationError,
)
from .params import (
    CustomerSectorParams,
    EntryFlowSeries,
    ExpertiseParams,
    MarketScenario,
    Regime,
    RegimeKind,
    net_growth,
    validate,
)

__version__ = "0.1.0"
