"""Coherent risk measures, extreme measures and the coherent CAPM on scenario data."""
from .capm import (
    ContactKernel,
    Economy,
    agent_allocations,
    beta_of,
    contact_from_result,
    contact_measure,
    equilibrium_from_market,
    equilibrium_rstar,
    sml_betas,
    sml_residuals,
)
from .errors import (
    CoherentRiskError,
    ConfigError,
    DataError,
    KinkWarning,
    NonConvergenceError,
    NumericalError,
)
from .extreme import (
    ExtremeWeights,
    MCEstimate,
    extreme_measure,
    mc_contribution_alpha,
    mc_contribution_beta,
    reward_estimate,
    risk_contribution,
)
from .frontier import FrontierResult, SolverOptions, optimize, support_probe
from .pricing import (
    ClaimSpec,
    empirical_price,
    nbc_price,
    nbc_sensitivity,
    risk_adjustment,
    tabulated,
    vanilla_call,
    vanilla_put,
)
from .scenarios import (
    MarketModel,
    ScenarioSet,
    bootstrap,
    load_returns,
    make_rng,
    monte_carlo,
    weight_geometric,
)
from .spectral import (
    Atomic,
    BetaFamily,
    Dirac,
    Sample,
    cumulative_psi,
    make_alpha,
    make_beta,
    make_tail,
    parse_measure,
    psi,
    risk_of,
    risk_weights,
    spectral_risk,
)

__version__ = "0.1.0"
