"""Pricing library for Asian and European options under regime switching."""

from .errors import (
    DegenerateVolatilities,
    ExtrapolationRefused,
    InterpolationOutOfRange,
    LinearSolveFailure,
    NotApplicable,
    PricingError,
    QuadratureNotConverged,
    ValidationError,
)
from .european import (
    QuadratureSpec,
    black_scholes_put,
    closed_form_scalars,
    discounted_strike_vector,
    european_put_grid,
    price_european_put_rs,
)
from .fd import (
    FdConfig,
    FdSurfaces,
    default_y_max,
    fd_price,
    richardson_order,
)
from .greens import (
    delta_property_error,
    greens_function,
    heat_residual,
    select_exponent_variant,
)
from .ham import (
    HamConfig,
    SeriesSurfaces,
    TermGrid,
    assemble_series,
    build_terms,
    ham_grid,
    ham_step,
    ham_vs_fd_report,
    initial_guess,
    price_floating_put_ham,
    recursion_residual,
    series_dollar_price,
)
from .mc import McConfig, McEstimate, mc_price, simulate_chain
from .model import (
    AsianOptionSpec,
    MarketState,
    OptionStyle,
    PriceResult,
    RegimeModel,
    from_reduced_coords,
    payoff,
    rate_ratios,
    to_reduced_coords,
    two_state_model,
    validate_model,
)
from .symmetry import (
    SymmetryCase,
    symmetric_counterpart,
    symmetry_case,
    symmetry_mc_check,
)

__version__ = "0.1.0"

__all__ = [
    "AsianOptionSpec",
    "DegenerateVolatilities",
    "ExtrapolationRefused",
    "FdConfig",
    "FdSurfaces",
    "HamConfig",
    "InterpolationOutOfRange",
    "LinearSolveFailure",
    "MarketState",
    "McConfig",
    "McEstimate",
    "NotApplicable",
    "OptionStyle",
    "PriceResult",
    "PricingError",
    "QuadratureNotConverged",
    "QuadratureSpec",
    "RegimeModel",
    "SeriesSurfaces",
    "SymmetryCase",
    "TermGrid",
    "ValidationError",
    "__version__",
    "assemble_series",
    "black_scholes_put",
    "build_terms",
    "closed_form_scalars",
    "default_y_max",
    "delta_property_error",
    "discounted_strike_vector",
    "european_put_grid",
    "fd_price",
    "from_reduced_coords",
    "greens_function",
    "ham_grid",
    "ham_step",
    "ham_vs_fd_report",
    "heat_residual",
    "initial_guess",
    "mc_price",
    "payoff",
    "price_european_put_rs",
    "price_floating_put_ham",
    "rate_ratios",
    "recursion_residual",
    "richardson_order",
    "select_exponent_variant",
    "series_dollar_price",
    "simulate_chain",
    "symmetric_counterpart",
    "symmetry_case",
    "symmetry_mc_check",
    "to_reduced_coords",
    "two_state_model",
    "validate_model",
]
