"""Convertible bond valuation on a binomial tree for a stock that can default."""

from .errors import (
    DegenerateVolatility,
    FloorUnreachable,
    GridTooCoarse,
    InvalidStep,
    NonpositiveSpot,
    PricingError,
    StepTooCoarse,
)
from .estimators import ConvertiblePricer
from .instrument import (
    CallPeriod,
    ConversionPeriod,
    ConvertibleTerms,
    PutDate,
    benchmark_terms,
    coupon_amounts,
    provisions_at,
)
from .intensity import ConstantHazard, PowerHazard, hazard_at, stock_floor
from .lattice import MarketState, StepParams, build_step_params, hull_step_params, max_hazard_step
from .pde import AfvPdeSolver, PdeGrid, solve_afv
from .pricer import DefaultSpec, PriceResult, PricingConfig, price, price_profile

__all__ = [
    "AfvPdeSolver",
    "CallPeriod",
    "ConstantHazard",
    "ConversionPeriod",
    "ConvertiblePricer",
    "ConvertibleTerms",
    "DefaultSpec",
    "DegenerateVolatility",
    "FloorUnreachable",
    "GridTooCoarse",
    "InvalidStep",
    "MarketState",
    "NonpositiveSpot",
    "PdeGrid",
    "PowerHazard",
    "PriceResult",
    "PricingConfig",
    "PricingError",
    "PutDate",
    "StepParams",
    "StepTooCoarse",
    "benchmark_terms",
    "build_step_params",
    "coupon_amounts",
    "hazard_at",
    "hull_step_params",
    "max_hazard_step",
    "price",
    "price_profile",
    "provisions_at",
    "solve_afv",
    "stock_floor",
]
