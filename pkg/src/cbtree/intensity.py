"""Default intensity models and the stock floor of a fixed-step tree.

Two models are provided: a constant intensity, and the equity-linked power law
``lambda(S) = lambda0 * (S / s0) ** alpha`` with ``alpha < 0``, so default
becomes more likely as the stock falls.  ``lambda0`` is often set to the
observed credit spread; with recovery ``R`` the usual approximation is
``lambda ~ spread / (1 - R)``.  No calibration is done here.

For the power law, a tree of fixed step ``dt`` can only carry nodes whose
intensity satisfies the step bound of :func:`cbtree.lattice.max_hazard_step`;
:func:`stock_floor` turns that bound into the lowest admissible spot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NonpositiveSpot, StepTooCoarse
from .lattice import MarketState, max_hazard_step


@dataclass(frozen=True)
class ConstantHazard:
    lambda0: float

    kind = "constant"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lambda0) and self.lambda0 >= 0.0):
            raise ValueError(f"lambda0 must be non-negative, got {self.lambda0!r}")

    def at(self, spot):
        if np.ndim(spot):
            return np.full(np.shape(spot), self.lambda0)
        return self.lambda0


@dataclass(frozen=True)
class PowerHazard:
    """Equity-linked intensity ``lambda0 * (S / s0) ** alpha``."""

    lambda0: float
    alpha: float
    s0: float

    kind = "synthesis"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lambda0) and self.lambda0 > 0.0):
            raise ValueError(f"lambda0 must be positive, got {self.lambda0!r}")
        if not (math.isfinite(self.alpha) and self.alpha < 0.0):
            raise ValueError(f"alpha must be negative, got {self.alpha!r}")
        if not (math.isfinite(self.s0) and self.s0 > 0.0):
            raise ValueError(f"s0 must be positive, got {self.s0!r}")

    def at(self, spot):
        if np.ndim(spot):
            spot = np.asarray(spot, dtype=float)
            if np.any(spot <= 0.0):
                raise NonpositiveSpot("power-law intensity needs S > 0")
            return self.lambda0 * (spot / self.s0) ** self.alpha
        if not spot > 0.0:
            raise NonpositiveSpot(f"power-law intensity needs S > 0, got {spot!r}")
        return self.lambda0 * (spot / self.s0) ** self.alpha


HazardModel = Union[ConstantHazard, PowerHazard]


def hazard_at(model: HazardModel, spot):
    """Intensity per year at stock price ``spot`` (scalar or array)."""
    return model.at(spot)


def stock_floor(model: HazardModel, market: MarketState, eta: float, dt: float) -> float | None:
    """Lowest spot at which a step of length ``dt`` has valid probabilities.

    Returns ``None`` for a constant intensity (no spot dependence), after
    checking that the constant itself respects the step bound.
    """
    bound = max_hazard_step(market, eta, dt)
    if isinstance(model, ConstantHazard):
        if model.lambda0 * dt > bound:
            raise StepTooCoarse(
                f"constant intensity {model.lambda0:g} too high for dt = {dt:g}",
                max_lambda_dt=bound,
                lambda_dt=model.lambda0 * dt,
            )
        return None
    ratio = bound / (model.lambda0 * dt)
    return model.s0 * ratio ** (1.0 / model.alpha)
