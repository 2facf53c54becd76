"""Exception types raised by the pricing engine.

Each model error carries a stable ``token`` used by the command-line tool as a
machine-readable error code.
"""

from __future__ import annotations


class PricingError(ValueError):
    token = "PRICING_ERROR"


class StepTooCoarse(PricingError):
    """Tree step too long for the default intensity: ``p_d`` would be negative.

    ``max_lambda_dt`` is the largest admissible product ``lambda * dt`` for the
    offending step, so callers can pick a finer step.
    """

    token = "STEP_TOO_COARSE"

    def __init__(self, message: str, max_lambda_dt: float, lambda_dt: float | None = None):
        super().__init__(message)
        self.max_lambda_dt = max_lambda_dt
        self.lambda_dt = lambda_dt

    def __reduce__(self):
        return (type(self), (self.args[0], self.max_lambda_dt, self.lambda_dt))


class DegenerateVolatility(PricingError):
    """``sigma**2 <= lambda`` in the reduced-volatility multiplier."""

    token = "DEGENERATE_VOL"


class FloorUnreachable(PricingError):
    """Requested spot lies below the synthesis-model stock floor."""

    token = "FLOOR_UNREACHABLE"

    def __init__(self, message: str, floor: float):
        super().__init__(message)
        self.floor = floor

    def __reduce__(self):
        return (type(self), (self.args[0], self.floor))


class NonpositiveSpot(PricingError):
    token = "NONPOSITIVE_SPOT"


class InvalidStep(PricingError):
    """Branch probabilities outside ``[0, 1]`` reached the rollback."""

    token = "INVALID_STEP"


class GridTooCoarse(PricingError):
    token = "GRID_TOO_COARSE"
