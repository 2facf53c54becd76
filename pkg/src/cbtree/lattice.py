"""Per-step parameters of the defaultable-stock binomial tree.

Over one step of length ``dt`` the stock moves to ``S*u`` or ``S*d`` (no
default) or jumps to ``S*(1 - eta)`` (default), with probabilities ``p_u``,
``p_d`` and ``p_0``.  The multipliers are the usual CRR ones, ``u = exp(sigma
sqrt(dt))`` and ``d = 1/u``; ``p_0 = 1 - exp(-lambda dt)`` is the chance of at
least one Poisson arrival and ``p_u`` is chosen so that the one-step mean of
``S(t+dt)/S(t)`` is exactly ``exp(r dt)``.

A step is usable only if ``p_d >= 0``, which is equivalent to::

    lambda * dt <= log((u - (1 - eta)) / (exp(r dt) - (1 - eta)))

:func:`max_hazard_step` returns the right-hand side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVolatility, StepTooCoarse

#: Absolute tolerance on ``p_d`` when deciding whether a step is valid.
PROB_TOL = 1e-12


@dataclass(frozen=True)
class MarketState:
    """Flat continuously-compounded rate ``r`` and lognormal volatility ``sigma``."""

    r: float
    sigma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r) and self.r > 0.0):
            raise ValueError(f"r must be positive, got {self.r!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")


@dataclass(frozen=True)
class StepParams:
    """One tree step: multipliers, branch probabilities and the intensity used.

    The probability fields are floats for a single step, or arrays when built
    node-wise for an equity-linked intensity (see :func:`branch_probabilities`).
    """

    u: float
    d: float
    p_u: float
    p_d: float
    p_0: float
    dt: float
    lam: float
    r: float

    @property
    def discount(self) -> float:
        return math.exp(-self.r * self.dt)

    @property
    def survival(self) -> float:
        return self.p_u + self.p_d

    @property
    def valid(self) -> bool:
        return bool(np.all(np.asarray(self.p_d) >= -PROB_TOL))


def _check_eta(eta: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")


def _check_dt(dt: float) -> None:
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt!r}")


def crr_multipliers(sigma: float, dt: float) -> tuple[float, float]:
    """``(u, d)`` with ``d`` taken as ``1/u`` so the lattice recombines exactly."""
    u = math.exp(sigma * math.sqrt(dt))
    return u, 1.0 / u


def branch_probabilities(r, u, d, eta, lam, dt):
    """Return ``(p_u, p_d, p_0)`` for the given multipliers.

    ``lam`` may be an array (one intensity per node); the result then has the
    same shape.  No validity check is made here.
    """
    lam = np.asarray(lam, dtype=float) if np.ndim(lam) else float(lam)
    surv = np.exp(-lam * dt)
    p_0 = -np.expm1(-lam * dt)
    # exp(r dt) - surv*d - (1-eta)*p_0, rearranged to avoid cancellation;
    # 1 - d is exact for d in [0.5, 1].
    numer = math.expm1(r * dt) + (1.0 - d) + p_0 * (d - (1.0 - eta))
    p_u = numer / (u - d)
    p_d = surv - p_u
    return p_u, p_d, p_0


def hazard_bound(r: float, u: float, eta: float, dt: float) -> float:
    """Largest admissible ``lambda * dt`` for up-multiplier ``u``."""
    return math.log(((u - 1.0) + eta) / (math.expm1(r * dt) + eta))


def max_hazard_step(market: MarketState, eta: float, dt: float) -> float:
    """Largest ``lambda * dt`` for which a step of length ``dt`` is valid.

    Always positive, since ``d < exp(r dt)``.
    """
    _check_eta(eta)
    _check_dt(dt)
    u, _ = crr_multipliers(market.sigma, dt)
    return hazard_bound(market.r, u, eta, dt)


def _assemble(market, u, d, eta, lam, dt, check) -> StepParams:
    p_u, p_d, p_0 = branch_probabilities(market.r, u, d, eta, lam, dt)
    if check and p_d < -PROB_TOL:
        bound = hazard_bound(market.r, u, eta, dt)
        raise StepTooCoarse(
            f"lambda*dt = {lam * dt:.6g} exceeds the admissible {bound:.6g} "
            f"(p_d = {p_d:.3g}); refine the step",
            max_lambda_dt=bound,
            lambda_dt=lam * dt,
        )
    return StepParams(u=u, d=d, p_u=p_u, p_d=p_d, p_0=p_0, dt=dt, lam=lam, r=market.r)


def build_step_params(
    market: MarketState, eta: float, lam: float, dt: float, *, check: bool = True
) -> StepParams:
    """Step parameters for a stock that loses ``eta`` of its value on default.

    Raises :class:`StepTooCoarse` if ``p_d`` is negative beyond
    :data:`PROB_TOL`; pass ``check=False`` to get the raw parameters anyway.
    """
    _check_eta(eta)
    _check_dt(dt)
    if not (math.isfinite(lam) and lam >= 0.0):
        raise ValueError(f"intensity must be non-negative, got {lam!r}")
    u, d = crr_multipliers(market.sigma, dt)
    return _assemble(market, u, d, eta, float(lam), dt, check)


def hull_effective_vol(market: MarketState, lam: float) -> float:
    """``sqrt(sigma**2 - lambda)``, the diffusion left in the reduced-volatility tree."""
    if lam == 0.0:
        return market.sigma
    excess = market.sigma**2 - lam
    # a few ulps of sigma**2 is rounding noise: 0.2**2 - 0.04 is not 0
    if not excess > 4.0 * np.finfo(float).eps * market.sigma**2:
        raise DegenerateVolatility(
            f"sigma**2 = {market.sigma**2:.6g} <= lambda = {lam:.6g}: "
            "the reduced-volatility multiplier is undefined"
        )
    return math.sqrt(excess)


def hull_step_params(
    market: MarketState, lam: float, dt: float, *, check: bool = True
) -> StepParams:
    """Reduced-volatility step: total default, up-multiplier ``exp(sqrt((sigma^2 - lambda) dt))``.

    Probabilities are the total-default ones evaluated with these multipliers.
    """
    _check_dt(dt)
    if not (math.isfinite(lam) and lam >= 0.0):
        raise ValueError(f"intensity must be non-negative, got {lam!r}")
    vol = hull_effective_vol(market, lam)
    u = math.exp(vol * math.sqrt(dt))
    return _assemble(market, u, 1.0 / u, 1.0, float(lam), dt, check)
