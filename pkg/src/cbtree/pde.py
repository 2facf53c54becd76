"""Finite-difference solver for the continuous-time limit of the tree.

The pure convertible price solves::

    V_t + sigma^2 S^2 / 2 V_SS + (r + lambda eta) S V_S - (r + lambda) V
        + lambda max(R N, k (1 - eta) S) = 0

with ``lambda`` constant or ``lambda(S)``.  This module marches it backward on
a uniform spot grid and applies the same provision projection and coupon
convention as the tree, so that both engines price the same contract.

Each time step is split in two parts:

* convection-diffusion ``V_t + sigma^2 S^2/2 V_SS + (r + lambda eta) S V_S``,
  central differences (one-sided upwind where the cell Peclet condition
  fails), fully implicit or Crank-Nicolson;
* reaction ``-(r + lambda) V + lambda X``, integrated exactly node by node.

Implicit steps use Lie splitting, Crank-Nicolson steps Strang splitting.

Boundaries: at ``S = 0`` the operator reduces to the reaction ODE (for a
power-law intensity ``lambda`` is clamped to its value at the first interior
node).  At ``s_max`` the value is ``k S`` with the largest conversion ratio
still ahead; with no conversion left the second derivative is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_spots, model_inputs
from .errors import GridTooCoarse
from .instrument import ConvertibleTerms, LevelSchedule, level_schedule
from .intensity import PowerHazard
from .lattice import MarketState, hull_effective_vol
from .pricer import DefaultSpec, project

SCHEMES = ("implicit", "crank-nicolson")


@dataclass(frozen=True)
class PdeGrid:
    s_max: float
    n_space: int = 800
    n_time: int = 800
    scheme: str = "implicit"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.s_max) and self.s_max > 0.0):
            raise ValueError("s_max must be positive")
        if self.n_space < 50 or self.n_time < 50:
            raise ValueError("need at least 50 space and 50 time steps")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    def coarsened(self) -> "PdeGrid":
        return PdeGrid(self.s_max, max(self.n_space // 2, 50), max(self.n_time // 2, 50), self.scheme)


@dataclass(frozen=True)
class AfvSolution:
    """Value function at the valuation date on the spot grid."""

    spots: np.ndarray
    values: np.ndarray
    grid: PdeGrid

    def value_at(self, spot):
        return np.interp(spot, self.spots, self.values)


def default_s_max(terms: ConvertibleTerms, spot: float) -> float:
    """Five times the larger of the spot and the face-value parity level."""
    ratios = [p.ratio for p in terms.conversion]
    parity = terms.face / min(ratios) if ratios else terms.face
    return 5.0 * max(spot, parity)


def hull_limit_market(market: MarketState, lam: float) -> MarketState:
    """Market whose volatility is the reduced-volatility tree's effective diffusion.

    That tree is the total-default tree with ``sigma`` replaced by
    ``sqrt(sigma**2 - lambda)``, so its continuous limit is this equation with
    that volatility and ``eta = 1``.
    """
    return MarketState(market.r, hull_effective_vol(market, lam))


def _intensity(spec: DefaultSpec, s: np.ndarray) -> np.ndarray:
    if isinstance(spec.hazard, PowerHazard):
        lam = np.empty_like(s)
        lam[1:] = spec.hazard.at(s[1:])
        lam[0] = lam[1]
        return lam
    return np.full_like(s, spec.hazard.lambda0)


def _operator(market, eta, s, lam, h, free_top):
    """Tridiagonal convection-diffusion operator as ``(lower, diag, upper)``."""
    m = len(s)
    lower, diag, upper = np.zeros(m), np.zeros(m), np.zeros(m)
    j = slice(1, m - 1)
    diff = 0.5 * market.sigma**2 * s[j] ** 2 / h**2
    drift = (market.r + lam[j] * eta) * s[j]
    lo = diff - 0.5 * drift / h
    up = diff + 0.5 * drift / h
    upwind = lo < 0.0
    lo = np.where(upwind, diff, lo)
    up = np.where(upwind, diff + drift / h, up)
    lower[j], upper[j], diag[j] = lo, up, -(lo + up)
    # row 0 stays zero (pure reaction at S=0); the top row is either held
    # fixed (Dirichlet) or keeps one-sided convection without diffusion
    if free_top:
        top = (market.r + lam[-1] * eta) * s[-1] / h
        lower[-1], diag[-1] = top, -top
    return lower, diag, upper


def _matrix(lower, diag, upper, scale):
    """``I - scale * L`` in CSC form."""
    m = len(diag)
    return sparse.diags(
        [-scale * lower[1:], 1.0 - scale * diag, -scale * upper[:-1]],
        [-1, 0, 1],
        shape=(m, m),
        format="csc",
    )


def _apply(lower, diag, upper, v):
    out = diag * v
    out[1:] += lower[1:] * v[:-1]
    out[:-1] += upper[:-1] * v[1:]
    return out


def _march(terms, market, spec, grid: PdeGrid, sched: LevelSchedule) -> AfvSolution:
    n_space, dt = grid.n_space, sched.dt
    h = grid.s_max / n_space
    s = np.linspace(0.0, grid.s_max, n_space + 1)
    lam = _intensity(spec, s)
    eta, r = spec.eta, market.r
    recovery = terms.recovery_amount

    theta = 1.0 if grid.scheme == "implicit" else 0.5
    steppers = {}

    def stepper(free_top):
        if free_top not in steppers:
            ops = _operator(market, eta, s, lam, h, free_top)
            steppers[free_top] = ops, splu(_matrix(*ops, theta * dt))
        return steppers[free_top]

    rate = r + lam

    def react(v, tau, k_next):
        if k_next > 0.0 and eta < 1.0:
            x = np.maximum(recovery, k_next * (1.0 - eta) * s)
        else:
            x = recovery
        decay = np.exp(-rate * tau)
        return v * decay + lam * x / rate * (1.0 - decay)

    # largest ratio still reachable: k S is the far-field value once S is huge
    k_ahead = np.maximum.accumulate(sched.conversion[::-1])[::-1]
    k = sched.conversion[-1]
    terminal = np.maximum(terms.redemption_amount, k * s) if k > 0.0 else np.full_like(s, terms.redemption_amount)
    v = project(terminal, s, k, sched.call[-1], sched.put[-1])

    for m in range(sched.n - 1, -1, -1):
        k_next, k_now = sched.conversion[m + 1], sched.conversion[m]
        top = k_ahead[m] * s[-1]
        ops, solver = stepper(top == 0.0)
        if theta == 1.0:
            v[-1] = top or v[-1]
            v = solver.solve(v)
            v = react(v, dt, k_next)
        else:
            v = react(v, 0.5 * dt, k_next)
            v[-1] = top or v[-1]
            v = solver.solve(v + 0.5 * dt * _apply(*ops, v))
            v = react(v, 0.5 * dt, k_next)
        if top > 0.0:
            v[-1] = top
        v = project(v, s, k_now, sched.call[m], sched.put[m])
        for offset, amount in sched.coupons.get(m, ()):
            v = v + amount * np.exp(-r * offset - lam * dt)
    return AfvSolution(spots=s, values=v, grid=grid)


def solve_afv(
    terms: ConvertibleTerms,
    market: MarketState,
    spec: DefaultSpec,
    grid: PdeGrid,
    valuation_date: date | None = None,
    refinement_tol: float | None = None,
    spots=None,
) -> AfvSolution:
    """Solve on ``grid`` and return the value function at the valuation date.

    With ``refinement_tol`` set, the problem is solved again on a grid with
    half the steps in each direction and :class:`GridTooCoarse` is raised if
    the values at ``spots`` (default: the whole grid) move by more than the
    tolerance.
    """
    vd = valuation_date or terms.issue_date
    sol = _march(terms, market, spec, grid, level_schedule(terms, vd, grid.n_time))
    if refinement_tol is not None:
        coarse_grid = grid.coarsened()
        coarse = _march(terms, market, spec, coarse_grid, level_schedule(terms, vd, coarse_grid.n_time))
        probe = sol.spots if spots is None else np.asarray(spots, dtype=float)
        change = float(np.max(np.abs(sol.value_at(probe) - coarse.value_at(probe))))
        if change > refinement_tol:
            raise GridTooCoarse(
                f"halving the grid moves the value by {change:.3g} > {refinement_tol:g}"
            )
    return sol


class AfvPdeSolver(BaseEstimator):
    """Estimator front end for :func:`solve_afv`.

    ``fit(spots)`` sizes the grid for the spots of interest (``s_max`` defaults
    to :func:`default_s_max` of the largest one) and solves; ``predict(spots)``
    interpolates the solution linearly.  ``model="hull"`` solves the limit of
    the reduced-volatility tree (see :func:`hull_limit_market`).

    Examples
    --------
    >>> from cbtree.instrument import benchmark_terms
    >>> solver = AfvPdeSolver(benchmark_terms(), n_space=800, n_time=800)
    >>> round(float(solver.fit([50.0]).predict([50.0])[0]), 1)
    102.3
    """

    def __init__(
        self,
        terms=None,
        *,
        r=0.05,
        sigma=0.25,
        eta=1.0,
        model="constant",
        lambda0=0.062,
        alpha=-0.5,
        s0=50.0,
        n_space=800,
        n_time=800,
        scheme="implicit",
        s_max=None,
        valuation_date=None,
        refinement_tol=None,
    ):
        self.terms = terms
        self.r = r
        self.sigma = sigma
        self.eta = eta
        self.model = model
        self.lambda0 = lambda0
        self.alpha = alpha
        self.s0 = s0
        self.n_space = n_space
        self.n_time = n_time
        self.scheme = scheme
        self.s_max = s_max
        self.valuation_date = valuation_date
        self.refinement_tol = refinement_tol

    def fit(self, X, y=None):
        spots = check_spots(X)
        terms, market, spec, kind = model_inputs(self)
        if kind == "hull":
            market = hull_limit_market(market, spec.hazard.lambda0)
        s_max = self.s_max or default_s_max(terms, float(spots.max()))
        self.grid_ = PdeGrid(s_max, self.n_space, self.n_time, self.scheme)
        self.solution_ = solve_afv(
            terms, market, spec, self.grid_, self.valuation_date, self.refinement_tol, spots
        )
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        spots = check_spots(X)
        if spots.max() > self.grid_.s_max:
            raise ValueError(f"spot beyond the grid (s_max = {self.grid_.s_max:g})")
        return self.solution_.value_at(spots)
