"""Backward induction of a convertible bond on the defaultable-stock tree.

At every node the continuation value is::

    V = exp(-r dt) * (p_u V+ + p_d V- + p_0 X) + coupon_pv

where ``X = max(R N, k (1 - eta) S)`` is what the holder receives when the
stock jumps on default (recover ``R N`` or convert the post-default stock) and
``coupon_pv = c exp(-r (t_c - t) - lambda dt)`` for a coupon paid inside the
step.  The continuation without the coupon is projected on the embedded
options with :func:`project`, then the coupon is added: exercising at ``t``
keeps any coupon paid during the following step.

Three model kinds are supported: ``"constant"`` intensity, ``"synthesis"``
(equity-linked power-law intensity, node-local probabilities on a lattice
whose multipliers depend only on sigma) and ``"hull"``, the reduced-volatility tree
with multiplier ``exp(sqrt((sigma^2 - lambda) dt))`` and total default.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import date

import numpy as np

from .errors import FloorUnreachable, InvalidStep
from .instrument import ConvertibleTerms, LevelSchedule, level_schedule, provisions_at
from .intensity import ConstantHazard, HazardModel, PowerHazard, stock_floor
from .lattice import (
    PROB_TOL,
    MarketState,
    StepParams,
    branch_probabilities,
    build_step_params,
    crr_multipliers,
    hazard_bound,
    hull_step_params,
)

MODEL_KINDS = ("constant", "synthesis", "hull")


@dataclass(frozen=True)
class DefaultSpec:
    """Stock drop on default (``eta``) and the intensity model."""

    eta: float
    hazard: HazardModel

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta!r}")


@dataclass(frozen=True)
class PricingConfig:
    n_steps: int
    model_kind: str
    spot: float
    valuation_date: date | None = None

    def __post_init__(self) -> None:
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if not (math.isfinite(self.spot) and self.spot > 0.0):
            raise ValueError(f"spot must be positive, got {self.spot!r}")


@dataclass(frozen=True)
class PriceResult:
    """Value and hedge ratio at one spot, with tree diagnostics.

    ``step_margin`` is the smallest ``B - lambda dt`` over the nodes visited
    (``B`` from :func:`cbtree.lattice.max_hazard_step`); it is negative when
    synthesis nodes below the floor had their intensity clamped, and
    ``clamped_nodes`` counts them.
    """

    value: float
    delta: float
    model: str
    spot: float
    n_steps: int
    floor: float | None = None
    floor_extended: bool = False
    step_margin: float = math.inf
    clamped_nodes: int = 0


def default_payoff(terms: ConvertibleTerms, spot: float, eta: float, t: date) -> float:
    """What the holder gets if default strikes a node at stock price ``spot``.

    ``t`` is the date at which conversion would happen (end of the step).
    """
    if spot < 0.0:
        raise ValueError("spot must be non-negative")
    ratio = provisions_at(terms, t).conversion_ratio
    if ratio is None:
        return terms.recovery_amount
    return max(terms.recovery_amount, ratio * (1.0 - eta) * spot)


def coupon_pv(amount: float, offset: float, r: float, lam, dt: float):
    """Value at the start of a step of a coupon paid ``offset`` years into it.

    Discounted at ``r`` and weighted by the one-step survival ``exp(-lam dt)``.
    """
    return amount * np.exp(-r * offset - lam * dt)


def rollback_step(Vp, Vm, X, step: StepParams, coupon_pv=0.0):
    """One backward step; arrays broadcast node-wise."""
    probs = (np.asarray(step.p_u), np.asarray(step.p_d), np.asarray(step.p_0))
    for p in probs:
        if np.any(p < -PROB_TOL) or np.any(p > 1.0 + PROB_TOL):
            raise InvalidStep("branch probabilities outside [0, 1]")
    return step.discount * (step.p_u * Vp + step.p_d * Vm + step.p_0 * X) + coupon_pv


def project(continuation, spot, conversion_ratio, call_price, put_price):
    """Apply conversion, call and put to a continuation value.

    ``conversion_ratio`` 0 means no conversion, ``call_price`` ``+inf`` no call,
    ``put_price`` ``-inf`` no put.  The issuer calls when continuing is worth
    more than the call price, and the holder then converts if that pays more.
    """
    conv = conversion_ratio * spot if conversion_ratio > 0.0 else -math.inf
    held = np.minimum(continuation, np.maximum(call_price, conv))
    return np.maximum(np.maximum(conv, put_price), held)


def apply_provisions(continuation, spot, t: date, terms: ConvertibleTerms):
    """:func:`project` with the provisions active on date ``t``."""
    p = provisions_at(terms, t)
    return project(
        continuation,
        spot,
        p.conversion_ratio or 0.0,
        math.inf if p.call_price is None else p.call_price,
        -math.inf if p.put_price is None else p.put_price,
    )


def _check_model(kind: str, spec: DefaultSpec) -> None:
    if kind == "synthesis" and not isinstance(spec.hazard, PowerHazard):
        raise ValueError("synthesis model needs a PowerHazard intensity")
    if kind in ("constant", "hull") and not isinstance(spec.hazard, ConstantHazard):
        raise ValueError(f"{kind} model needs a ConstantHazard intensity")


def _lattice(market: MarketState, spec: DefaultSpec, kind: str, dt: float):
    """``(u, d, eta, constant_step)``; the step is ``None`` for synthesis."""
    if kind == "hull":
        step = hull_step_params(market, spec.hazard.lambda0, dt)
        return step.u, step.d, 1.0, step
    u, d = crr_multipliers(market.sigma, dt)
    if kind == "constant":
        return u, d, spec.eta, build_step_params(market, spec.eta, spec.hazard.lambda0, dt)
    return u, d, spec.eta, None


def _rollback(
    terms: ConvertibleTerms,
    market: MarketState,
    spec: DefaultSpec,
    kind: str,
    sched: LevelSchedule,
    spot: float,
) -> PriceResult:
    n, dt, r = sched.n, sched.dt, market.r
    u, d, eta, fixed = _lattice(market, spec, kind, dt)
    bound = hazard_bound(r, u, eta, dt)
    lam_cap = bound / dt
    recovery = terms.recovery_amount

    def spots(i):
        return spot * u ** np.arange(-i, i + 1, 2, dtype=float)

    s = spots(n)
    k = sched.conversion[n]
    terminal = np.maximum(terms.redemption_amount, k * s) if k > 0.0 else np.full(n + 1, terms.redemption_amount)
    values = project(terminal, s, k, sched.call[n], sched.put[n])

    margin = math.inf if fixed is None else bound - fixed.lam * dt
    clamped = 0
    children = values
    for i in range(n - 1, -1, -1):
        s = spots(i)
        if fixed is None:
            lam = spec.hazard.at(s)
            margin = min(margin, float(np.min(bound - lam * dt)))
            over = lam > lam_cap
            if over.any():
                clamped += int(over.sum())
                lam = np.minimum(lam, lam_cap)
            p_u, p_d, p_0 = branch_probabilities(r, u, d, eta, lam, dt)
            step = StepParams(u=u, d=d, p_u=p_u, p_d=p_d, p_0=p_0, dt=dt, lam=lam, r=r)
        else:
            step, lam = fixed, fixed.lam

        k_next = sched.conversion[i + 1]
        if k_next > 0.0 and eta < 1.0:
            X = np.maximum(recovery, k_next * (1.0 - eta) * s)
        else:
            X = recovery
        cpv = 0.0
        for offset, amount in sched.coupons.get(i, ()):
            cpv = cpv + coupon_pv(amount, offset, r, lam, dt)
        cont = rollback_step(values[1:], values[:-1], X, step)
        if i == 0:
            children = values
        # coupon added after exercise: a put or call snapped just before a
        # coupon date must not forfeit that coupon
        values = project(cont, s, sched.conversion[i], sched.call[i], sched.put[i]) + cpv

    delta = float(children[1] - children[0]) / (spot * (u - d))
    return PriceResult(
        value=float(values[0]),
        delta=delta,
        model=kind,
        spot=spot,
        n_steps=n,
        step_margin=margin,
        clamped_nodes=clamped,
    )


def _extended(anchor: PriceResult, spot: float, recovery: float) -> PriceResult:
    """Linear bridge from ``(0, R N)`` to the value at the floor."""
    floor = anchor.spot
    slope = (anchor.value - recovery) / floor
    return replace(
        anchor,
        value=recovery + slope * spot,
        delta=slope,
        spot=spot,
        floor_extended=True,
    )


def price(
    terms: ConvertibleTerms,
    market: MarketState,
    spec: DefaultSpec,
    config: PricingConfig,
) -> PriceResult:
    """Value the convertible at ``config.spot``.

    Raises :class:`~cbtree.errors.StepTooCoarse` when a constant intensity
    breaks the step bound, :class:`~cbtree.errors.DegenerateVolatility` for a
    reduced-volatility tree with ``sigma**2 <= lambda`` and
    :class:`~cbtree.errors.FloorUnreachable` when a synthesis valuation is
    requested below the stock floor (use :func:`price_profile` to extend).
    """
    _check_model(config.model_kind, spec)
    sched = level_schedule(terms, config.valuation_date or terms.issue_date, config.n_steps)
    return _price_on(terms, market, spec, config.model_kind, sched, config.spot)


def _floor(market, spec, kind, dt):
    if kind != "synthesis":
        return None
    return stock_floor(spec.hazard, market, spec.eta, dt)


def _price_on(terms, market, spec, kind, sched, spot, floor=None) -> PriceResult:
    if floor is None:
        floor = _floor(market, spec, kind, sched.dt)
    if floor is not None and spot < floor:
        raise FloorUnreachable(
            f"spot {spot:g} lies below the stock floor {floor:.6g} for dt = {sched.dt:.6g}",
            floor=floor,
        )
    res = _rollback(terms, market, spec, kind, sched, spot)
    return replace(res, floor=floor) if floor is not None else res


def _profile_on(terms, market, spec, kind, sched, spots, n_jobs=None):
    spots = [float(x) for x in spots]
    if not spots:
        raise ValueError("spot grid is empty")
    if any(b < a for a, b in zip(spots, spots[1:])):
        raise ValueError("spot grid must be ascending")
    floor = _floor(market, spec, kind, sched.dt)
    if not all(math.isfinite(x) for x in spots):
        raise ValueError("spots must be finite")
    # spot 0 is only reachable through the below-floor extension
    if spots[0] < 0.0 or (floor is None and spots[0] == 0.0):
        raise ValueError("spots must be positive")

    above = [x for x in spots if floor is None or x >= floor]
    below = [x for x in spots if floor is not None and x < floor]

    def one(x):
        return _price_on(terms, market, spec, kind, sched, x, floor)

    if n_jobs is not None and n_jobs != 1 and len(above) > 1:
        workers = None if n_jobs < 0 else n_jobs
        with ThreadPoolExecutor(max_workers=workers) as pool:
            priced = list(pool.map(one, above))
    else:
        priced = [one(x) for x in above]

    out = []
    if below:
        anchor = one(floor)
        out.extend((x, _extended(anchor, x, terms.recovery_amount)) for x in below)
    out.extend(zip(above, priced))
    return out


def price_profile(
    terms: ConvertibleTerms,
    market: MarketState,
    spec: DefaultSpec,
    config: PricingConfig,
    spots,
    n_jobs: int | None = None,
) -> list[tuple[float, PriceResult]]:
    """Price over an ascending spot grid; ``config.spot`` is ignored.

    Under the synthesis model spots below the floor are filled linearly between
    ``(0, R N)`` and the value at the floor, and flagged ``floor_extended``.
    """
    _check_model(config.model_kind, spec)
    sched = level_schedule(terms, config.valuation_date or terms.issue_date, config.n_steps)
    return _profile_on(terms, market, spec, config.model_kind, sched, spots, n_jobs)
