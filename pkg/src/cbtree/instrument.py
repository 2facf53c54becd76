"""Convertible bond term sheet and its schedules.

Dates are plain :class:`datetime.date` values.  Year fractions are Act/365
fixed with no business-day adjustment, so every time in a schedule is an
integer number of days divided by 365.

Call and put prices are flat amounts: no accrued interest is added.  Coupons
are paid separately on their own dates.
"""

from __future__ import annotations

import calendar
import math
from dataclasses import dataclass, field
from datetime import date
from typing import NamedTuple

import numpy as np

DAYS_PER_YEAR = 365


def year_fraction(start: date, end: date) -> float:
    """Act/365 fixed."""
    return (end - start).days / DAYS_PER_YEAR


def add_months(d: date, months: int) -> date:
    """Shift by calendar months, clamping the day to the end of the month."""
    idx = d.year * 12 + (d.month - 1) + months
    year, month = divmod(idx, 12)
    month += 1
    day = min(d.day, calendar.monthrange(year, month)[1])
    return date(year, month, day)


def coupon_schedule(issue_date: date, maturity_date: date, frequency: int) -> tuple[date, ...]:
    """Regular unadjusted coupon dates rolled back from maturity."""
    if frequency not in (1, 2, 4, 12):
        raise ValueError(f"unsupported coupon frequency {frequency}")
    step = 12 // frequency
    dates = []
    k = 0
    while True:
        d = add_months(maturity_date, -step * k)
        if d <= issue_date:
            break
        dates.append(d)
        k += 1
    return tuple(reversed(dates))


@dataclass(frozen=True)
class ConversionPeriod:
    start: date
    end: date
    ratio: float


@dataclass(frozen=True)
class CallPeriod:
    start: date
    end: date
    price: float


@dataclass(frozen=True)
class PutDate:
    date: date
    price: float


class Provisions(NamedTuple):
    conversion_ratio: float | None
    call_price: float | None
    put_price: float | None


@dataclass(frozen=True)
class ConvertibleTerms:
    """Term sheet of a convertible bond.

    ``redemption`` defaults to ``face``; it only changes the survival payoff at
    maturity, while the default payoff always recovers ``recovery * face``.
    """

    issue_date: date
    maturity_date: date
    face: float = 100.0
    coupon_rate: float = 0.0
    coupon_dates: tuple[date, ...] = ()
    conversion: tuple[ConversionPeriod, ...] = ()
    calls: tuple[CallPeriod, ...] = ()
    puts: tuple[PutDate, ...] = ()
    recovery: float = 0.0
    redemption: float | None = None
    day_count: str = field(default="ACT/365")

    def __post_init__(self) -> None:
        for name in ("coupon_dates", "conversion", "calls", "puts"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.day_count.upper() not in ("ACT/365", "ACT/365F", "ACT/365 FIXED"):
            raise ValueError(f"unsupported day count {self.day_count!r}")
        if not self.issue_date < self.maturity_date:
            raise ValueError("issue_date must precede maturity_date")
        if not self.face > 0.0:
            raise ValueError("face must be positive")
        if not self.coupon_rate >= 0.0:
            raise ValueError("coupon_rate must be non-negative")
        if not 0.0 <= self.recovery <= 1.0:
            raise ValueError("recovery must lie in [0, 1]")
        if self.redemption is not None and not self.redemption > 0.0:
            raise ValueError("redemption must be positive")

        life = (self.issue_date, self.maturity_date)
        for a, b in zip(self.coupon_dates, self.coupon_dates[1:]):
            if not a < b:
                raise ValueError("coupon_dates must be strictly increasing")
        for d in self.coupon_dates:
            _check_within(d, life, "coupon date")
        for p in self.conversion:
            _check_window(p.start, p.end, life, "conversion")
            if not p.ratio > 0.0:
                raise ValueError("conversion ratio must be positive")
        ordered = sorted(self.conversion, key=lambda p: p.start)
        for a, b in zip(ordered, ordered[1:]):
            if not a.end < b.start:
                raise ValueError("conversion periods must not overlap")
        for c in self.calls:
            _check_window(c.start, c.end, life, "call")
            if not c.price > 0.0:
                raise ValueError("call price must be positive")
        for p in self.puts:
            _check_within(p.date, life, "put date")
            if not p.price > 0.0:
                raise ValueError("put price must be positive")

    @property
    def redemption_amount(self) -> float:
        return self.face if self.redemption is None else self.redemption

    @property
    def recovery_amount(self) -> float:
        return self.recovery * self.face


def _check_within(d: date, life: tuple[date, date], what: str) -> None:
    if not life[0] <= d <= life[1]:
        raise ValueError(f"{what} {d.isoformat()} outside the bond's life")


def _check_window(start: date, end: date, life: tuple[date, date], what: str) -> None:
    if not start <= end:
        raise ValueError(f"{what} window ends before it starts")
    _check_within(start, life, f"{what} start")
    _check_within(end, life, f"{what} end")


def coupon_amounts(terms: ConvertibleTerms) -> list[tuple[date, float]]:
    """Coupon cash flows, accruing Act/365 from the previous date (issue first)."""
    out = []
    prev = terms.issue_date
    for d in terms.coupon_dates:
        out.append((d, terms.coupon_rate * year_fraction(prev, d) * terms.face))
        prev = d
    return out


def provisions_at(terms: ConvertibleTerms, t: date) -> Provisions:
    if not terms.issue_date <= t <= terms.maturity_date:
        raise ValueError(f"{t.isoformat()} outside the bond's life")
    ratio = next((p.ratio for p in terms.conversion if p.start <= t <= p.end), None)
    calls = [c.price for c in terms.calls if c.start <= t <= c.end]
    puts = [p.price for p in terms.puts if p.date == t]
    return Provisions(
        conversion_ratio=ratio,
        call_price=min(calls) if calls else None,
        put_price=max(puts) if puts else None,
    )


def _level_round(days: int, n: int, total: int) -> int:
    # nearest level to days*n/total, halves rounded up; exact integer arithmetic
    return (2 * days * n + total) // (2 * total)


@dataclass(frozen=True)
class LevelSchedule:
    """Provisions and coupons mapped onto ``n + 1`` equally spaced time levels.

    Level ``i`` sits at ``i * maturity / n`` years after valuation.  Windows and
    put dates snap to the nearest level.  A coupon paid at ``t_c`` is attached
    to the level ``m`` with ``t_m < t_c <= t_(m+1)``, together with its offset
    ``t_c - t_m`` for intra-step discounting.

    ``conversion`` is 0 where converting is not allowed, ``call`` is ``+inf``
    where there is no call and ``put`` is ``-inf`` where there is no put.
    """

    n: int
    maturity: float
    conversion: np.ndarray
    call: np.ndarray
    put: np.ndarray
    coupons: dict[int, tuple[tuple[float, float], ...]]

    @property
    def dt(self) -> float:
        return self.maturity / self.n


def level_schedule(terms: ConvertibleTerms, valuation_date: date, n: int) -> LevelSchedule:
    if n < 1:
        raise ValueError("need at least one time step")
    if not terms.issue_date <= valuation_date < terms.maturity_date:
        raise ValueError("valuation date must lie in [issue, maturity)")
    total = (terms.maturity_date - valuation_date).days
    maturity = total / DAYS_PER_YEAR

    def level(d: date) -> int:
        return _level_round((d - valuation_date).days, n, total)

    conversion = np.zeros(n + 1)
    call = np.full(n + 1, math.inf)
    put = np.full(n + 1, -math.inf)
    for p in terms.conversion:
        if p.end < valuation_date:
            continue
        lo, hi = max(level(p.start), 0), level(p.end)
        conversion[lo : hi + 1] = p.ratio
    for c in terms.calls:
        if c.end < valuation_date:
            continue
        lo, hi = max(level(c.start), 0), level(c.end)
        call[lo : hi + 1] = np.minimum(call[lo : hi + 1], c.price)
    for p in terms.puts:
        if p.date < valuation_date:
            continue
        i = level(p.date)
        put[i] = max(put[i], p.price)

    coupons: dict[int, list[tuple[float, float]]] = {}
    for d, amount in coupon_amounts(terms):
        days = (d - valuation_date).days
        if days <= 0:
            continue
        m = -(-days * n // total) - 1
        offset = (days - m * total / n) / DAYS_PER_YEAR
        coupons.setdefault(m, []).append((offset, amount))
    return LevelSchedule(
        n=n,
        maturity=maturity,
        conversion=conversion,
        call=call,
        put=put,
        coupons={m: tuple(v) for m, v in coupons.items()},
    )


def benchmark_terms() -> ConvertibleTerms:
    """Five-year 8% semi-annual convertible, callable at 110, puttable once at 105."""
    issue, maturity = date(2009, 1, 6), date(2014, 1, 6)
    return ConvertibleTerms(
        issue_date=issue,
        maturity_date=maturity,
        face=100.0,
        coupon_rate=0.08,
        coupon_dates=coupon_schedule(issue, maturity, 2),
        conversion=(ConversionPeriod(issue, maturity, 1.0),),
        calls=(CallPeriod(date(2011, 1, 6), maturity, 110.0),),
        puts=(PutDate(date(2012, 1, 6), 105.0),),
        recovery=0.4,
    )
