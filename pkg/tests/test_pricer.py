import math
from dataclasses import replace
from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbtree.errors import FloorUnreachable, InvalidStep, StepTooCoarse
from cbtree.instrument import CallPeriod, ConversionPeriod, ConvertibleTerms, PutDate, coupon_amounts
from cbtree.intensity import ConstantHazard, PowerHazard, stock_floor
from cbtree.lattice import MarketState, StepParams, build_step_params
from cbtree.pde import PdeGrid, solve_afv
from cbtree.pricer import (
    DefaultSpec,
    PricingConfig,
    apply_provisions,
    coupon_pv,
    default_payoff,
    price,
    price_profile,
    project,
    rollback_step,
)
from conftest import lognormal_call, maturity_years, plain_bond

# 40-digit mpmath evaluation of the one-step rollback
ONE_STEP_BOND = 99.93801969573737099


def _price(terms, market, spec, n, kind="constant", spot=50.0):
    return price(terms, market, spec, PricingConfig(n, kind, spot))


class TestDefaultPayoff:
    @pytest.mark.parametrize("eta, spot, expected", [(1.0, 500.0, 40.0), (0.3, 100.0, 70.0), (0.3, 40.0, 40.0)])
    def test_examples(self, terms, eta, spot, expected):
        assert default_payoff(terms, spot, eta, terms.issue_date) == pytest.approx(expected)

    def test_no_conversion_recovers_face(self, terms):
        assert default_payoff(plain_bond(terms), 1000.0, 0.0, terms.issue_date) == 40.0


class TestRollbackStep:
    def test_symmetric_average(self):
        step = StepParams(u=1.1, d=1 / 1.1, p_u=0.5, p_d=0.5, p_0=0.0, dt=0.01, lam=0.0, r=0.0)
        assert rollback_step(110.0, 90.0, 123.0, step) == 100.0

    def test_certain_default(self):
        step = StepParams(u=1.1, d=1 / 1.1, p_u=0.0, p_d=0.0, p_0=1.0, dt=0.01, lam=math.inf, r=0.0)
        assert rollback_step(110.0, 90.0, 40.0, step) == 40.0

    def test_one_step_bond(self):
        step = build_step_params(MarketState(0.05, 0.2), 1.0, 0.02, 0.01)
        assert rollback_step(100.0, 100.0, 40.0, step) == pytest.approx(ONE_STEP_BOND, rel=1e-14)
        assert rollback_step(100.0, 100.0, 40.0, step) == pytest.approx(99.938, abs=5e-4)

    def test_coupon_added(self):
        step = build_step_params(MarketState(0.05, 0.2), 1.0, 0.02, 0.01)
        cpv = coupon_pv(4.0, 0.004, 0.05, 0.02, 0.01)
        assert cpv == pytest.approx(4.0 * math.exp(-0.05 * 0.004 - 0.02 * 0.01))
        assert rollback_step(100.0, 100.0, 40.0, step, cpv) == pytest.approx(ONE_STEP_BOND + cpv, rel=1e-14)

    def test_rejects_invalid_probabilities(self):
        step = build_step_params(MarketState(0.05, 0.2), 1.0, 5.0, 0.01, check=False)
        with pytest.raises(InvalidStep):
            rollback_step(100.0, 100.0, 40.0, step)

    def test_vectorised(self):
        step = build_step_params(MarketState(0.05, 0.2), 1.0, 0.02, 0.01)
        out = rollback_step(np.array([100.0, 120.0]), np.array([90.0, 100.0]), 40.0, step)
        assert out.shape == (2,)
        assert out[1] == pytest.approx(rollback_step(120.0, 100.0, 40.0, step))


class TestProvisions:
    def test_no_provisions_identity(self):
        assert project(97.0, 50.0, 0.0, math.inf, -math.inf) == 97.0

    def test_conversion_dominates(self):
        assert project(150.0, 200.0, 1.0, math.inf, -math.inf) == 200.0

    def test_call_caps_continuation(self):
        assert project(130.0, 90.0, 1.0, 110.0, -math.inf) == 110.0

    def test_put_floors(self):
        assert project(95.0, 50.0, 1.0, 110.0, 105.0) == 105.0

    def test_apply_on_dates(self, terms):
        from datetime import date

        assert apply_provisions(130.0, 90.0, date(2010, 6, 1), terms) == 130.0
        assert apply_provisions(130.0, 90.0, date(2012, 1, 6), terms) == 110.0
        assert apply_provisions(95.0, 90.0, date(2012, 1, 6), terms) == 105.0

    def test_vectorised(self):
        spots = np.array([50.0, 90.0, 200.0])
        np.testing.assert_array_equal(project(np.array([100.0, 130.0, 150.0]), spots, 1.0, 110.0, -math.inf),
                                      [100.0, 110.0, 200.0])


class TestPrice:
    def test_default_free_zero_coupon(self, terms, market):
        t = plain_bond(terms)
        res = _price(t, market, DefaultSpec(0.5, ConstantHazard(0.0)), 500)
        assert res.value == pytest.approx(100.0 * math.exp(-0.05 * maturity_years(t)), rel=1e-10)
        assert res.delta == pytest.approx(0.0, abs=1e-10)

    def test_crr_reduction(self, terms, market):
        t = plain_bond(terms, ratio=1.0)
        tau = maturity_years(t)
        exact = 100.0 * math.exp(-0.05 * tau) + lognormal_call(50.0, 100.0, 0.05, 0.25, tau)
        res = _price(t, market, DefaultSpec(1.0, ConstantHazard(0.0)), 1000)
        assert res.value == pytest.approx(exact, rel=1e-3)

    def test_european_conversion_with_total_default(self, terms, market):
        # eta = 1: survival drift r + lambda, so a lognormal call at that rate
        t = replace(plain_bond(terms, ratio=1.0), recovery=0.4)
        tau, q = maturity_years(t), 0.05 + 0.062
        exact = (100.0 * math.exp(-q * tau) + lognormal_call(50.0, 100.0, q, 0.25, tau)
                 + 40.0 * 0.062 / q * (1.0 - math.exp(-q * tau)))
        res = _price(t, market, DefaultSpec(1.0, ConstantHazard(0.062)), 4000)
        assert res.value == pytest.approx(exact, abs=5e-3)

    def test_benchmark_against_pde(self, terms, market, constant_spec):
        pde = solve_afv(terms, market, constant_spec, PdeGrid(500.0, 800, 800)).value_at(50.0)
        assert abs(_price(terms, market, constant_spec, 2000).value - pde) <= 0.10

    def test_hull_below_constant(self, terms, market, constant_spec):
        hull = _price(terms, market, constant_spec, 1000, "hull")
        const = _price(terms, market, constant_spec, 1000)
        assert hull.value < const.value
        assert hull.model == "hull" and hull.floor is None and not hull.floor_extended

    def test_constant_step_too_coarse(self, terms, market):
        with pytest.raises(StepTooCoarse):
            _price(terms, market, DefaultSpec(1.0, ConstantHazard(2.0)), 20)

    def test_model_hazard_mismatch(self, terms, market, constant_spec, synthesis_spec):
        with pytest.raises(ValueError):
            _price(terms, market, constant_spec, 100, "synthesis")
        with pytest.raises(ValueError):
            _price(terms, market, synthesis_spec, 100, "constant")

    def test_synthesis_reports_floor(self, terms, market, synthesis_spec):
        res = _price(terms, market, synthesis_spec, 1000, "synthesis")
        assert res.floor == pytest.approx(stock_floor(synthesis_spec.hazard, market, 1.0, maturity_years(terms) / 1000))
        assert res.step_margin < 0.0 and res.clamped_nodes > 0

    def test_synthesis_below_floor_raises(self, terms, market, synthesis_spec):
        floor = _price(terms, market, synthesis_spec, 200, "synthesis").floor
        with pytest.raises(FloorUnreachable) as info:
            _price(terms, market, synthesis_spec, 200, "synthesis", spot=0.5 * floor)
        assert info.value.floor == pytest.approx(floor)
        assert info.value.token == "FLOOR_UNREACHABLE"

    def test_valuation_date_shortens_life(self, terms, market, constant_spec):
        later = replace(PricingConfig(400, "constant", 50.0), valuation_date=terms.issue_date + timedelta(days=900))
        assert price(terms, market, constant_spec, later).value != _price(terms, market, constant_spec, 400).value

    def test_deterministic(self, terms, market, synthesis_spec):
        a = _price(terms, market, synthesis_spec, 700, "synthesis")
        b = _price(terms, market, synthesis_spec, 700, "synthesis")
        assert a == b


class TestProfile:
    def test_floor_extension(self, terms, market, synthesis_spec):
        cfg = PricingConfig(1000, "synthesis", 50.0)
        floor = _price(terms, market, synthesis_spec, 1000, "synthesis").floor
        spots = [0.0, 0.5 * floor, floor, 50.0]
        rows = price_profile(terms, market, synthesis_spec, cfg, spots)
        assert [s for s, _ in rows] == spots
        assert rows[0][1].value == pytest.approx(40.0, rel=1e-14)
        assert rows[0][1].floor_extended and rows[1][1].floor_extended
        assert not rows[2][1].floor_extended
        mid = 0.5 * (rows[0][1].value + rows[2][1].value)
        assert rows[1][1].value == pytest.approx(mid, rel=1e-12)
        assert rows[3][1] == _price(terms, market, synthesis_spec, 1000, "synthesis")

    def test_continuous_at_floor(self, terms, market, synthesis_spec):
        cfg = PricingConfig(1000, "synthesis", 50.0)
        floor = _price(terms, market, synthesis_spec, 1000, "synthesis").floor
        below, at = price_profile(terms, market, synthesis_spec, cfg, [floor * (1 - 1e-12), floor])
        assert below[1].value == pytest.approx(at[1].value, rel=1e-9)

    def test_constant_profile_matches_price(self, terms, market, constant_spec):
        rows = price_profile(terms, market, constant_spec, PricingConfig(300, "constant", 1.0), [30.0, 60.0])
        for s, res in rows:
            assert res == _price(terms, market, constant_spec, 300, spot=s)
            assert not res.floor_extended and res.floor is None

    def test_threads_match_serial(self, terms, market, synthesis_spec):
        cfg = PricingConfig(300, "synthesis", 50.0)
        spots = list(np.linspace(5.0, 100.0, 12))
        assert price_profile(terms, market, synthesis_spec, cfg, spots, n_jobs=4) == price_profile(
            terms, market, synthesis_spec, cfg, spots
        )

    @pytest.mark.parametrize("spots", [[], [60.0, 50.0], [0.0, 10.0]])
    def test_rejects_bad_grids(self, terms, market, constant_spec, spots):
        with pytest.raises(ValueError):
            price_profile(terms, market, constant_spec, PricingConfig(50, "constant", 1.0), spots)


def _closed_form_plain_bond(terms, r, lam):
    q = r + lam
    years = lambda d: (d - terms.issue_date).days / 365
    tau = maturity_years(terms)
    coupons = sum(a * math.exp(-q * years(d)) for d, a in coupon_amounts(terms))
    recovery = terms.recovery_amount * lam / q * (1 - math.exp(-q * tau))
    return coupons + terms.face * math.exp(-q * tau) + recovery


LADDER = (250, 500, 1000, 2000, 4000)


def _assert_first_order(errors):
    for coarse, fine in zip(errors, errors[1:]):
        assert fine <= 0.7 * coarse


def test_plain_bond_converges_constant(terms, market, constant_spec):
    t = plain_bond(terms, coupon_rate=0.08)
    exact = _closed_form_plain_bond(t, 0.05, 0.062)
    _assert_first_order([abs(_price(t, market, constant_spec, n).value - exact) for n in LADDER])


def test_plain_bond_converges_synthesis(terms, market):
    t, spec = plain_bond(terms), DefaultSpec(0.3, PowerHazard(0.062, -0.5, 50.0))
    ref = solve_afv(t, market, spec, PdeGrid(500.0, 800, 8000, "crank-nicolson")).value_at(50.0)
    _assert_first_order([abs(_price(t, market, spec, n, "synthesis").value - ref) for n in LADDER])


@st.composite
def coupon_cases(draw):
    from datetime import date

    issue = date(2010, 1, 1)
    life = draw(st.integers(200, 2000))
    maturity = issue + timedelta(days=life)
    early = issue + timedelta(days=life // 3)
    with_provisions = draw(st.booleans())
    terms = ConvertibleTerms(
        issue_date=issue,
        maturity_date=maturity,
        face=100.0,
        recovery=draw(st.floats(0.0, 0.9)),
        conversion=(ConversionPeriod(issue, early, draw(st.floats(0.5, 2.0))),) if with_provisions else (),
        calls=(CallPeriod(issue, early, draw(st.floats(100.0, 130.0))),) if with_provisions else (),
        puts=(PutDate(early, draw(st.floats(80.0, 105.0))),) if with_provisions else (),
    )
    coupon = draw(st.floats(0.5, 10.0))
    kind = draw(st.sampled_from(["constant", "synthesis", "hull"]))
    sigma = draw(st.floats(0.15, 0.6))
    eta = 1.0 if kind == "hull" else draw(st.floats(0.0, 1.0))
    if kind == "synthesis":
        hazard = PowerHazard(draw(st.floats(0.01, 0.1)), draw(st.floats(-1.5, -0.1)), 50.0)
    else:
        hazard = ConstantHazard(draw(st.floats(0.0, min(0.1, 0.9 * sigma**2))))
    market = MarketState(draw(st.floats(0.01, 0.08)), sigma)
    n = draw(st.integers(30, 200))
    spot = draw(st.floats(30.0, 120.0))
    return terms, coupon, market, DefaultSpec(eta, hazard), PricingConfig(n, kind, spot)


@settings(max_examples=50, deadline=None)
@given(coupon_cases())
def test_maturity_coupon_equals_higher_redemption(case):
    terms, coupon, market, spec, cfg = case
    with_coupon = replace(terms, coupon_dates=(terms.maturity_date,),
                          coupon_rate=coupon / (100.0 * maturity_years(terms)))
    paid = coupon_amounts(with_coupon)[0][1]
    augmented = replace(terms, redemption=100.0 + paid)
    a = price(with_coupon, market, spec, cfg).value
    b = price(augmented, market, spec, cfg).value
    assert a == pytest.approx(b, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.6), st.floats(0.0, 1.0), st.floats(0.0, 0.1), st.floats(0.01, 0.08))
def test_value_non_decreasing_in_spot(sigma, eta, lam, r):
    from cbtree.instrument import benchmark_terms

    spec = DefaultSpec(eta, ConstantHazard(lam))
    rows = price_profile(benchmark_terms(), MarketState(r, sigma), spec, PricingConfig(150, "constant", 1.0),
                         np.linspace(5.0, 200.0, 25))
    values = np.array([res.value for _, res in rows])
    assert np.all(np.diff(values) >= -1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.6), st.floats(0.0, 1.0), st.floats(0.0, 0.9), st.floats(0.01, 0.08), st.floats(0.0, 0.1))
def test_plain_bond_non_increasing_in_intensity(sigma, eta, recovery, r, coupon_rate):
    from cbtree.instrument import benchmark_terms

    t = replace(plain_bond(benchmark_terms(), coupon_rate=coupon_rate), recovery=recovery)
    market = MarketState(r, sigma)
    values = [_price(t, market, DefaultSpec(eta, ConstantHazard(lam)), 150).value for lam in np.linspace(0.0, 0.2, 9)]
    assert np.all(np.diff(values) <= 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.6), st.floats(0.0, 0.15), st.floats(0.01, 0.08), st.floats(0.5, 2.0), st.floats(5.0, 300.0))
def test_delta_bounded_by_conversion_ratio(sigma, lam, r, ratio, spot):
    from cbtree.instrument import benchmark_terms

    t = replace(benchmark_terms(), calls=(), puts=(),
                conversion=(ConversionPeriod(benchmark_terms().issue_date, benchmark_terms().maturity_date, ratio),))
    res = _price(t, MarketState(r, sigma), DefaultSpec(1.0, ConstantHazard(lam)), 200, spot=spot)
    assert -1e-12 <= res.delta <= ratio + 1e-12
