import math
import sys
from dataclasses import replace
from pathlib import Path

import pytest

from cbtree.instrument import ConversionPeriod, benchmark_terms
from cbtree.intensity import ConstantHazard, PowerHazard
from cbtree.lattice import MarketState
from cbtree.pricer import DefaultSpec

ROOT = Path(__file__).resolve().parents[1]
BENCHMARK_TERMS_FILE = ROOT / "terms" / "benchmark.terms"


@pytest.fixture
def terms():
    return benchmark_terms()


@pytest.fixture
def market():
    return MarketState(r=0.05, sigma=0.25)


@pytest.fixture
def constant_spec():
    return DefaultSpec(eta=1.0, hazard=ConstantHazard(0.062))


@pytest.fixture
def synthesis_spec():
    return DefaultSpec(eta=1.0, hazard=PowerHazard(0.062, -0.5, 50.0))


def plain_bond(terms, coupon_rate=0.0, ratio=None):
    """Benchmark dates with every provision removed; optional conversion at maturity only."""
    conversion = () if ratio is None else (ConversionPeriod(terms.maturity_date, terms.maturity_date, ratio),)
    return replace(
        terms,
        calls=(),
        puts=(),
        conversion=conversion,
        coupon_rate=coupon_rate,
        coupon_dates=terms.coupon_dates if coupon_rate else (),
    )


def maturity_years(terms):
    return (terms.maturity_date - terms.issue_date).days / 365


def lognormal_call(spot, strike, rate, vol, tau):
    from scipy.stats import norm

    d1 = (math.log(spot / strike) + (rate + 0.5 * vol * vol) * tau) / (vol * math.sqrt(tau))
    d2 = d1 - vol * math.sqrt(tau)
    return spot * norm.cdf(d1) - strike * math.exp(-rate * tau) * norm.cdf(d2)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
