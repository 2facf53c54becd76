"""scikit-learn style front end to the tree pricer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_spots, model_inputs
from .instrument import level_schedule
from .pricer import PriceResult, _floor, _lattice, _price_on, _profile_on


class ConvertiblePricer(BaseEstimator):
    """Convertible bond pricer on the defaultable-stock binomial tree.

    ``fit`` validates the parameters and prepares everything that depends
    only on the step (time-level schedule, stock floor); ``predict`` maps an
    array of spot prices to bond values, extending below the stock floor
    under the synthesis model.

    Parameters
    ----------
    terms : ConvertibleTerms, default=None
        Term sheet; ``None`` uses :func:`cbtree.instrument.benchmark_terms`.
    model : {"constant", "synthesis", "hull"}, default="constant"
    r, sigma : float
        Flat risk-free rate and stock volatility.
    eta : float, default=1.0
        Fraction of the stock price lost on default; forced to 1 for "hull".
    lambda0 : float, default=0.062
        Default intensity (constant models) or its value at ``s0`` (synthesis).
    alpha, s0 : float
        Power-law exponent and reference spot of the synthesis intensity.
    n_steps : int, default=1000
    valuation_date : date, default=None
        Defaults to the issue date.
    n_jobs : int, default=None
        Threads used by :meth:`predict`; ``-1`` uses all cores.

    Attributes
    ----------
    schedule_ : LevelSchedule
    dt_ : float
    floor_ : float or None
        Stock floor for the synthesis model.

    Examples
    --------
    >>> pricer = ConvertiblePricer(n_steps=200).fit()
    >>> round(pricer.price(50.0).value, 1)
    102.3
    """

    def __init__(
        self,
        terms=None,
        *,
        model="constant",
        r=0.05,
        sigma=0.25,
        eta=1.0,
        lambda0=0.062,
        alpha=-0.5,
        s0=50.0,
        n_steps=1000,
        valuation_date=None,
        n_jobs=None,
    ):
        self.terms = terms
        self.model = model
        self.r = r
        self.sigma = sigma
        self.eta = eta
        self.lambda0 = lambda0
        self.alpha = alpha
        self.s0 = s0
        self.n_steps = n_steps
        self.valuation_date = valuation_date
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        """Prepare the tree.  ``X`` and ``y`` are ignored."""
        terms, market, spec, kind = model_inputs(self)
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        self.terms_, self.market_, self.spec_, self.kind_ = terms, market, spec, kind
        self.schedule_ = level_schedule(terms, self.valuation_date or terms.issue_date, int(self.n_steps))
        self.dt_ = self.schedule_.dt
        _lattice(market, spec, kind, self.dt_)  # step errors surface here
        self.floor_ = _floor(market, spec, kind, self.dt_)
        return self

    def price(self, spot: float) -> PriceResult:
        """Value at one spot; below the synthesis floor this raises."""
        check_is_fitted(self, "schedule_")
        spot = float(spot)
        if not spot > 0.0:
            raise ValueError("spot must be positive")
        return _price_on(self.terms_, self.market_, self.spec_, self.kind_, self.schedule_, spot, self.floor_)

    def profile(self, spots) -> list[tuple[float, PriceResult]]:
        """Price an ascending grid of spots, extending below the floor."""
        check_is_fitted(self, "schedule_")
        return _profile_on(
            self.terms_, self.market_, self.spec_, self.kind_, self.schedule_, check_spots(spots), self.n_jobs
        )

    def predict(self, X) -> np.ndarray:
        spots = check_spots(X)
        order = np.argsort(spots, kind="stable")
        rows = self.profile(spots[order])
        out = np.empty(len(spots))
        out[order] = [res.value for _, res in rows]
        return out

    def predict_delta(self, X) -> np.ndarray:
        spots = check_spots(X)
        order = np.argsort(spots, kind="stable")
        rows = self.profile(spots[order])
        out = np.empty(len(spots))
        out[order] = [res.delta for _, res in rows]
        return out
