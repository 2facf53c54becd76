"""Input validation shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .instrument import ConvertibleTerms, benchmark_terms
from .intensity import ConstantHazard, PowerHazard
from .lattice import MarketState
from .pricer import MODEL_KINDS, DefaultSpec


def check_spots(X) -> np.ndarray:
    """Spot prices as a 1-D float array.

    Accepts a scalar, a 1-D sequence or a single-column 2-D array.
    """
    arr = check_array(np.atleast_1d(np.asarray(X, dtype=float)), ensure_2d=False, dtype=float)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected one column of spots, got shape {arr.shape}")
        arr = arr[:, 0]
    if np.any(arr < 0.0):
        raise ValueError("spots must be non-negative")
    return arr


def model_inputs(est) -> tuple[ConvertibleTerms, MarketState, DefaultSpec, str]:
    """Build the model objects from an estimator's parameters."""
    kind = est.model
    if kind not in MODEL_KINDS:
        raise ValueError(f"model must be one of {MODEL_KINDS}, got {kind!r}")
    terms = benchmark_terms() if est.terms is None else est.terms
    if not isinstance(terms, ConvertibleTerms):
        raise TypeError("terms must be a ConvertibleTerms instance")
    market = MarketState(float(est.r), float(est.sigma))
    if kind == "synthesis":
        hazard = PowerHazard(float(est.lambda0), float(est.alpha), float(est.s0))
    else:
        hazard = ConstantHazard(float(est.lambda0))
    eta = 1.0 if kind == "hull" else float(est.eta)
    return terms, market, DefaultSpec(eta, hazard), kind
