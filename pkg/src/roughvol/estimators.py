"""scikit-learn style wrappers around the variation statistics and estimators.

Paths are rows of log-prices. :class:`RoughNoiseEstimator` treats the rows
passed to ``fit`` as consecutive days of one series; ``predict`` and
``transform`` treat every row as an independent one-day path.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .estimate import (EstimationResult, WeightConfig, combined_from_stats, debias_ladder,
                       no_lag0_estimate)
from .exceptions import InputError
from .simulate import PricePath
from .stats import VariationStats, variation_stats
from .tune import tuned_weight_set
from .validation import check_delta, check_design_h, check_lag, check_paths

_VARIANTS = ("combined", "no_lag0", "lag0")


class LaggedVariationTransformer(TransformerMixin, BaseEstimator):
    """Map each path to its lag-0..R realized (co)variations and quarticity.

    Output columns are ``vhat_0 .. vhat_R`` followed by ``qhat`` when
    ``quarticity`` is true.
    """

    def __init__(self, R: int = 60, quarticity: bool = True):
        self.R = R
        self.quarticity = quarticity

    def fit(self, X, y=None):
        R = check_lag(self.R)
        X = check_paths(X, min_length=R + 2)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        R = check_lag(self.R)
        X = check_paths(X, min_length=R + 2)
        rows = []
        for x in X:
            vs = variation_stats(x, R)
            rows.append(np.append(vs.vhat, vs.qhat) if self.quarticity else vs.vhat)
        return np.vstack(rows)

    def get_feature_names_out(self, input_features=None):
        names = [f"vhat_{r}" for r in range(check_lag(self.R) + 1)]
        if self.quarticity:
            names.append("qhat")
        return np.asarray(names, dtype=object)


class RoughNoiseEstimator(BaseEstimator):
    """Estimate noise roughness ``H`` with integrated price and noise volatility.

    Parameters
    ----------
    R : largest lag of the variation statistics.
    H0 : design value at which the default weights are built.
    variant : ``"combined"``, ``"no_lag0"`` or ``"lag0"``.
    weights : ``None`` for the heuristic weights at ``H0``, ``"tuned"`` for
        optimized weights from the cache, or a ``WeightConfig``/dict.
    m : maximal number of C/H alternations on the lag-0 track.
    delta : grid spacing; defaults to one time unit per row.
    confidence : attach 95% confidence intervals.

    After ``fit``: ``h_``, ``c_``, ``pi_``, the intervals ``h_ci_``, ``c_ci_``,
    ``pi_ci_``, the full ``result_`` and the summed ``variation_``. ``c_`` and
    ``pi_`` refer to the last row (day).
    """

    def __init__(self, R: int = 60, H0: float = 0.35, variant: str = "combined", weights=None,
                 m: int = 50, delta: float | None = None, confidence: bool = True):
        self.R = R
        self.H0 = H0
        self.variant = variant
        self.weights = weights
        self.m = m
        self.delta = delta
        self.confidence = confidence

    def _weight_config(self) -> WeightConfig:
        R = check_lag(self.R)
        H0 = check_design_h(self.H0)
        w = self.weights
        if w is None:
            wc = WeightConfig.default(H0, R, m=self.m)
        elif isinstance(w, str):
            if w != "tuned":
                raise InputError(f"weights must be None, 'tuned', a dict or a WeightConfig, got {w!r}")
            wc = WeightConfig.from_weight_set(tuned_weight_set(H0, R, m=self.m), m=self.m)
        elif isinstance(w, WeightConfig):
            wc = w
        elif isinstance(w, dict):
            wc = WeightConfig.from_dict(w)
        else:
            raise InputError(f"unsupported weights of type {type(w).__name__}")
        if wc.R != R:
            raise InputError(f"weights have R={wc.R} but R={R} was requested")
        return wc

    def _estimate(self, vs: VariationStats, last: VariationStats | None, wc: WeightConfig) -> EstimationResult:
        if self.variant not in _VARIANTS:
            raise InputError(f"variant must be one of {_VARIANTS}, got {self.variant!r}")
        if self.variant == "no_lag0":
            return no_lag0_estimate(vs, wc, vs_last=last, with_ci=self.confidence)
        if self.variant == "lag0":
            return debias_ladder(vs, wc, vs_last=last, with_ci=self.confidence)
        return combined_from_stats(vs, wc, vs_last=last)

    def _row_stats(self, x: np.ndarray, R: int) -> VariationStats:
        delta = check_delta(self.delta, x.size - 1)
        return variation_stats(PricePath(x, delta, 1.0), R, delta=delta, t=1.0)

    def fit(self, X, y=None):
        wc = self._weight_config()
        X = check_paths(X, min_length=wc.R + 2)
        per_day = [self._row_stats(x, wc.R) for x in X]
        total = per_day[0]
        for s in per_day[1:]:
            total = total + s
        res = self._estimate(total, per_day[-1], wc)
        self.n_features_in_ = X.shape[1]
        self.variation_ = total
        self.result_ = res
        self.h_ = res.h
        self.c_ = res.c_integrated
        self.pi_ = res.pi_integrated
        self.h_ci_, self.c_ci_, self.pi_ci_ = res.h_ci, res.c_ci, res.pi_ci
        return self

    def transform(self, X) -> np.ndarray:
        """Columns ``h, c, pi`` for every row, each row estimated on its own."""
        check_is_fitted(self, "result_")
        wc = self._weight_config()
        X = check_paths(X, min_length=wc.R + 2)
        out = np.empty((X.shape[0], 3))
        for i, x in enumerate(X):
            r = self._estimate(self._row_stats(x, wc.R), None, wc)
            out[i] = (r.h, r.c_integrated, r.pi_integrated)
        return out

    def predict(self, X) -> np.ndarray:
        """H estimate for every row."""
        return self.transform(X)[:, 0]
