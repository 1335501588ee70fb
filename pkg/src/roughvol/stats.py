"""Sample statistics of a uniformly sampled log-price path.

Lagged realized (co)variations, quarticity, signature/variance plot
regressions, a white-noise test and three simple roughness estimators
used as benchmarks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateError, InputError


@dataclass
class VariationStats:
    """Lagged variation vector ``vhat[r] = sum_k dY_k dY_{k+r}`` plus quarticity."""

    vhat: np.ndarray
    qhat: float
    n_obs: int
    delta: float
    t: float

    @property
    def R(self) -> int:
        return self.vhat.size - 1

    def __add__(self, other: "VariationStats") -> "VariationStats":
        if other.vhat.size != self.vhat.size or not np.isclose(other.delta, self.delta):
            raise ValueError("cannot add VariationStats with different R or grid spacing")
        return VariationStats(
            vhat=self.vhat + other.vhat,
            qhat=self.qhat + other.qhat,
            n_obs=self.n_obs + other.n_obs,
            delta=self.delta,
            t=self.t + other.t,
        )

    def scaled(self, lam: float) -> "VariationStats":
        """Statistics of the path multiplied by ``lam``."""
        return VariationStats(self.vhat * lam**2, self.qhat * lam**4, self.n_obs, self.delta, self.t)

    def to_dict(self) -> dict:
        return {
            "vhat": self.vhat.tolist(),
            "qhat": self.qhat,
            "n_obs": self.n_obs,
            "delta": self.delta,
            "t": self.t,
        }


def _as_values(path) -> np.ndarray:
    values = getattr(path, "values", path)
    y = np.asarray(values, dtype=float)
    if y.ndim != 1:
        raise InputError("a path must be one-dimensional")
    if not np.all(np.isfinite(y)):
        raise InputError("path contains non-finite values")
    return y


def lagged_products(dy: np.ndarray, R: int) -> np.ndarray:
    n = dy.size
    return np.array([dy[: n - r] @ dy[r:] for r in range(R + 1)])


def variation_stats(path, R: int, delta: float | None = None, t: float | None = None) -> VariationStats:
    """Lag-0..R variations and quarticity of a path (a ``PricePath`` or an array)."""
    y = _as_values(path)
    if y.size <= R + 1:
        raise InputError(f"path of length {y.size} too short for R={R}")
    dy = np.diff(y)
    if delta is None:
        delta = getattr(path, "delta", 1.0 / dy.size)
    if t is None:
        t = getattr(path, "days", dy.size * delta)
    return VariationStats(
        vhat=lagged_products(dy, R),
        qhat=float(np.sum(dy**4)),
        n_obs=int(dy.size),
        delta=float(delta),
        t=float(t),
    )


def rv_subsampled(path, i: int) -> float:
    """Realized variance computed on every ``i``-th observation."""
    if i < 1:
        raise InputError("thinning factor must be >= 1")
    y = _as_values(path)[::i]
    if y.size < 2:
        raise InputError("fewer than two retained observations")
    return float(np.sum(np.diff(y) ** 2))


def increment_variance(path, i: int) -> float:
    """Sample variance of the ``i``-spaced increments."""
    y = _as_values(path)[::i]
    if y.size < 3:
        raise InputError("fewer than two retained increments")
    return float(np.var(np.diff(y), ddof=1))


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    h: float
    raw_h: float
    points: np.ndarray = field(repr=False)  # columns: i, value
    dropped: int = 0


def _loglog_fit(i_vals: np.ndarray, vals: np.ndarray) -> tuple[float, float, np.ndarray, int]:
    keep = np.isfinite(vals) & (vals > 0)
    if keep.sum() < 3:
        raise DegenerateError("fewer than three positive points for the log-log regression")
    x = np.log(i_vals[keep])
    y = np.log(vals[keep])
    slope, intercept = np.polyfit(x, y, 1)
    pts = np.column_stack((i_vals, vals))
    return float(slope), float(intercept), pts, int((~keep).sum())


def signature_slope(path, i_max: int = 20) -> SlopeFit:
    """Regress log RV of the ``i``-subsampled path on log ``i``, ``i = 1..i_max``.

    ``h`` is ``(slope + 1)/2`` clipped to [0, 1]; ``raw_h`` is unclipped.
    """
    i_vals = np.arange(1, i_max + 1, dtype=float)
    rv = np.array([rv_subsampled(path, int(i)) for i in i_vals])
    slope, intercept, pts, dropped = _loglog_fit(i_vals, rv)
    raw = 0.5 * (slope + 1.0)
    return SlopeFit(slope, intercept, float(np.clip(raw, 0.0, 1.0)), raw, pts, dropped)


def signature_from_values(i_vals, rv) -> SlopeFit:
    """Same regression as :func:`signature_slope` on precomputed RV values."""
    i_vals = np.asarray(i_vals, dtype=float)
    slope, intercept, pts, dropped = _loglog_fit(i_vals, np.asarray(rv, dtype=float))
    raw = 0.5 * (slope + 1.0)
    return SlopeFit(slope, intercept, float(np.clip(raw, 0.0, 1.0)), raw, pts, dropped)


def variance_slope(path, i_max: int = 20) -> SlopeFit:
    """Regress log sample variance of ``i``-spaced increments on log ``i``.

    For fBM-dominated data the slope is ``2H``, so ``h`` is ``slope/2``.
    """
    i_vals = np.arange(1, i_max + 1, dtype=float)
    v = np.array([increment_variance(path, int(i)) for i in i_vals])
    slope, intercept, pts, dropped = _loglog_fit(i_vals, v)
    raw = 0.5 * slope
    return SlopeFit(slope, intercept, float(np.clip(raw, 0.0, 1.0)), raw, pts, dropped)


def white_noise_stat(path) -> float:
    """Standardized test statistic, asymptotically N(0,1) under white noise."""
    dy = np.diff(_as_values(path))
    if dy.size < 4:
        raise InputError("need at least 4 increments")
    rv = float(dy @ dy)
    s2 = float(np.sum((dy[:-1] + dy[1:]) ** 2))
    q = float(np.sum(dy[:-2] ** 2 * dy[2:] ** 2))
    if rv == 0.0 or q == 0.0:
        raise DegenerateError("zero denominator in the white-noise statistic")
    return rv / math.sqrt(2.0 * q) * (s2 / rv - 1.0)


def h_acf(vs: VariationStats) -> float:
    """First-order autocorrelation estimator of H."""
    v0, v1 = vs.vhat[0], vs.vhat[1]
    if v0 <= 0:
        raise DegenerateError("vhat[0] must be positive")
    arg = v1 / v0 + 1.0
    if arg <= 0:
        raise DegenerateError("log of a nonpositive number in h_acf")
    return 0.5 * (1.0 + math.log2(arg))


def _log2_plus(x: float) -> float:
    return math.log2(x) if x > 0 else 0.0


def h_dms_from_ratio(ratio: float) -> float:
    return 0.5 * (1.0 + _log2_plus(ratio))


def h_dms(path) -> float:
    """Change-of-frequency estimator built from RV at steps 1, 2 and 4."""
    y = _as_values(path)
    if y.size < 8:
        raise InputError("need at least 8 observations")
    v1 = rv_subsampled(y, 1)
    v2 = rv_subsampled(y, 2)
    v4 = rv_subsampled(y, 4)
    den = v2 - v1
    if den == 0:
        return 0.5
    return h_dms_from_ratio((v4 - v2) / den)
