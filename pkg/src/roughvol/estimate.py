"""Estimators of the noise roughness H, integrated price volatility C and
integrated noise volatility Pi from lagged variation statistics.

Two tracks are available:

* the *no-lag-0* track, whose ratio estimator ignores realized variance and
  is therefore unaffected by the Brownian component, and
* the *lag-0* track, which uses realized variance and removes the resulting
  bias by alternating C- and H-updates (:func:`debias_ladder`).

:func:`combined_estimate` picks one of them per window.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Literal, Sequence

import numpy as np

from .asymvar import var_c_thm3, var_h0, var_ladder
from .exceptions import DegenerateError, DomainError
from .kernel import DEFAULT_DOMAIN, RatioFunction, gamma_vector, n_of_h
from .stats import VariationStats, variation_stats

Z95 = 1.959963984540054
Variant = Literal["no_lag0", "lag0_multistep", "combined"]


@dataclass
class WeightConfig:
    """Weights for both tracks plus iteration controls.

    ``a, b, c`` drive the lag-0 track (``b[0]`` must be 0), ``a0, b0, c0``
    the no-lag-0 track (first entries of ``a0`` and ``b0`` must be 0).
    ``n_fixed`` replaces the data-driven number of bias terms by a constant.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    a0: np.ndarray
    b0: np.ndarray
    c0: np.ndarray | None = None
    m: int = 50
    fix_tol: float = 1e-5
    n_cap: int = 3
    n_fixed: int | None = None

    def __post_init__(self):
        for k in ("a", "b", "c", "a0", "b0"):
            setattr(self, k, np.asarray(getattr(self, k), dtype=float))
        self.c0 = self.c.copy() if self.c0 is None else np.asarray(self.c0, dtype=float)
        n = self.a.size
        if any(getattr(self, k).shape != (n,) for k in ("b", "c", "a0", "b0", "c0")):
            raise DomainError("all weight vectors must have length R+1")
        if self.b[0] != 0.0:
            raise DomainError("b[0] must be 0")
        if self.a0[0] != 0.0 or self.b0[0] != 0.0:
            raise DomainError("a0[0] and b0[0] must be 0")
        if self.m < 2:
            raise DomainError("m must be >= 2")
        if self.n_fixed is not None and not 0 <= self.n_fixed <= 3:
            raise DomainError("n_fixed must be in 0..3")
        if not 0 <= self.n_cap <= 3:
            raise DomainError("n_cap must be in 0..3")

    @property
    def R(self) -> int:
        return self.a.size - 1

    @cached_property
    def rf(self) -> RatioFunction:
        return RatioFunction(self.a, self.b)

    @cached_property
    def rf0(self) -> RatioFunction:
        return RatioFunction(self.a0, self.b0)

    def with_options(self, **kw) -> "WeightConfig":
        d = {k: getattr(self, k) for k in ("a", "b", "c", "a0", "b0", "c0", "m", "fix_tol", "n_cap", "n_fixed")}
        d.update(kw)
        new = WeightConfig(**d)
        # ratio functions only depend on the vectors
        if "rf" in self.__dict__ and not {"a", "b"} & set(kw):
            new.__dict__["rf"] = self.rf
        if "rf0" in self.__dict__ and not {"a0", "b0"} & set(kw):
            new.__dict__["rf0"] = self.rf0
        return new

    def to_dict(self) -> dict:
        out = {k: getattr(self, k).tolist() for k in ("a", "b", "c", "a0", "b0", "c0")}
        out.update(m=self.m, fix_tol=self.fix_tol, n_cap=self.n_cap, n_fixed=self.n_fixed)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "WeightConfig":
        keys = ("a", "b", "c", "a0", "b0", "c0", "m", "fix_tol", "n_cap", "n_fixed")
        return cls(**{k: d[k] for k in keys if k in d})

    @classmethod
    def from_weight_set(cls, ws, **kw) -> "WeightConfig":
        return cls(a=ws.a, b=ws.b, c=ws.c, a0=ws.a0, b0=ws.b0, c0=ws.c0, **kw)

    @classmethod
    def default(cls, H0: float = 0.35, R: int = 60, **kw) -> "WeightConfig":
        from .tune import initial_weights

        w = initial_weights(H0, R)
        return cls(a=w["a"], b=w["b"], c=w["c"], a0=w["a0"], b0=w["b0"], c0=w["c0"], **kw)


@dataclass
class EstimationResult:
    h: float
    c_integrated: float
    pi_integrated: float
    variant: Variant
    h_ci: tuple[float, float] = (math.nan, math.nan)
    c_ci: tuple[float, float] = (math.nan, math.nan)
    pi_ci: tuple[float, float] = (math.nan, math.nan)
    var_h: float = math.nan
    var_c: float = math.nan
    iterations_used: int = 0
    n_terms: int = 0
    h_initial: float = math.nan
    flags: dict = field(default_factory=dict)
    selected_from: str | None = None

    @property
    def c_clamped(self) -> float:
        return max(self.c_integrated, 0.0)

    @property
    def pi_clamped(self) -> float:
        return max(self.pi_integrated, 0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c_clamped"] = self.c_clamped
        d["pi_clamped"] = self.pi_clamped
        for k in ("h_ci", "c_ci", "pi_ci"):
            d[k] = list(d[k])
        return d

    CSV_FIELDS = ("variant", "h", "h_lo", "h_hi", "c_integrated", "c_lo", "c_hi",
                  "pi_integrated", "pi_lo", "pi_hi", "iterations_used", "clamped",
                  "negative_c", "negative_pi", "ci_contains_half")

    def csv_row(self) -> list:
        f = self.flags
        return [self.variant, self.h, *self.h_ci, self.c_integrated, *self.c_ci,
                self.pi_integrated, *self.pi_ci, self.iterations_used,
                int(bool(f.get("clamped"))), int(bool(f.get("negative_c"))),
                int(bool(f.get("negative_pi"))), int(bool(f.get("ci_contains_half")))]


# ---------------------------------------------------------------------------
# helpers


def _n_terms(H: float, wc: WeightConfig) -> int:
    if wc.n_fixed is not None:
        return wc.n_fixed
    if H >= 0.5:
        return wc.n_cap
    return n_of_h(H, wc.n_cap)


def _finite(x: float, stage: str) -> float:
    if not np.isfinite(x):
        raise DegenerateError(f"non-finite intermediate value {x}", stage=stage)
    return float(x)


def _in_domain(H: float, stage: str, flags: dict) -> float:
    H = _finite(H, stage)
    lo, hi = DEFAULT_DOMAIN
    if H < lo or H > hi:
        flags["clamped"] = True
        return float(min(max(H, lo), hi))
    return H


def h_tilde(vs: VariationStats, rf: RatioFunction) -> tuple[float, bool]:
    """Invert the sample ratio ``<a, V> / <b, V>``; returns ``(H, clamped)``."""
    den = rf.b @ vs.vhat
    if den == 0.0:
        raise DegenerateError("<b, vhat> = 0", stage="h_tilde")
    return rf.inverse(float(rf.a @ vs.vhat / den))


def volatility_from_h(vhat: np.ndarray, c: np.ndarray, H: float) -> float:
    """Integrated price volatility: realized variance minus the rescaled noise part."""
    cG = float(c @ gamma_vector(H, c.size - 1))
    if abs(cG) < 1e-300:
        raise DegenerateError("<c, Gamma^H> = 0", stage="volatility")
    denom = 1.0 - c[0] / cG
    if abs(denom) < 1e-12:
        raise DegenerateError("1 - c_0/<c, Gamma^H> vanishes", stage="volatility")
    return float((vhat[0] - c @ vhat / cG) / denom)


def estimators_thm3(vs: VariationStats, rf0: RatioFunction, c, h_est: float,
                    delta: float | None = None) -> dict:
    """Integrated price and noise volatility on the no-lag-0 track at a given H."""
    c = np.asarray(c, dtype=float)
    delta = vs.delta if delta is None else delta
    flags = {}
    if h_est <= 0.25:
        flags["not_identifiable"] = True
    c_hat = volatility_from_h(vs.vhat, c, h_est)
    aG = float(rf0.a @ gamma_vector(h_est, rf0.R))
    if abs(aG) < 1e-300:
        raise DegenerateError("<a0, Gamma^H> = 0", stage="pi")
    pi_hat = delta ** (1.0 - 2.0 * h_est) * float(rf0.a @ vs.vhat) / aG
    return {"c_hat": c_hat, "pi_hat": pi_hat, "flags": flags}


# ---------------------------------------------------------------------------
# confidence intervals


def _interval(x: float, half: float) -> tuple[float, float]:
    return (x - half, x + half)


def ci_halfwidths(var_h: float, var_c: float, H: float, vhat0: float, qhat: float,
                  delta: float, qhat_c: float | None = None) -> tuple[float, float, float]:
    """95% half-widths for H, C and Pi from the feasible central limit theorems.

    ``qhat_c`` is the quarticity matching the horizon of the C/Pi estimates
    (defaults to ``qhat``).
    """
    if vhat0 <= 0 or qhat <= 0:
        raise DegenerateError("confidence intervals need vhat[0] > 0 and qhat > 0", stage="ci")
    if not var_h > 0 or not var_c > 0:
        raise DegenerateError("zero asymptotic variance: degenerate interval", stage="ci")
    qc = qhat if qhat_c is None else qhat_c
    h_half = Z95 * math.sqrt(var_h * qhat / (3.0 * vhat0**2))
    c_half = Z95 * math.sqrt(var_c * qc / 3.0)
    pi_half = Z95 * abs(math.log(delta)) * math.sqrt(4.0 * var_h * qc * delta ** (2.0 - 4.0 * H) / 3.0)
    return h_half, c_half, pi_half


def confidence_intervals(result: EstimationResult, vs: VariationStats, wc: WeightConfig,
                         delta: float | None = None, vs_last: VariationStats | None = None) -> EstimationResult:
    """Attach 95% intervals, plugging the estimated H into the variance formulas."""
    delta = vs.delta if delta is None else delta
    H = result.h
    if result.variant == "no_lag0":
        vh = var_h0(wc.R, wc.a0, wc.b0, H)
        vc = var_c_thm3(wc.R, wc.a0, wc.b0, wc.c0, H)
    else:
        lv = var_ladder(wc.R, wc.a, wc.b, wc.c, H, m=wc.m)
        vh, vc = lv.var_h, lv.var_c
    q_c = (vs_last or vs).qhat
    hh, ch, ph = ci_halfwidths(vh, vc, H, vs.vhat[0], vs.qhat, delta, q_c)
    result.var_h, result.var_c = vh, vc
    result.h_ci = _interval(H, hh)
    result.c_ci = _interval(result.c_integrated, ch)
    result.pi_ci = _interval(result.pi_integrated, ph)
    result.flags["ci_contains_half"] = bool(result.h_ci[0] <= 0.5 <= result.h_ci[1])
    return result


def _attach_ci(res, vs, wc, delta, vs_last, with_ci):
    if not with_ci:
        return res
    try:
        return confidence_intervals(res, vs, wc, delta, vs_last)
    except (DegenerateError, DomainError) as exc:
        res.flags["ci_error"] = str(exc)
        # an undefined variance near H = 1/2 is treated as an unbounded interval
        res.h_ci = (-math.inf, math.inf)
        res.c_ci = (-math.inf, math.inf)
        res.pi_ci = (-math.inf, math.inf)
        res.flags["ci_contains_half"] = True
        return res


def _flag_signs(res: EstimationResult) -> EstimationResult:
    res.flags["negative_c"] = bool(res.c_integrated < 0)
    res.flags["negative_pi"] = bool(res.pi_integrated < 0)
    res.flags.setdefault("clamped", False)
    return res


# ---------------------------------------------------------------------------
# no-lag-0 track


def no_lag0_estimate(vs: VariationStats, wc: WeightConfig, delta: float | None = None,
                     vs_last: VariationStats | None = None, with_ci: bool = True) -> EstimationResult:
    """Ratio estimator of H without realized variance, plus C and Pi at that H.

    ``vs_last`` (optional) holds the statistics of the sub-period on which C
    and Pi are reported; H always uses ``vs``.
    """
    delta = vs.delta if delta is None else delta
    H, clamped = h_tilde(vs, wc.rf0)
    target = vs_last or vs
    est = estimators_thm3(target, wc.rf0, wc.c0, H, delta)
    res = EstimationResult(h=H, c_integrated=est["c_hat"], pi_integrated=est["pi_hat"],
                           variant="no_lag0", h_initial=H, flags={"clamped": clamped, **est["flags"]})
    return _attach_ci(_flag_signs(res), vs, wc, delta, vs_last, with_ci)


# ---------------------------------------------------------------------------
# lag-0 track


@dataclass
class LadderTrace:
    h_tilde: float
    h_tilde0: float
    p_hat: float
    theta: float
    c_tilde: list
    c_hat1: float
    h_path: list
    c_path: list


def debias_ladder(vs: VariationStats, wc: WeightConfig, delta: float | None = None, t: float | None = None,
                  vs_last: VariationStats | None = None, with_ci: bool = True,
                  return_trace: bool = False):
    """Alternating bias correction of the lag-0 ratio estimator.

    Stages: initial ratio estimate, no-lag-0 noise level, first volatility
    estimate and its polynomial correction, first corrected H, then up to
    ``m`` alternating (C, H) updates, and finally C and Pi with weights ``c``.
    """
    delta = vs.delta if delta is None else delta
    V = vs.vhat
    a, b, c = wc.a, wc.b, wc.c
    a_0 = a[0]
    rf = wc.rf
    flags: dict = {}

    bV = float(b @ V)
    if bV == 0.0:
        raise DegenerateError("<b, vhat> = 0", stage="h_tilde")
    Ht, cl = rf.inverse(float(a @ V) / bV)
    flags["clamped"] = cl

    b0V = float(wc.b0 @ V)
    if b0V == 0.0:
        raise DegenerateError("<b0, vhat> = 0", stage="h_tilde0")
    Ht0, cl0 = wc.rf0.inverse(float(wc.a0 @ V) / b0V)
    a0G = float(wc.a0 @ gamma_vector(Ht0, wc.R))
    if a0G == 0.0:
        raise DegenerateError("<a0, Gamma> = 0", stage="p_hat")
    P = float(wc.a0 @ V) / a0G

    aG = float(a @ gamma_vector(Ht, wc.R))
    if aG == 0.0:
        raise DegenerateError("<a, Gamma> = 0", stage="c_tilde")
    psi = rf.psi_derivatives_at(Ht, j_max=3)
    theta = 1.0 - a_0 / aG + P / bV * a_0 * psi[1] / aG
    if abs(theta) < 1e-300:
        raise DegenerateError("Theta vanishes", stage="c_tilde")
    C1 = _finite((V[0] - float(a @ V) / aG) / theta, "c_tilde")

    N0 = _n_terms(Ht, wc)
    Psi = {j: (-1) ** j / math.factorial(j) * psi[j] * a_0**j / aG * P / bV**j / theta for j in range(2, 4)}
    Ct = {1: C1}
    for ell in range(1, max(N0, 1)):
        Ct[ell + 1] = _finite(C1 + sum(Psi[j] * Ct[ell - j + 2] ** j for j in range(2, ell + 2)), "c_recursion")
    Chat1 = Ct[max(N0, 1)]

    inv = rf.inverse_derivatives_at(Ht)
    Phi = {j: (-1) ** j / math.factorial(j) * inv[j - 1] * a_0**j / bV**j for j in range(1, 4)}

    def corrected(C, N):
        return Ht + sum(Phi[j] * C**j for j in range(1, N + 1))

    H_k = _in_domain(corrected(Chat1, N0), "h_hat1", flags)
    h_path, c_path = [H_k], [Chat1]
    iterations = 1
    converged = False
    for _k in range(2, wc.m + 1):
        H_prev = H_k
        C_k = _finite(volatility_from_h(V, a, H_prev), "c_k")
        H_k = _in_domain(corrected(C_k, _n_terms(H_prev, wc)), "h_k", flags)
        iterations += 1
        h_path.append(H_k)
        c_path.append(C_k)
        if abs(H_k - H_prev) < wc.fix_tol:
            converged = True
            break
    flags["converged"] = converged

    H_final = H_k
    target = vs_last or vs
    C_final = volatility_from_h(target.vhat, c, H_final)
    aGf = float(a @ gamma_vector(H_final, wc.R))
    Pi_final = (float(a @ target.vhat) / aGf - a_0 / aGf * C_final) * delta ** (1.0 - 2.0 * H_final)
    res = EstimationResult(h=H_final, c_integrated=_finite(C_final, "c_final"),
                           pi_integrated=_finite(Pi_final, "pi_final"), variant="lag0_multistep",
                           iterations_used=iterations, n_terms=_n_terms(H_final, wc), h_initial=Ht, flags=flags)
    res = _attach_ci(_flag_signs(res), vs, wc, delta, vs_last, with_ci)
    if return_trace:
        trace = LadderTrace(Ht, Ht0, P, theta, [Ct[k] for k in sorted(Ct)], Chat1, h_path, c_path)
        return res, trace
    return res


# ---------------------------------------------------------------------------
# selection rule


def prefer_ladder(h_ci: tuple[float, float]) -> bool:
    """Use the lag-0 track when its H-interval covers 1/2 or sits inside (0.4, 0.5)."""
    lo, hi = h_ci
    return (lo <= 0.5 <= hi) or (0.4 < lo and hi < 0.5)


def combined_from_stats(vs: VariationStats, wc: WeightConfig, delta: float | None = None,
                        vs_last: VariationStats | None = None) -> EstimationResult:
    """Run both tracks (the lag-0 track with three fixed correction terms) and select one."""
    ladder_wc = wc if wc.n_fixed == 3 else wc.with_options(n_fixed=3)
    ladder = debias_ladder(vs, ladder_wc, delta, vs_last=vs_last)
    plain = no_lag0_estimate(vs, wc, delta, vs_last=vs_last)
    chosen = ladder if prefer_ladder(ladder.h_ci) else plain
    out = EstimationResult(**{**asdict(chosen), "variant": "combined",
                              "selected_from": chosen.variant, "flags": dict(chosen.flags)})
    out.h_ci, out.c_ci, out.pi_ci = tuple(chosen.h_ci), tuple(chosen.c_ci), tuple(chosen.pi_ci)
    return out


def daily_stats(path, R: int, n_per_day: int | None = None) -> tuple[VariationStats, VariationStats | None]:
    """Variation statistics summed over days, plus those of the last day.

    Days are cut every ``n_per_day`` increments and never share an
    increment, so overnight moves do not enter. Without ``n_per_day`` the
    whole path is one period and the second item is ``None``.
    """
    if n_per_day is None:
        return variation_stats(path, R), None
    days = path.split_days(n_per_day)
    if not days:
        raise DomainError(f"path shorter than one day of {n_per_day} increments")
    per_day = [variation_stats(d, R, delta=path.delta, t=1.0) for d in days]
    total = per_day[0]
    for s in per_day[1:]:
        total = total + s
    return total, per_day[-1]


def combined_estimate(path, wc: WeightConfig, n_per_day: int | None = None) -> EstimationResult:
    """Combined estimate on a path, optionally split into days to avoid overnight increments.

    With ``n_per_day`` set, C and Pi refer to the last day; otherwise the
    whole path is one period.
    """
    total, last = daily_stats(path, wc.R, n_per_day)
    return combined_from_stats(total, wc, vs_last=last)
