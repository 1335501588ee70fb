"""Asymptotic covariance of the lagged variation vector and derived variances.

The covariance matrix has entries ``S(|i-j|) + S(i+j)`` where
``S(k) = sum_{d in Z} Gamma_|d| Gamma_|d+k|`` is the lag-``k`` autocovariance
of the kernel sequence itself. ``S`` is summed exactly up to a truncation
lag and the remainder is added from the power-law tail of the kernel.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import binom

from .exceptions import ConvergenceError, DegenerateError, DomainError
from .kernel import RatioFunction, gamma, gamma_h_derivative, gamma_vector

_HARD_CAP = 1_000_000


@dataclass(frozen=True)
class AsymCovMatrix:
    H: float
    R: int
    entries: np.ndarray = field(repr=False)
    truncation_lag: int
    tail_bound: float


def _tail_pair_sum(H: float, start: float, k: int) -> float:
    """Approximate sum_{d > start} Gamma_d (Gamma_{d+k} + Gamma_{d-k}) from the kernel tail.

    Uses Gamma_d ~ H(2H-1) d^(2H-2) and the midpoint-rule integral from
    ``start + 1/2``; the binomial expansion in k/x keeps even powers only.
    """
    c = H * (2 * H - 1)
    alpha = 2 * H - 2
    A = start + 0.5
    total = 0.0
    for p in (0, 2, 4, 6):
        e = 2 * alpha - p + 1  # exponent after integration; always negative here
        total += 2.0 * binom(alpha, p) * k**p * A**e / (-e)
    return c * c * total


def _truncation_lag(H: float, R: int, tol: float) -> int:
    c2 = (H * (2 * H - 1)) ** 2
    lag_min = 8 * R + 16
    if c2 == 0.0:
        return lag_min
    # first lag where the largest summand c^2 (L-2R-1)^(4H-4) drops below tol
    L = (c2 / tol) ** (1.0 / (4.0 - 4.0 * H)) + 2 * R + 1
    return int(min(max(np.ceil(L), lag_min), _HARD_CAP))


def kernel_autocovariance(H: float, kmax: int, tol: float = 1e-12) -> tuple[np.ndarray, int, float]:
    """``S(0..kmax)`` with the truncation lag and the size of the tail that was added."""
    R_equiv = (kmax + 1) // 2
    L = _truncation_lag(H, R_equiv, tol)
    g = gamma(H, np.arange(L + kmax + 1))
    # two-sided sequence Gamma_|d| for |d| <= L + kmax
    two = np.concatenate((g[:0:-1], g))
    centre = L + kmax
    S = np.empty(kmax + 1)
    core = two[centre - L : centre + L + 1]  # d in [-L, L]
    for k in range(kmax + 1):
        S[k] = core @ two[centre - L + k : centre + L + 1 + k]
    tails = np.array([_tail_pair_sum(H, L, k) for k in range(kmax + 1)])
    S += tails
    tail_bound = float(np.max(np.abs(tails))) if kmax >= 0 else 0.0
    # the power-law tail is itself accurate to a relative O((kmax/L)^2 + 1/L^2)
    err = tail_bound * ((kmax + 1.0) / L) ** 2
    if L >= _HARD_CAP and err > 1e-6:
        raise ConvergenceError(f"kernel series did not converge at H={H} (tail {tail_bound:.2e})")
    return S, L, tail_bound


_cache_lock = threading.Lock()


@lru_cache(maxsize=256)
def _chh_cached(H_key: float, R: int, tol: float) -> AsymCovMatrix:
    S, L, tail = kernel_autocovariance(H_key, 2 * R, tol)
    i = np.arange(R + 1)
    M = S[np.abs(i[:, None] - i[None, :])] + S[i[:, None] + i[None, :]]
    M.setflags(write=False)
    return AsymCovMatrix(H=H_key, R=R, entries=M, truncation_lag=L, tail_bound=tail)


def chh_matrix(H: float, R: int, tol: float = 1e-12) -> AsymCovMatrix:
    """Asymptotic covariance matrix of the normalized lag-0..R variations.

    Defined for ``0 < H < 3/4`` (the series diverges beyond); estimators
    only use it below 1/2 but feasible variances may be evaluated at
    estimates slightly above.
    """
    if not 0 < H < 0.75:
        raise DomainError(f"covariance matrix needs 0 < H < 3/4, got {H}")
    if tol <= 0:
        raise DomainError("tol must be positive")
    key = round(float(H), 12)
    with _cache_lock:
        return _chh_cached(key, int(R), float(tol))


# ---------------------------------------------------------------------------
# variance scalars


def _quad(v: np.ndarray, C: np.ndarray) -> float:
    q = float(v @ C @ v)
    # tiny negative values come from rounding on a PSD matrix
    return max(q, 0.0)


def _ratio_terms(a, b, H):
    rf = RatioFunction(a, b) if not isinstance(a, RatioFunction) else a
    return rf


class _Pieces:
    """Shared quantities of the variance formulas at a fixed H."""

    def __init__(self, a, b, H, tol=1e-12):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.a.shape != self.b.shape:
            raise ValueError("a and b must have equal length")
        self.R = self.a.size - 1
        self.H = H
        self.G = gamma_vector(H, self.R)
        self.dG = gamma_h_derivative(H, np.arange(self.R + 1), 1)
        self.aG = self.a @ self.G
        self.bG = self.b @ self.G
        if abs(self.bG) < 1e-300:
            raise DegenerateError(f"<b, Gamma^H> = 0 at H={H}")
        self.phi = self.aG / self.bG
        dphi = (self.a @ self.dG * self.bG - self.aG * (self.b @ self.dG)) / self.bG**2
        if abs(dphi) < 1e-10 * max(1.0, abs(self.phi)):
            raise DegenerateError(f"phi'(H) ~ 0 at H={H}: ratio function is degenerate")
        self.inv1 = 1.0 / dphi  # (phi^{-1})'(phi(H))
        self.C = chh_matrix(H, self.R, tol).entries
        self.e1 = np.zeros(self.R + 1)
        self.e1[0] = 1.0
        self.k = self.inv1 / self.bG
        self.d = self.a - self.phi * self.b


def var_h0(R: int, a, b, H: float, tol: float = 1e-12) -> float:
    """Asymptotic variance of the ratio estimator of H with no bias correction."""
    p = _Pieces(a, b, H, tol)
    _check_R(R, p)
    return (p.k**2) * _quad(p.d, p.C)


def _check_R(R, p):
    if R != p.R:
        raise ValueError(f"weight vectors have length {p.R + 1}, expected R+1 = {R + 1}")


def _final_u(p: _Pieces, c, w) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    cG = c @ p.G
    if abs(cG) < 1e-300:
        raise DegenerateError("<c, Gamma^H> = 0")
    denom = 1.0 - c[0] / cG
    if abs(denom) < 1e-12:
        raise DegenerateError("1 - c_0/<c, Gamma^H> vanishes")
    return (p.e1 - c / cG + (c @ p.dG) / cG * w) / denom


def var_c_thm3(R: int, a, b, c, H: float, tol: float = 1e-12) -> float:
    """Asymptotic variance of the integrated-volatility estimator on the no-lag-0 track."""
    p = _Pieces(a, b, H, tol)
    _check_R(R, p)
    u = _final_u(p, c, p.k * p.d)
    return _quad(u, p.C)


@dataclass
class LadderVariances:
    var_h_k: np.ndarray  # var_{H,k}, k = 1..m
    var_c_k: np.ndarray  # var_{C,k}, k = 1..m
    var_h: float
    var_c: float
    w: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)


def var_ladder(R: int, a, b, c, H: float, m: int = 50, tol: float = 1e-12) -> LadderVariances:
    """Variances of every stage of the alternating C/H debiasing iteration."""
    if m < 2:
        raise DomainError("m must be at least 2")
    p = _Pieces(a, b, H, tol)
    _check_R(R, p)
    a_ = p.a
    a0 = a_[0]
    if p.b[0] != 0:
        raise DomainError("b[0] must be 0 for the lag-0 track")
    aG = p.aG
    if abs(aG) < 1e-300:
        raise DegenerateError("<a, Gamma^H> = 0")
    # first stage uses psi'(phi(H)) = <a, dGamma> (phi^{-1})'
    psi1 = (a_ @ p.dG) * p.inv1
    denom1 = 1.0 - a0 / aG + psi1 * a0 / (aG * p.bG)
    if abs(denom1) < 1e-12:
        raise DegenerateError("first-stage normalizer vanishes", stage="u1")
    base = p.e1 - a_ / aG
    u = (base + psi1 / (aG * p.bG) * p.d) / denom1
    w = p.k * (p.d - a0 * u)
    var_h = [_quad(w, p.C)]
    var_c = [_quad(u, p.C)]
    denom_k = 1.0 - a0 / aG
    if abs(denom_k) < 1e-12:
        raise DegenerateError("1 - a_0/<a, Gamma^H> vanishes", stage="uk")
    slope = (a_ @ p.dG) / aG
    for _ in range(2, m + 1):
        u = (base + slope * w) / denom_k
        w = p.k * (p.d - a0 * u)
        var_h.append(_quad(w, p.C))
        var_c.append(_quad(u, p.C))
    uf = _final_u(p, c, w)
    return LadderVariances(
        var_h_k=np.array(var_h),
        var_c_k=np.array(var_c),
        var_h=var_h[-1],
        var_c=_quad(uf, p.C),
        w=w,
        u=uf,
    )
