"""Fractional increment autocorrelation kernel and the ratio function built on it.

The kernel ``gamma(H, r)`` is the lag-``r`` autocorrelation of unit-step
fractional Brownian motion increments. Estimators of the roughness
parameter invert ratios of linear functionals of this kernel, which is what
:class:`RatioFunction` provides.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .exceptions import DegenerateError, DomainError

DEFAULT_DOMAIN = (1e-4, 1.0 - 1e-4)
_GRID_SIZE = 512
_INVERSE_TOL = 1e-12


def _xlogx_pow(base: np.ndarray, H: float, j: int) -> np.ndarray:
    """(2 log x)^j x^(2H), with every zero-base term set to 0."""
    base = np.asarray(base, dtype=float)
    out = np.zeros_like(base)
    pos = base > 0
    x = base[pos]
    out[pos] = (2.0 * np.log(x)) ** j * x ** (2.0 * H)
    return out


def gamma(H: float, r) -> np.ndarray | float:
    """Increment autocorrelation of fBM at lag ``r`` (scalar or array of lags)."""
    if not H > 0:
        raise DomainError(f"H must be positive, got {H}")
    r_arr = np.asarray(r)
    if np.any(r_arr < 0):
        raise DomainError("lags must be non-negative")
    rf = r_arr.astype(float)
    val = 0.5 * ((rf + 1.0) ** (2 * H) - 2.0 * rf ** (2 * H) + np.abs(rf - 1.0) ** (2 * H))
    val = np.where(r_arr == 0, 1.0, val)
    if np.ndim(r) == 0:
        return float(val)
    return val


def gamma_vector(H: float, R: int) -> np.ndarray:
    """(gamma(H,0), ..., gamma(H,R))."""
    return gamma(H, np.arange(R + 1))


def gamma_h_derivative(H: float, r, j: int = 1) -> np.ndarray | float:
    """``j``-th derivative of ``gamma(H, r)`` with respect to ``H``."""
    if not H > 0:
        raise DomainError(f"H must be positive, got {H}")
    if j < 1:
        raise DomainError(f"derivative order must be >= 1, got {j}")
    r_arr = np.atleast_1d(np.asarray(r)).astype(float)
    val = 0.5 * (
        _xlogx_pow(r_arr + 1.0, H, j)
        - 2.0 * _xlogx_pow(r_arr, H, j)
        + _xlogx_pow(np.maximum(r_arr - 1.0, 0.0), H, j)
    )
    val[r_arr == 0] = 0.0
    if np.ndim(r) == 0:
        return float(val[0])
    return val


def gamma_derivatives(H: float, R: int, j_max: int) -> np.ndarray:
    """Rows ``0..j_max`` hold the ``j``-th H-derivative of the kernel vector."""
    lags = np.arange(R + 1)
    rows = [gamma_vector(H, R)]
    for j in range(1, j_max + 1):
        rows.append(gamma_h_derivative(H, lags, j))
    return np.vstack(rows)


def n_of_h(H: float, cap: int = 3) -> int:
    """Number of higher-order bias terms, ``floor(1/(2-4H))``, capped."""
    if not 0 < H < 0.5:
        raise DomainError(f"n_of_h requires 0 < H < 1/2, got {H}")
    return min(int(math.floor(1.0 / (2.0 - 4.0 * H))), cap)


def _quotient_derivatives(f: Sequence[float], g: Sequence[float]) -> np.ndarray:
    """Derivatives 0..3 of f/g from derivatives 0..3 of f and g."""
    q0 = f[0] / g[0]
    q1 = (f[1] - q0 * g[1]) / g[0]
    q2 = (f[2] - 2 * q1 * g[1] - q0 * g[2]) / g[0]
    q3 = (f[3] - 3 * q2 * g[1] - 3 * q1 * g[2] - q0 * g[3]) / g[0]
    return np.array([q0, q1, q2, q3])


def inverse_derivatives(d: Sequence[float]) -> np.ndarray:
    """Derivatives 1..3 of an inverse function from ``(f, f', f'', f''')``."""
    f1, f2, f3 = d[1], d[2], d[3]
    return np.array([
        1.0 / f1,
        -f2 / f1**3,
        (3.0 * f2**2 - f1 * f3) / f1**5,
    ])


class RatioFunction:
    """``phi(H) = <a, Gamma^H> / <b, Gamma^H>`` together with its inverse.

    Construction scans a 512-point grid of the working domain. Sign changes
    of the denominator at which the numerator stays away from zero are
    treated as poles and split the domain into branches; ``phi`` must be
    strictly monotone in the same direction on every branch, and the branch
    ranges must not overlap, otherwise :class:`DegenerateError` is raised.
    With ``b[0] = 0`` and ``a[0] != 0`` there is always a pole at ``H = 1/2``;
    ratios near +-infinity then invert to values close to 1/2.
    """

    def __init__(self, a, b, domain: tuple[float, float] = DEFAULT_DOMAIN):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise ValueError("a and b must be 1-D vectors of equal length")
        self.R = self.a.size - 1
        lo, hi = domain
        if not 0 < lo < hi < 1:
            raise DomainError(f"domain must lie inside (0, 1), got {domain}")
        self.domain = (float(lo), float(hi))
        self._build_branches()

    def __repr__(self) -> str:
        return f"RatioFunction(R={self.R}, domain={self.domain}, branches={len(self.branches)})"

    # -- evaluation -------------------------------------------------------
    def num_den(self, H: float) -> tuple[float, float]:
        g = gamma_vector(H, self.R)
        return float(self.a @ g), float(self.b @ g)

    def __call__(self, H: float) -> float:
        num, den = self.num_den(H)
        if den == 0.0:
            raise DegenerateError(f"<b, Gamma^H> vanishes at H={H}")
        return num / den

    def derivatives(self, H: float) -> np.ndarray:
        """``(phi, phi', phi'', phi''')`` at ``H`` via the quotient rule."""
        G = gamma_derivatives(H, self.R, 3)
        f = G @ self.a
        g = G @ self.b
        if g[0] == 0.0:
            raise DegenerateError(f"<b, Gamma^H> vanishes at H={H}")
        return _quotient_derivatives(f, g)

    # -- construction checks ----------------------------------------------
    def _build_branches(self) -> None:
        lo, hi = self.domain
        grid = np.linspace(lo, hi, _GRID_SIZE)
        G = np.array([gamma_vector(h, self.R) for h in grid])
        num = G @ self.a
        den = G @ self.b
        scale = max(np.max(np.abs(num)), np.max(np.abs(den)), 1e-300)
        if np.any(np.abs(den) < 1e-14 * scale) and not np.any(np.abs(num) > 0):
            raise DegenerateError("ratio function is identically 0/0")

        # poles: sign change of the denominator with a non-vanishing numerator
        cuts = []
        for i in range(_GRID_SIZE - 1):
            if np.sign(den[i]) != np.sign(den[i + 1]):
                z = brentq(lambda h: self.b @ gamma_vector(h, self.R), grid[i], grid[i + 1], xtol=1e-15)
                nz = self.a @ gamma_vector(z, self.R)
                if abs(nz) > 1e-10 * scale:
                    cuts.append((i, z))
                # removable singularity (0/0): the branch continues through it

        edges = [(0, lo)] + [(i, z) for i, z in cuts] + [(_GRID_SIZE - 1, hi)]
        branches = []
        direction = 0
        for k in range(len(edges) - 1):
            i0 = 0 if k == 0 else edges[k][0] + 1
            i1 = edges[k + 1][0] if k + 1 < len(edges) - 1 else _GRID_SIZE - 1
            left = lo if k == 0 else edges[k][1]
            right = hi if k + 1 == len(edges) - 1 else edges[k + 1][1]
            idx = np.arange(i0, i1 + 1)
            idx = idx[np.abs(den[idx]) > 1e-12 * scale]
            if idx.size < 2:
                raise DegenerateError("branch of the ratio function too short to check monotonicity")
            vals = num[idx] / den[idx]
            diffs = np.diff(vals)
            if np.all(diffs > 0):
                sgn = 1
            elif np.all(diffs < 0):
                sgn = -1
            else:
                raise DegenerateError("ratio function is not strictly monotone on the working domain")
            if direction and sgn != direction:
                raise DegenerateError("ratio function changes monotonicity direction across a pole")
            direction = sgn
            left_pole = k > 0
            right_pole = k + 1 < len(edges) - 1
            branches.append(_Branch(self, left, right, grid[idx], vals, sgn, left_pole, right_pole))
        self.direction = direction
        self.branches = branches
        # ranges of distinct branches may not overlap
        ranges = sorted(b.value_range for b in branches)
        for (l1, h1), (l2, h2) in zip(ranges, ranges[1:]):
            if l2 < h1:
                raise DegenerateError("ratio function is not invertible: branch ranges overlap")

    # -- inverse ----------------------------------------------------------
    def inverse(self, y: float) -> tuple[float, bool]:
        """Return ``(H, clamped)`` with ``phi(H) = y``.

        If ``y`` is outside the range of ``phi`` on the domain, the domain
        endpoint whose value is nearest to ``y`` is returned with
        ``clamped=True``.
        """
        if not np.isfinite(y):
            raise DegenerateError(f"cannot invert non-finite ratio {y}")
        for br in self.branches:
            lo_v, hi_v = br.value_range
            if lo_v <= y <= hi_v:
                return br.solve(y), False
        # outside every branch range: clamp
        best = None
        for br in self.branches:
            for h_end, v_end in br.endpoints():
                dist = abs(v_end - y)
                if best is None or dist < best[0]:
                    best = (dist, h_end)
        return float(best[1]), True

    def inverse_derivative(self, y: float, j: int = 1) -> float:
        """``j``-th derivative (1..3) of the inverse at ``y``."""
        if j not in (1, 2, 3):
            raise DomainError(f"inverse derivative order must be 1..3, got {j}")
        h, _ = self.inverse(y)
        return float(self.inverse_derivatives_at(h)[j - 1])

    def inverse_derivatives_at(self, H: float) -> np.ndarray:
        """Derivatives 1..3 of ``phi^{-1}`` evaluated at ``phi(H)``."""
        d = self.derivatives(H)
        if abs(d[1]) < 1e-10:
            raise DegenerateError(f"phi'(H) ~ 0 at H={H}: degenerate ratio")
        return inverse_derivatives(d)

    def psi_derivatives_at(self, H: float, weights=None, j_max: int = 3) -> np.ndarray:
        """``psi(y) = <w, Gamma^{phi^{-1}(y)}>`` and its y-derivatives at ``y = phi(H)``.

        ``weights`` defaults to the numerator vector ``a``.
        """
        if not 0 <= j_max <= 3:
            raise DomainError(f"j_max must be in 0..3, got {j_max}")
        w = self.a if weights is None else np.asarray(weights, dtype=float)
        G = gamma_derivatives(H, self.R, 3)
        f = G @ w  # d^k/dH^k <w, Gamma^H>
        if j_max == 0:
            return np.array([f[0]])
        g1, g2, g3 = self.inverse_derivatives_at(H)
        # Faa di Bruno for f(g(y)) with g = phi^{-1}
        out = np.array([
            f[0],
            f[1] * g1,
            f[2] * g1**2 + f[1] * g2,
            f[3] * g1**3 + 3 * f[2] * g1 * g2 + f[1] * g3,
        ])
        return out[: j_max + 1]


class _Branch:
    """A monotone piece of a ratio function between domain ends or poles."""

    def __init__(self, rf, left, right, grid, vals, sgn, left_pole, right_pole):
        self.rf = rf
        self.left = left
        self.right = right
        self.grid = grid
        self.vals = vals
        self.sgn = sgn
        self.left_pole = left_pole
        self.right_pole = right_pole
        # value at the non-pole ends
        self.v_left = -sgn * np.inf if left_pole else rf(left)
        self.v_right = sgn * np.inf if right_pole else rf(right)
        self.value_range = (min(self.v_left, self.v_right), max(self.v_left, self.v_right))

    def endpoints(self):
        if not self.left_pole:
            yield self.left, self.v_left
        if not self.right_pole:
            yield self.right, self.v_right

    def _bracket(self, y):
        # locate y among the grid values (monotone in sgn direction)
        v = self.vals * self.sgn
        k = np.searchsorted(v, y * self.sgn)
        pts = np.concatenate(([self.left], self.grid, [self.right]))
        return pts[k], pts[k + 1]

    def solve(self, y: float) -> float:
        rf = self.rf
        lo, hi = self._bracket(y)
        eps = 1e-15
        if lo == self.left and self.left_pole:
            lo = lo + max(eps, 1e-13 * abs(lo))
        if hi == self.right and self.right_pole:
            hi = hi - max(eps, 1e-13 * abs(hi))

        def f(h):
            return rf(h) - y

        flo, fhi = f(lo), f(hi)
        if flo == 0:
            return float(lo)
        if fhi == 0:
            return float(hi)
        if np.sign(flo) == np.sign(fhi):
            # y lies beyond the closest representable point to a pole
            return float(lo if abs(flo) < abs(fhi) else hi)
        return float(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


def phi(H: float, rf: RatioFunction) -> float:
    return rf(H)


def phi_inverse(y: float, rf: RatioFunction) -> tuple[float, bool]:
    return rf.inverse(y)


def phi_inverse_derivative(y: float, rf: RatioFunction, j: int = 1) -> float:
    return rf.inverse_derivative(y, j)


def psi_and_derivatives(y: float, rf: RatioFunction, weights=None, j_max: int = 3) -> np.ndarray:
    """``psi`` and its derivatives up to ``j_max`` at ``y``."""
    h, _ = rf.inverse(y)
    return rf.psi_derivatives_at(h, weights, j_max)
