"""Exact simulation of mixed fractional Brownian motion paths.

Fractional Gaussian noise is drawn by circulant embedding of its Toeplitz
covariance (Davies-Harte). A Cholesky sampler is kept as a slow reference.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np

from .exceptions import DegenerateError, InputError
from .kernel import gamma

NoiseKind = Literal["fbm", "white", "none"]


@dataclass
class SimConfig:
    H: float = 0.3
    sigma: float = 0.01
    rho: float = 0.001
    drift: float = 0.0
    n: int = 23400
    days: int = 1
    seed: int = 0
    noise_kind: NoiseKind = "fbm"
    # optional piecewise-constant volatilities, one value per day
    sigma_path: Sequence[float] | None = None
    rho_path: Sequence[float] | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n < 2:
            raise InputError("n must be >= 2")
        if self.days < 1:
            raise InputError("days must be >= 1")
        if self.sigma < 0 or self.rho < 0:
            raise InputError("sigma and rho must be non-negative")
        if self.noise_kind not in ("fbm", "white", "none"):
            raise InputError(f"unknown noise_kind {self.noise_kind!r}")
        if self.noise_kind == "fbm" and not 0 < self.H < 1:
            raise InputError("H must lie in (0, 1) for fbm noise")
        for name in ("sigma_path", "rho_path"):
            v = getattr(self, name)
            if v is not None:
                if len(v) != self.days or min(v) < 0:
                    raise InputError(f"{name} needs {self.days} non-negative values")

    @property
    def delta(self) -> float:
        return 1.0 / self.n

    def effective_rho(self) -> float:
        return 0.0 if self.noise_kind == "none" else self.rho

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("sigma_path", "rho_path"):
            if d[k] is not None:
                d[k] = list(map(float, d[k]))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InputError(f"unknown SimConfig fields: {sorted(extra)}")
        return cls(**d)


@dataclass
class PricePath:
    """Log-prices on a uniform grid ``0, delta, 2 delta, ...``."""

    values: np.ndarray = field(repr=False)
    delta: float
    days: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.delta

    def scaled(self, lam: float) -> "PricePath":
        return PricePath(self.values * lam, self.delta, self.days)

    def split_days(self, n_per_day: int) -> list["PricePath"]:
        """Per-day sub-paths sharing their boundary observations."""
        out = []
        n_days = (self.values.size - 1) // n_per_day
        for d in range(n_days):
            out.append(PricePath(self.values[d * n_per_day : (d + 1) * n_per_day + 1], self.delta, 1.0))
        return out


def seed_streams(seed: int, k: int) -> list[np.random.Generator]:
    """``k`` independent generators deterministically derived from ``seed``."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1))
    return [np.random.default_rng(s) for s in ss.spawn(k)]


def fgn_eigenvalues(H: float, n_total: int) -> np.ndarray:
    """Eigenvalues of the circulant embedding of the unit fGn covariance."""
    r = np.arange(n_total + 1)
    g = gamma(H, r)
    row = np.concatenate((g, g[-2:0:-1]))  # length 2 n_total
    lam = np.fft.rfft(row).real
    return lam


def fbm_increments(H: float, n_total: int, delta: float, seed=None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Stationary increments of standard fBM on a grid of spacing ``delta``.

    Each increment has variance ``delta**(2H)`` and lag-r correlation
    ``gamma(H, r)``.
    """
    if not 0 < H < 1:
        raise InputError(f"H must lie in (0, 1), got {H}")
    if n_total < 1:
        raise InputError("n_total must be >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    scale = delta**H
    if H == 0.5:
        return scale * rng.standard_normal(n_total)
    lam = fgn_eigenvalues(H, n_total)
    if lam.min() < -1e-10 * lam.max():
        raise DegenerateError(f"negative circulant eigenvalue {lam.min():.3e} for H={H}")
    lam = np.clip(lam, 0.0, None)
    m = 2 * n_total
    # complex Gaussian with Hermitian symmetry, built directly in rfft layout
    w = np.empty(n_total + 1, dtype=complex)
    z = rng.standard_normal(m)
    w[0] = z[0] * np.sqrt(lam[0])
    w[-1] = z[1] * np.sqrt(lam[-1])
    w[1:-1] = (z[2 : n_total + 1] + 1j * z[n_total + 1 :]) * np.sqrt(lam[1:-1] / 2.0)
    x = np.fft.irfft(w, n=m) * np.sqrt(m)
    return scale * x[:n_total]


def fbm_increments_cholesky(H: float, n_total: int, delta: float, seed=None) -> np.ndarray:
    """Reference sampler, O(n^3); only for small ``n_total``."""
    if n_total > 4096:
        raise InputError("Cholesky reference sampler limited to n_total <= 4096")
    rng = np.random.default_rng(seed)
    g = gamma(H, np.arange(n_total))
    idx = np.abs(np.arange(n_total)[:, None] - np.arange(n_total)[None, :])
    L = np.linalg.cholesky(g[idx])
    return delta**H * (L @ rng.standard_normal(n_total))


def _per_day_scale(values: Sequence[float] | None, n: int, days: int) -> np.ndarray | float:
    if values is None:
        return 1.0
    return np.repeat(np.asarray(values, dtype=float), n)


def simulate_mixed(cfg: SimConfig) -> PricePath:
    """``Y = drift t + sigma B + rho N`` with ``N`` fBM, white noise or absent."""
    cfg.validate()
    n_total = cfg.n * cfg.days
    delta = cfg.delta
    rng_b, rng_n = seed_streams(cfg.seed, 2)
    sig = cfg.sigma * _per_day_scale(cfg.sigma_path, cfg.n, cfg.days) if cfg.sigma_path is not None else cfg.sigma
    dB = np.sqrt(delta) * rng_b.standard_normal(n_total)
    dY = cfg.drift * delta + sig * dB
    rho = cfg.effective_rho()
    if rho > 0 or cfg.rho_path is not None:
        rho_scale = _per_day_scale(cfg.rho_path, cfg.n, cfg.days) if cfg.rho_path is not None else 1.0
        if cfg.noise_kind == "fbm":
            dN = fbm_increments(cfg.H, n_total, delta, rng=rng_n)
            dY = dY + rho * rho_scale * dN
        elif cfg.noise_kind == "white":
            eps = rng_n.standard_normal(n_total + 1)
            level = rho * (np.concatenate(([1.0], np.atleast_1d(rho_scale) * np.ones(n_total))))
            dY = dY + np.diff(level * eps)
    values = np.concatenate(([0.0], np.cumsum(dY)))
    return PricePath(values=values, delta=delta, days=float(cfg.days))


def write_path_csv(path: PricePath, fh) -> None:
    fh.write("time,logprice\n")
    for t, v in zip(path.times, path.values):
        fh.write(f"{float(t)!r},{float(v)!r}\n")


def write_sidecar(cfg: SimConfig, fh) -> None:
    json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)


def read_path_csv(fh) -> PricePath:
    """Inverse of :func:`write_path_csv`; the time column must be a uniform grid."""
    header = fh.readline().strip().replace(" ", "").lower()
    if header != "time,logprice":
        raise InputError(f"expected header 'time,logprice', got {header!r}")
    t, y, bad = [], [], []
    for line_no, line in enumerate(fh, start=2):
        if not line.strip():
            continue
        try:
            a, b = line.split(",")[:2]
            t.append(float(a))
            y.append(float(b))
        except ValueError:
            bad.append(line_no)
    if bad:
        raise InputError(f"unparseable rows on lines {', '.join(map(str, bad[:20]))}")
    if len(y) < 2:
        raise InputError("a path needs at least two observations")
    times = np.asarray(t)
    steps = np.diff(times)
    delta = float(steps[0])
    if delta <= 0 or np.max(np.abs(steps - delta)) > 1e-9 * max(1.0, abs(times[-1])):
        raise InputError("time column is not a uniform increasing grid")
    values = np.asarray(y)
    if not np.all(np.isfinite(values)):
        raise InputError("non-finite log-price")
    return PricePath(values=values, delta=delta, days=float(times[-1] - times[0]))
