"""Choice of weight vectors by minimizing the asymptotic variance of the
integrated-volatility estimator.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from .asymvar import var_c_thm3, var_ladder
from .exceptions import DegenerateError, DomainError, RoughVolError
from .kernel import gamma_h_derivative, gamma_vector

logger = logging.getLogger(__name__)

Track = Literal["lag0", "no_lag0"]
WEIGHTS_ENV = "ROUGHVOL_WEIGHTS_DIR"


def _normalize(v: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm < 1e-300:
        raise DegenerateError("zero-norm weight vector")
    return v / nrm


def _gram_schmidt_pair(G: np.ndarray, dG: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b = _normalize(dG)
    a = _normalize(G - (G @ b) * b)
    return a, b


def initial_weights(H0: float = 0.35, R: int = 60) -> dict[str, np.ndarray]:
    """Heuristic starting weights: ``b`` along the H-derivative of the kernel,
    ``a = c`` the normalized kernel component orthogonal to ``b``.

    The ``*0`` variants are built the same way from vectors whose first
    component has been zeroed.
    """
    if not 0 < H0 < 0.5:
        raise DomainError(f"H0 must lie in (0, 1/2), got {H0}")
    if R < 1:
        raise DomainError("R must be >= 1")
    G = gamma_vector(H0, R)
    dG = gamma_h_derivative(H0, np.arange(R + 1), 1)
    a, b = _gram_schmidt_pair(G, dG)
    G0 = G.copy()
    G0[0] = 0.0
    a0, b0 = _gram_schmidt_pair(G0, dG)  # dG[0] = 0 already
    return {"a": a, "b": b, "c": a.copy(), "a0": a0, "b0": b0, "c0": a.copy()}


# ---------------------------------------------------------------------------
# Nelder-Mead


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_eval: int
    converged: bool


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    init,
    tol: float = 1e-8,
    max_iter: int | None = None,
    initial_step: float = 0.05,
) -> NelderMeadResult:
    """Downhill simplex with reflection 1, expansion 2, contraction 0.5, shrink 0.5.

    Stops once both the simplex diameter and the spread of vertex values
    fall below ``tol``, or after ``max_iter`` iterations (default ``200*d``).
    Non-finite objective values are treated as +inf, which makes the
    simplex contract away from them; a non-finite value at ``init`` aborts.
    """
    x0 = np.asarray(init, dtype=float).ravel()
    d = x0.size
    chi, gam, sig = 2.0, 0.5, 0.5
    if max_iter is None:
        max_iter = 200 * d
    n_eval = 0

    def f(x):
        nonlocal n_eval
        n_eval += 1
        try:
            v = float(objective(x))
        except (ArithmeticError, ValueError):
            return np.inf
        return v if np.isfinite(v) else np.inf

    f0 = f(x0)
    if not np.isfinite(f0):
        raise RoughVolError("objective is not finite at the initial point")
    simplex = np.empty((d + 1, d))
    simplex[0] = x0
    for i in range(d):
        v = x0.copy()
        v[i] = v[i] + initial_step if v[i] == 0 else v[i] * (1 + initial_step)
        simplex[i + 1] = v
    fvals = np.empty(d + 1)
    fvals[0] = f0
    for i in range(1, d + 1):
        fvals[i] = f(simplex[i])

    it = 0
    converged = False
    while it < max_iter:
        order = np.argsort(fvals, kind="stable")
        simplex = simplex[order]
        fvals = fvals[order]
        diam = np.max(np.abs(simplex[1:] - simplex[0]))
        spread = fvals[-1] - fvals[0] if np.isfinite(fvals[-1]) else np.inf
        if diam <= tol and spread <= tol:
            converged = True
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        if fr < fvals[0]:
            xe = centroid + chi * (centroid - worst)
            fe = f(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + gam * (xr - centroid)  # outside contraction
            fc = f(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + gam * (worst - centroid)  # inside contraction
            fc = f(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        # shrink towards the best vertex
        simplex[1:] = simplex[0] + sig * (simplex[1:] - simplex[0])
        for i in range(1, d + 1):
            fvals[i] = f(simplex[i])
    best = int(np.argmin(fvals))
    if not np.isfinite(fvals[best]):
        raise RoughVolError("objective non-finite at every simplex vertex")
    return NelderMeadResult(simplex[best].copy(), float(fvals[best]), it, n_eval, converged)


# ---------------------------------------------------------------------------
# weight optimization


@dataclass
class WeightSet:
    """Weight vectors for both estimation tracks."""

    R: int
    H0: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    a0: np.ndarray
    b0: np.ndarray
    c0: np.ndarray
    optimized: dict = field(default_factory=dict)
    objective: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"R": self.R, "H0": self.H0, "optimized": self.optimized, "objective": self.objective}
        for k in ("a", "b", "c", "a0", "b0", "c0"):
            out[k] = [float(x) for x in getattr(self, k)]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "WeightSet":
        vecs = {k: np.asarray(d[k], dtype=float) for k in ("a", "b", "c", "a0", "b0", "c0")}
        return cls(R=int(d["R"]), H0=float(d["H0"]), optimized=d.get("optimized", {}),
                   objective=d.get("objective", {}), **vecs)


def _objective_lag0(R, H, m):
    def obj(a, b, c):
        return var_ladder(R, a, b, c, H, m=m).var_c
    return obj


def _objective_no_lag0(R, H):
    def obj(a, b, c):
        return var_c_thm3(R, a, b, c, H)
    return obj


def track_objective(track: Track, R: int, H: float, m: int = 50):
    if track == "lag0":
        return _objective_lag0(R, H, m)
    if track == "no_lag0":
        return _objective_no_lag0(R, H)
    raise DomainError(f"unknown track {track!r}")


@dataclass
class OptimizedWeights:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    value: float
    initial_value: float
    optimized: bool
    n_eval: int = 0


def optimize_weights(
    H0: float = 0.35,
    R: int = 60,
    track: Track = "lag0",
    m: int = 50,
    tol: float = 1e-8,
    max_iter: int | None = None,
    init: dict | None = None,
) -> OptimizedWeights:
    """Locally minimize the integrated-volatility variance over ``(a, b, c)``.

    Only free coordinates are searched: ``b[0]`` is pinned to 0 on the lag-0
    track, and ``a[0] = b[0] = 0`` on the no-lag-0 track. The result never
    has a larger objective than the starting point.
    """
    w0 = init if init is not None else initial_weights(H0, R)
    if track == "lag0":
        a_init, b_init, c_init = w0["a"], w0["b"], w0["c"]
        fixed = {"a": [], "b": [0]}
    else:
        a_init, b_init, c_init = w0["a0"], w0["b0"], w0["c0"]
        fixed = {"a": [0], "b": [0]}
    n = R + 1
    free = {
        "a": np.setdiff1d(np.arange(n), fixed["a"]),
        "b": np.setdiff1d(np.arange(n), fixed["b"]),
        "c": np.arange(n),
    }
    obj3 = track_objective(track, R, H0, m)

    def unpack(x):
        vecs = {}
        pos = 0
        for name, base in (("a", a_init), ("b", b_init), ("c", c_init)):
            v = np.zeros(n)
            k = free[name].size
            v[free[name]] = x[pos : pos + k]
            pos += k
            vecs[name] = v
        return vecs["a"], vecs["b"], vecs["c"]

    x0 = np.concatenate([np.asarray(v, dtype=float)[free[k]] for k, v in (("a", a_init), ("b", b_init), ("c", c_init))])

    def obj(x):
        return obj3(*unpack(x))

    f_init = obj(x0)
    try:
        res = nelder_mead(obj, x0, tol=tol, max_iter=max_iter)
    except RoughVolError as exc:
        logger.warning("weight optimization aborted: %s", exc)
        a, b, c = unpack(x0)
        return OptimizedWeights(a, b, c, f_init, f_init, optimized=False)
    if res.fun <= f_init:
        a, b, c = unpack(res.x)
        value = res.fun
    else:
        a, b, c = unpack(x0)
        value = f_init
    # scale-free objective: report unit-norm vectors
    return OptimizedWeights(a / np.linalg.norm(a), b / np.linalg.norm(b), c / np.linalg.norm(c),
                            value, f_init, optimized=True, n_eval=res.n_eval)


def weights_dir() -> Path:
    return Path(os.environ.get(WEIGHTS_ENV, Path.home() / ".cache" / "roughvol"))


def cache_key(R: int, H0: float, track: str) -> str:
    return f"weights_R{R}_H{H0:.4f}_{track}.json"


def tuned_weight_set(H0: float = 0.35, R: int = 60, m: int = 50, use_cache: bool = True,
                     optimize: bool = True, max_iter: int | None = None) -> WeightSet:
    """Weights for both tracks, optimized and cached as JSON under ``weights_dir()``."""
    init = initial_weights(H0, R)
    if not optimize:
        return WeightSet(R=R, H0=H0, **init, optimized={"lag0": False, "no_lag0": False})
    out = dict(init)
    flags, objective = {}, {}
    for track in ("lag0", "no_lag0"):
        path = weights_dir() / cache_key(R, H0, track)
        rec = None
        if use_cache and path.exists():
            rec = json.loads(path.read_text())
        if rec is None:
            res = optimize_weights(H0, R, track, m=m, max_iter=max_iter, init=init)
            rec = {"a": res.a.tolist(), "b": res.b.tolist(), "c": res.c.tolist(),
                   "value": res.value, "initial_value": res.initial_value, "optimized": res.optimized}
            if use_cache:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(json.dumps(rec, indent=2))
        suffix = "" if track == "lag0" else "0"
        for k in ("a", "b", "c"):
            out[k + suffix] = np.asarray(rec[k], dtype=float)
        flags[track] = bool(rec["optimized"])
        objective[track] = float(rec["value"])
    return WeightSet(R=R, H0=H0, optimized=flags, objective=objective, **out)
