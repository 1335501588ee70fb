"""Monte Carlo harness for the simulation study.

Every replication draws its own seed from ``(master_seed, cell, rep)``, and
results are reduced in replication order, so a report depends only on the
master seed and the grid, not on the number of workers.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimate import (EstimationResult, WeightConfig, combined_from_stats, daily_stats, debias_ladder,
                       no_lag0_estimate)
from .exceptions import InputError, RoughVolError
from .simulate import SimConfig, simulate_mixed
from .stats import h_acf, h_dms, signature_slope

logger = logging.getLogger(__name__)

VARIANTS = ("no_lag0", "lag0", "lag0_n0", "lag0_n1", "lag0_n2", "lag0_n3",
            "combined", "h_vs", "h_dms", "h_acf")


def replication_seed(master_seed: int, cell: int, rep: int) -> int:
    ss = np.random.SeedSequence([int(master_seed) & ((1 << 64) - 1), cell, rep])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def expand_grid(base: dict, grid: dict | None = None) -> list[SimConfig]:
    """Cartesian product of ``grid`` values over ``base``, keys in sorted order."""
    grid = grid or {}
    keys = sorted(grid)
    out = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        out.append(SimConfig.from_dict({**base, **dict(zip(keys, combo))}))
    return out


def true_values(cfg: SimConfig) -> tuple[float, float, float]:
    """(H, C, Pi) of the last simulated day."""
    if cfg.noise_kind == "white":
        H = 0.0
    elif cfg.noise_kind == "none":
        H = 0.5
    else:
        H = cfg.H
    sig = cfg.sigma * (cfg.sigma_path[-1] if cfg.sigma_path is not None else 1.0)
    rho = cfg.effective_rho() * (cfg.rho_path[-1] if cfg.rho_path is not None else 1.0)
    return H, sig**2, rho**2


def _pack(res: EstimationResult) -> tuple:
    return (res.h, res.c_integrated, res.pi_integrated, *res.h_ci, *res.c_ci, *res.pi_ci,
            float(res.iterations_used))


def _apply(variant: str, path, cfg: SimConfig, wc: WeightConfig, stats) -> tuple:
    total, last = stats
    if variant == "no_lag0":
        return _pack(no_lag0_estimate(total, wc, vs_last=last))
    if variant == "lag0":
        return _pack(debias_ladder(total, wc.with_options(n_fixed=None), vs_last=last))
    if variant.startswith("lag0_n"):
        return _pack(debias_ladder(total, wc.with_options(n_fixed=int(variant[-1])), vs_last=last))
    if variant == "combined":
        return _pack(combined_from_stats(total, wc, vs_last=last))
    nan = (math.nan,) * 9
    if variant == "h_vs":
        return (signature_slope(path).h, *nan)
    if variant == "h_dms":
        return (h_dms(path), *nan)
    if variant == "h_acf":
        return (h_acf(total), *nan)
    raise InputError(f"unknown variant {variant!r}")


_worker_wc: WeightConfig | None = None


def _init_worker(wc_dict: dict) -> None:
    global _worker_wc
    _worker_wc = WeightConfig.from_dict(wc_dict)


def _replicate(task) -> list:
    cfg_dict, seed, variants = task
    cfg = SimConfig.from_dict({**cfg_dict, "seed": seed})
    wc = _worker_wc
    path = simulate_mixed(cfg)
    try:
        stats = daily_stats(path, wc.R, cfg.n)
    except (RoughVolError, ArithmeticError, ValueError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return [((math.nan,) * 10, msg) for _ in variants]
    out = []
    for v in variants:
        try:
            out.append((_apply(v, path, cfg, wc, stats), None))
        except (RoughVolError, ArithmeticError, ValueError) as exc:
            out.append(((math.nan,) * 10, f"{type(exc).__name__}: {exc}"))
    return out


@dataclass
class CellStats:
    """Summary of one (configuration, variant) cell."""

    config_index: int
    variant: str
    reps: int
    failed: int
    h_true: float
    h_mean: float
    h_bias: float
    h_sd: float
    h_rmse: float
    h_mcse: float
    h_coverage: float
    c_true: float
    c_bias: float
    c_rmse: float
    c_coverage: float
    pi_true: float
    pi_bias: float
    pi_rmse: float
    pi_coverage: float


def _summ(x: np.ndarray, truth: float) -> tuple[float, float, float, float, float]:
    """mean, bias, sd, rmse, Monte Carlo standard error of the mean."""
    if x.size == 0:
        return (math.nan,) * 5
    mean = float(np.mean(x))
    err = x - truth
    rmse = math.sqrt(float(np.mean(err**2)))
    sd = float(np.std(x))
    return mean, mean - truth, sd, rmse, sd / math.sqrt(x.size)


def _coverage(lo: np.ndarray, hi: np.ndarray, truth: float) -> float:
    ok = np.isfinite(lo) & np.isfinite(hi)
    if not ok.any():
        return math.nan
    return float(np.mean((lo[ok] <= truth) & (truth <= hi[ok])))


def summarize_cell(idx: int, variant: str, cfg: SimConfig, est: np.ndarray) -> CellStats:
    """``est`` has one row per replication: h, c, pi, the three interval pairs and
    the number of ladder iterations."""
    H, C, P = true_values(cfg)
    good = np.isfinite(est[:, 0])
    e = est[good]
    h_mean, h_bias, h_sd, h_rmse, h_mcse = _summ(e[:, 0], H)
    # volatility RMSEs use estimates clamped at zero
    _, c_bias, _, c_rmse, _ = _summ(np.maximum(e[:, 1], 0.0), C) if np.isfinite(e[:, 1]).all() else (math.nan,) * 5
    _, p_bias, _, p_rmse, _ = _summ(np.maximum(e[:, 2], 0.0), P) if np.isfinite(e[:, 2]).all() else (math.nan,) * 5
    return CellStats(idx, variant, int(est.shape[0]), int((~good).sum()), H, h_mean, h_bias, h_sd, h_rmse,
                     h_mcse, _coverage(e[:, 3], e[:, 4], H), C, c_bias, c_rmse,
                     _coverage(e[:, 5], e[:, 6], C), P, p_bias, p_rmse, _coverage(e[:, 7], e[:, 8], P))


@dataclass
class McReport:
    master_seed: int
    configs: list[SimConfig]
    variants: tuple[str, ...]
    reps: int
    cells: list[CellStats]
    seeds: list[list[int]] = field(repr=False)
    estimates: dict = field(repr=False)  # (config_index, variant) -> (reps, 10) array
    errors: dict = field(default_factory=dict, repr=False)

    def cell(self, config_index: int, variant: str) -> CellStats:
        for c in self.cells:
            if c.config_index == config_index and c.variant == variant:
                return c
        raise KeyError((config_index, variant))

    def rmse_difference(self, config_index: int, va: str, vb: str) -> tuple[float, float]:
        """``RMSE(va) - RMSE(vb)`` and its standard error from paired replications."""
        H = true_values(self.configs[config_index])[0]
        ea = self.estimates[(config_index, va)][:, 0] - H
        eb = self.estimates[(config_index, vb)][:, 0] - H
        ok = np.isfinite(ea) & np.isfinite(eb)
        ea, eb = ea[ok], eb[ok]
        ra = math.sqrt(np.mean(ea**2))
        rb = math.sqrt(np.mean(eb**2))
        # delta method on the paired squared errors
        g = ea**2 / (2 * ra) - eb**2 / (2 * rb)
        return ra - rb, float(np.std(g, ddof=1) / math.sqrt(g.size))

    CSV_FIELDS = ("config", "H", "sigma", "rho", "n", "days", "noise_kind", "variant", "reps", "failed",
                  "h_true", "h_mean", "h_bias", "h_sd", "h_rmse", "h_mcse", "h_coverage",
                  "c_true", "c_bias", "c_rmse", "c_coverage", "pi_true", "pi_bias", "pi_rmse", "pi_coverage")

    def csv_lines(self) -> list[str]:
        lines = [",".join(self.CSV_FIELDS)]
        for c in self.cells:
            cfg = self.configs[c.config_index]
            row = [c.config_index, cfg.H, cfg.sigma, cfg.rho, cfg.n, cfg.days, cfg.noise_kind, c.variant,
                   c.reps, c.failed, c.h_true, c.h_mean, c.h_bias, c.h_sd, c.h_rmse, c.h_mcse,
                   c.h_coverage, c.c_true, c.c_bias, c.c_rmse, c.c_coverage, c.pi_true, c.pi_bias,
                   c.pi_rmse, c.pi_coverage]
            lines.append(",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in row))
        return lines

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "reps": self.reps,
            "variants": list(self.variants),
            "configs": [c.to_dict() for c in self.configs],
            "seeds": self.seeds,
            "cells": [vars(c) for c in self.cells],
            "errors": {f"{k[0]}:{k[1]}": v for k, v in sorted(self.errors.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def monte_carlo(configs: Sequence[SimConfig], variants: Sequence[str] = ("no_lag0", "lag0_n3"),
                reps: int = 500, master_seed: int = 0, threads: int = 1,
                wc: WeightConfig | None = None, seeds: Sequence[Sequence[int]] | None = None) -> McReport:
    """Replicate every configuration ``reps`` times and summarize each variant.

    All variants of a replication see the same simulated path, which makes
    paired comparisons between variants possible. ``seeds`` overrides the
    derived per-replication seeds. A failed estimate is recorded in its
    cell and does not stop the run.
    """
    if reps < 2:
        raise InputError("reps must be >= 2")
    for v in variants:
        if v not in VARIANTS:
            raise InputError(f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
    wc = wc or WeightConfig.default()
    configs = list(configs)
    if seeds is None:
        seeds = [[replication_seed(master_seed, i, r) for r in range(reps)] for i in range(len(configs))]
    else:
        seeds = [list(map(int, s)) for s in seeds]
        if len(seeds) != len(configs) or any(len(s) != reps for s in seeds):
            raise InputError("seeds must give one list of reps seeds per configuration")
    tasks = [(cfg.to_dict(), seeds[i][r], tuple(variants)) for i, cfg in enumerate(configs) for r in range(reps)]
    if threads <= 1:
        _init_worker(wc.to_dict())
        results = [_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker,
                                 initargs=(wc.to_dict(),)) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    estimates, errors, cells = {}, {}, []
    for i, cfg in enumerate(configs):
        block = results[i * reps : (i + 1) * reps]
        for j, v in enumerate(variants):
            arr = np.array([b[j][0] for b in block], dtype=float)
            msgs = [b[j][1] for b in block if b[j][1] is not None]
            if msgs:
                errors[(i, v)] = msgs
            estimates[(i, v)] = arr
            cells.append(summarize_cell(i, v, cfg, arr))
    return McReport(int(master_seed), configs, tuple(variants), reps, cells, seeds, estimates, errors)
