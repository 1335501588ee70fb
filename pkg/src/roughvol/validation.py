"""Input checks shared by the estimator classes and the CLI."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array, check_scalar

from .exceptions import InputError


def check_paths(X, min_length: int = 3) -> np.ndarray:
    """Return ``X`` as a finite float array of shape ``(n_paths, n_obs)``.

    A 1-d input is one path.
    """
    try:
        arr = check_array(X, ensure_2d=False, dtype=np.float64, ensure_all_finite=True,
                          input_name="X")
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise InputError(f"expected 1-d or 2-d price paths, got {arr.ndim}-d")
    if arr.shape[1] < min_length:
        raise InputError(f"paths need at least {min_length} observations, got {arr.shape[1]}")
    return arr


def check_lag(R) -> int:
    try:
        return int(check_scalar(R, "R", numbers.Integral, min_val=1))
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def check_design_h(H0) -> float:
    try:
        return float(check_scalar(H0, "H0", numbers.Real, min_val=0.0, max_val=0.5,
                                  include_boundaries="neither"))
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def check_delta(delta, n_increments: int) -> float:
    """Grid spacing, defaulting to ``1 / n_increments`` (one unit of time per path)."""
    if delta is None:
        return 1.0 / n_increments
    try:
        return float(check_scalar(delta, "delta", numbers.Real, min_val=0.0, include_boundaries="neither"))
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc
