"""Rolling-window estimation over consecutive trading days."""
from __future__ import annotations

from typing import Sequence

from .estimate import EstimationResult, WeightConfig, combined_from_stats
from .exceptions import InputError
from .simulate import PricePath
from .stats import VariationStats, variation_stats


def rolling_estimate(days: Sequence[PricePath], window: int = 20,
                     wc: WeightConfig | None = None) -> list[EstimationResult]:
    """One combined estimate per day from the ``window`` days ending on it.

    Variation statistics are summed over the window (so overnight returns
    never enter); H uses the whole window while C and Pi are reported for
    the last day only. Fewer than ``window`` days give an empty list.
    """
    if window < 1:
        raise InputError("window must be >= 1")
    wc = wc or WeightConfig.default()
    per_day: list[VariationStats] = []
    for d in days:
        per_day.append(variation_stats(d, wc.R, delta=d.delta, t=1.0))
    out = []
    for end in range(window - 1, len(per_day)):
        block = per_day[end - window + 1 : end + 1]
        total = block[0]
        for s in block[1:]:
            total = total + s
        out.append(combined_from_stats(total, wc, vs_last=block[-1]))
    return out
