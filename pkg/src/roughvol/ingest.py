"""Tick CSV ingestion and previous-tick calendar sampling."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np

from .exceptions import InputError
from .simulate import PricePath

logger = logging.getLogger(__name__)

DEFAULT_SESSION = (9.5 * 3600.0, 16.0 * 3600.0)


@dataclass
class TickSeries:
    """Trades of one session; ``timestamps`` are seconds since the session open."""

    timestamps: np.ndarray
    prices: np.ndarray
    session: tuple[float, float] = DEFAULT_SESSION  # seconds after midnight
    date: str | None = None
    n_dropped: int = field(default=0, compare=False)
    n_duplicates: int = field(default=0, compare=False)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.prices = np.asarray(self.prices, dtype=float)
        if self.timestamps.shape != self.prices.shape or self.timestamps.ndim != 1:
            raise InputError("timestamps and prices must be 1-d arrays of equal length")
        if np.any(self.prices <= 0) or not np.all(np.isfinite(self.prices)):
            raise InputError("prices must be positive and finite")
        if self.timestamps.size and np.any(np.diff(self.timestamps) <= 0):
            raise InputError("timestamps must be strictly increasing")
        length = self.session[1] - self.session[0]
        if length <= 0:
            raise InputError("session close must be after session open")
        if self.timestamps.size and (self.timestamps[0] < 0 or self.timestamps[-1] > length):
            raise InputError("timestamps outside the session")

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def session_length(self) -> float:
        return self.session[1] - self.session[0]


def parse_clock(s: str) -> float:
    """``"HH:MM[:SS]"`` to seconds after midnight."""
    parts = s.strip().split(":")
    if not 2 <= len(parts) <= 3:
        raise InputError(f"bad clock time {s!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise InputError(f"bad clock time {s!r}") from exc
    h, m = vals[0], vals[1]
    sec = vals[2] if len(vals) == 3 else 0.0
    return 3600.0 * h + 60.0 * m + sec


def parse_session(spec: str) -> tuple[float, float]:
    """``"09:30-16:00"`` to a pair of seconds after midnight."""
    try:
        a, b = spec.split("-")
    except ValueError as exc:
        raise InputError(f"session must look like HH:MM-HH:MM, got {spec!r}") from exc
    return parse_clock(a), parse_clock(b)


def _parse_timestamp(raw: str, tz) -> tuple[str, float]:
    """Return (date, seconds after midnight) in wall-clock time."""
    raw = raw.strip()
    try:
        epoch = float(raw)
    except ValueError:
        dt = datetime.fromisoformat(raw)
    else:
        if not math.isfinite(epoch):
            raise ValueError("non-finite epoch")
        dt = datetime.fromtimestamp(epoch, tz=timezone.utc).astimezone(tz)
    midnight = dt.replace(hour=0, minute=0, second=0, microsecond=0)
    return dt.date().isoformat(), (dt - midnight).total_seconds()


def _read_rows(source) -> list[tuple[int, str, str]]:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip().lower() for h in next(reader)]
    except StopIteration:
        raise InputError("empty CSV") from None
    if header[:2] != ["timestamp", "price"]:
        raise InputError(f"expected header 'timestamp,price', got {','.join(header)!r}")
    return [(i, *row[:2]) if len(row) >= 2 else (i, "", "") for i, row in enumerate(reader, start=2) if row]


def ingest_csv(source, session: tuple[float, float] = DEFAULT_SESSION, tz: str = "UTC",
               by_day: bool = False):
    """Parse a ``timestamp,price`` CSV into session-filtered tick series.

    Timestamps are ISO-8601 (wall-clock time as written) or epoch seconds
    (converted to wall-clock time in ``tz``). Rows outside the session are
    dropped, and for repeated timestamps the last row wins. With
    ``by_day=False`` the file must hold a single date.
    """
    zone = ZoneInfo(tz)
    bad: list[int] = []
    per_day: dict[str, dict[float, float]] = {}
    dropped: dict[str, int] = {}
    dup: dict[str, int] = {}
    for line, ts_raw, px_raw in _read_rows(source):
        try:
            date, sec = _parse_timestamp(ts_raw, zone)
            price = float(px_raw)
        except (ValueError, OverflowError):
            bad.append(line)
            continue
        if not math.isfinite(price):
            bad.append(line)
            continue
        if price <= 0:
            raise InputError(f"nonpositive price {price} on line {line}")
        if not session[0] <= sec <= session[1]:
            dropped[date] = dropped.get(date, 0) + 1
            continue
        day = per_day.setdefault(date, {})
        if sec - session[0] in day:
            dup[date] = dup.get(date, 0) + 1
        day[sec - session[0]] = price
    if bad:
        shown = ", ".join(map(str, bad[:20])) + (" ..." if len(bad) > 20 else "")
        raise InputError(f"unparseable rows on lines {shown}")
    if not per_day:
        raise InputError("no in-session observations")
    out = []
    for date in sorted(per_day):
        ticks = per_day[date]
        t = np.array(sorted(ticks))
        p = np.array([ticks[x] for x in t])
        ts = TickSeries(t, p, session, date, dropped.get(date, 0), dup.get(date, 0))
        if ts.n_dropped:
            logger.info("%s: dropped %d out-of-session rows", date, ts.n_dropped)
        out.append(ts)
    if by_day:
        return out
    if len(out) > 1:
        raise InputError(f"file spans {len(out)} dates; use by_day=True")
    return out[0]


def calendar_sample(ts: TickSeries, step_seconds: float) -> PricePath:
    """Previous-tick log-prices on a grid of ``step_seconds`` over the session.

    Grid points before the first trade have no price and are left out, so
    the path starts at the first covered grid point. Flat stretches give
    zero increments, which are kept. ``delta`` is the step as a fraction of
    the session, so one session has unit length.
    """
    if not step_seconds > 0:
        raise InputError("step must be positive")
    length = ts.session_length
    n_steps = int(math.floor(length / step_seconds + 1e-9))
    grid = np.arange(n_steps + 1) * step_seconds
    idx = np.searchsorted(ts.timestamps, grid, side="right") - 1
    valid = idx >= 0
    if valid.sum() < 2:
        raise InputError("fewer than two grid points covered by trades")
    logp = np.log(ts.prices[idx[valid]])
    delta = step_seconds / length
    return PricePath(values=logp, delta=delta, days=(logp.size - 1) * delta)
