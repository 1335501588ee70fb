import io
import math

import numpy as np
import pytest

from roughvol.estimate import WeightConfig, no_lag0_estimate
from roughvol.exceptions import InputError
from roughvol.ingest import DEFAULT_SESSION, TickSeries, calendar_sample, ingest_csv, parse_clock, parse_session
from roughvol.simulate import SimConfig, read_path_csv, simulate_mixed, write_path_csv
from roughvol.stats import variation_stats


def csv_of(rows):
    return io.StringIO("timestamp,price\n" + "".join(f"{t},{p}\n" for t, p in rows))


def test_two_rows_in_session():
    ts = ingest_csv(csv_of([("2019-03-01T09:30:00", 10.0), ("2019-03-01T09:30:05", 10.5)]))
    assert len(ts) == 2
    assert ts.timestamps.tolist() == [0.0, 5.0]
    assert ts.date == "2019-03-01"


def test_out_of_session_row_dropped():
    ts = ingest_csv(csv_of([("2019-03-01T09:00:00", 9.0), ("2019-03-01T10:00:00", 10.0),
                            ("2019-03-01T11:00:00", 11.0), ("2019-03-01T16:30:00", 12.0)]))
    assert len(ts) == 2 and ts.n_dropped == 2


def test_nonpositive_price_is_fatal():
    with pytest.raises(InputError, match="line 3"):
        ingest_csv(csv_of([("2019-03-01T10:00:00", 10.0), ("2019-03-01T10:00:01", 0.0)]))


def test_unparseable_rows_listed():
    with pytest.raises(InputError, match="2, 4"):
        ingest_csv(csv_of([("noon", 10.0), ("2019-03-01T10:00:00", 10.0), ("2019-03-01T10:00:01", "abc")]))


def test_bad_header_and_empty():
    with pytest.raises(InputError):
        ingest_csv(io.StringIO("time,px\n1,2\n"))
    with pytest.raises(InputError):
        ingest_csv(io.StringIO(""))
    with pytest.raises(InputError):
        ingest_csv(csv_of([("2019-03-01T08:00:00", 10.0)]))


def test_duplicates_keep_last_and_sorting():
    ts = ingest_csv(csv_of([("2019-03-01T10:00:05", 11.0), ("2019-03-01T10:00:00", 10.0),
                            ("2019-03-01T10:00:05", 12.0)]))
    assert ts.timestamps.tolist() == [1800.0, 1805.0]
    assert ts.prices.tolist() == [10.0, 12.0]
    assert ts.n_duplicates == 1


def test_epoch_timestamps_with_zone():
    # 2019-03-01 15:00:00 UTC is 10:00 in New York
    epoch = 1551452400
    ts = ingest_csv(csv_of([(epoch, 10.0), (epoch + 1, 10.1)]), tz="America/New_York")
    assert ts.timestamps[0] == 1800.0
    # the UTC reading of the same instant would be 15:00, inside the session as well
    ts_utc = ingest_csv(csv_of([(epoch, 10.0), (epoch + 1, 10.1)]), tz="UTC")
    assert ts_utc.timestamps[0] == 15 * 3600 - DEFAULT_SESSION[0]


def test_multiple_dates():
    rows = [("2019-03-01T10:00:00", 10.0), ("2019-03-02T10:00:00", 11.0)]
    with pytest.raises(InputError):
        ingest_csv(csv_of(rows))
    days = ingest_csv(csv_of(rows), by_day=True)
    assert [d.date for d in days] == ["2019-03-01", "2019-03-02"]


def test_custom_session():
    assert parse_session("09:00-16:00") == (32400.0, 57600.0)
    assert parse_clock("09:30:15") == 34215.0
    ts = ingest_csv(csv_of([("2019-03-01T09:10:00", 10.0)]), session=parse_session("09:00-16:00"))
    assert ts.timestamps.tolist() == [600.0]
    for bad in ("9-16", "0930-1600", "09:30"):
        with pytest.raises(InputError):
            parse_session(bad)


def test_tick_series_invariants():
    with pytest.raises(InputError):
        TickSeries([0.0, 1.0], [1.0, -1.0])
    with pytest.raises(InputError):
        TickSeries([1.0, 1.0], [1.0, 2.0])
    with pytest.raises(InputError):
        TickSeries([0.0, 1e9], [1.0, 2.0])


# --- calendar sampling -------------------------------------------------------

def test_previous_tick_rule():
    ts = TickSeries([0.0, 10.0], [100.0, 110.0], session=(0.0, 10.0))
    p = calendar_sample(ts, 5.0)
    assert np.allclose(p.values, np.log([100.0, 100.0, 110.0]))
    assert p.delta == 0.5


def test_leading_points_without_ticks_excluded():
    ts = TickSeries([7.0, 12.0], [100.0, 110.0], session=(0.0, 20.0))
    p = calendar_sample(ts, 5.0)
    # grid 0 and 5 precede the first trade
    assert np.allclose(p.values, np.log([100.0, 110.0, 110.0]))


def test_flat_prices_give_zero_increments():
    ts = TickSeries([0.0, 3.0, 9.0], [50.0, 50.0, 50.0], session=(0.0, 20.0))
    p = calendar_sample(ts, 5.0)
    assert len(p) == 5 and not np.diff(p.values).any()


def test_sampling_errors():
    ts = TickSeries([19.0], [50.0], session=(0.0, 20.0))
    with pytest.raises(InputError):
        calendar_sample(ts, 5.0)
    with pytest.raises(InputError):
        calendar_sample(ts, 0.0)


# --- round trips -------------------------------------------------------------

def test_path_csv_roundtrip_estimate():
    path = simulate_mixed(SimConfig(n=4680, seed=4))
    buf = io.StringIO()
    write_path_csv(path, buf)
    back = read_path_csv(io.StringIO(buf.getvalue()))
    wc = WeightConfig.default()
    a = no_lag0_estimate(variation_stats(path, 60), wc)
    b = no_lag0_estimate(variation_stats(back, 60), wc)
    assert a.h == b.h and a.c_integrated == b.c_integrated


def test_tick_roundtrip_estimate():
    path = simulate_mixed(SimConfig(n=4680, seed=4))
    step = 5.0
    rows = [(f"2019-03-01T{(34200 + k * step) // 3600:02.0f}:{(34200 + k * step) % 3600 // 60:02.0f}:"
             f"{(34200 + k * step) % 60:02.0f}", repr(math.exp(4.0 + v))) for k, v in enumerate(path.values)]
    ts = ingest_csv(csv_of(rows))
    sampled = calendar_sample(ts, step)
    assert len(sampled) == len(path)
    assert sampled.delta == pytest.approx(path.delta, rel=1e-12)
    assert np.allclose(sampled.values - 4.0, path.values, atol=1e-12)
    wc = WeightConfig.default()
    a = no_lag0_estimate(variation_stats(path, 60), wc)
    b = no_lag0_estimate(variation_stats(sampled, 60), wc)
    assert b.h == pytest.approx(a.h, abs=1e-8)
