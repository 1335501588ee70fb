import json
import math

import numpy as np
import pytest

from roughvol.exceptions import InputError
from roughvol.montecarlo import VARIANTS, expand_grid, monte_carlo, replication_seed, true_values
from roughvol.simulate import SimConfig

BASE = {"H": 0.3, "sigma": 0.01, "rho": 0.001, "n": 2340, "days": 2}


@pytest.fixture(scope="module")
def report():
    return monte_carlo(expand_grid(BASE, {"H": [0.3, 0.4]}), VARIANTS, reps=6, master_seed=3)


def test_grid_expansion():
    cfgs = expand_grid(BASE, {"rho": [1e-3, 2e-3], "H": [0.2, 0.3, 0.4]})
    assert len(cfgs) == 6
    assert [(c.H, c.rho) for c in cfgs[:2]] == [(0.2, 1e-3), (0.2, 2e-3)]
    assert expand_grid(BASE)[0].H == 0.3


def test_true_values():
    assert true_values(SimConfig(**BASE)) == (0.3, pytest.approx(1e-4), pytest.approx(1e-6))
    assert true_values(SimConfig(**{**BASE, "noise_kind": "white"}))[0] == 0.0
    assert true_values(SimConfig(**{**BASE, "noise_kind": "none"}))[2] == 0.0
    cfg = SimConfig(**{**BASE, "sigma_path": [1.0, 2.0]})
    assert true_values(cfg)[1] == pytest.approx(4e-4)


def test_seeds_distinct_and_stable():
    s = {replication_seed(1, c, r) for c in range(3) for r in range(50)}
    assert len(s) == 150
    assert replication_seed(1, 0, 0) == replication_seed(1, 0, 0)


def test_rmse_decomposition(report):
    for c in report.cells:
        if math.isfinite(c.h_rmse):
            assert c.h_rmse**2 == pytest.approx(c.h_bias**2 + c.h_sd**2, abs=1e-12)
    assert len(report.cells) == 2 * len(VARIANTS)


def test_all_variants_present(report):
    assert report.cell(0, "no_lag0").reps == 6
    assert math.isnan(report.cell(0, "h_vs").c_rmse)
    with pytest.raises(KeyError):
        report.cell(5, "no_lag0")


def test_identical_seeds_zero_variance():
    cfgs = expand_grid(BASE)
    rep = monte_carlo(cfgs, ["no_lag0"], reps=2, seeds=[[77, 77]])
    c = rep.cell(0, "no_lag0")
    assert c.h_sd == 0.0
    assert c.h_rmse == pytest.approx(abs(c.h_bias), abs=1e-15)


def test_thread_count_does_not_change_output():
    cfgs = expand_grid(BASE, {"H": [0.25, 0.35]})
    one = monte_carlo(cfgs, ["no_lag0", "lag0_n3"], reps=4, master_seed=9, threads=1)
    two = monte_carlo(cfgs, ["no_lag0", "lag0_n3"], reps=4, master_seed=9, threads=2)
    assert one.csv_lines() == two.csv_lines()
    assert one.to_json() == two.to_json()


def test_paired_rmse_difference(report):
    d, se = report.rmse_difference(0, "no_lag0", "no_lag0")
    assert d == 0.0 and se == 0.0
    d, se = report.rmse_difference(0, "no_lag0", "lag0_n3")
    assert se > 0
    assert d == pytest.approx(report.cell(0, "no_lag0").h_rmse - report.cell(0, "lag0_n3").h_rmse)


def test_serialization(report):
    lines = report.csv_lines()
    assert lines[0].split(",")[:3] == ["config", "H", "sigma"]
    assert len(lines) == 1 + len(report.cells)
    assert all("np." not in line for line in lines)
    d = json.loads(report.to_json())
    assert d["master_seed"] == 3 and len(d["seeds"][0]) == 6


def test_failures_recorded_not_fatal():
    # too short for R = 60 on each day: every replication fails
    rep = monte_carlo(expand_grid({**BASE, "n": 40}), ["no_lag0"], reps=2)
    assert rep.cell(0, "no_lag0").failed == 2
    assert rep.errors[(0, "no_lag0")]


def test_argument_checks():
    with pytest.raises(InputError):
        monte_carlo(expand_grid(BASE), ["nope"], reps=2)
    with pytest.raises(InputError):
        monte_carlo(expand_grid(BASE), ["no_lag0"], reps=1)
    with pytest.raises(InputError):
        monte_carlo(expand_grid(BASE), ["no_lag0"], reps=2, seeds=[[1]])
