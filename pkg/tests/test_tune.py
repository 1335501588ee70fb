import json

import numpy as np
import pytest

from roughvol.asymvar import var_c_thm3, var_ladder
from roughvol.exceptions import DomainError, RoughVolError
from roughvol.tune import (WeightSet, cache_key, initial_weights, nelder_mead, optimize_weights,
                           track_objective, tuned_weight_set, weights_dir)


def test_initial_weights_structure():
    w = initial_weights(0.35, 60)
    assert np.linalg.norm(w["a"]) == pytest.approx(1.0, abs=1e-15)
    assert np.linalg.norm(w["b"]) == pytest.approx(1.0, abs=1e-15)
    assert w["a"] @ w["b"] == pytest.approx(0.0, abs=1e-15)
    assert w["b"][0] == 0.0
    assert w["a0"][0] == 0.0 and w["b0"][0] == 0.0
    assert w["a0"] @ w["b0"] == pytest.approx(0.0, abs=1e-14)
    assert np.array_equal(w["c"], w["a"])


@pytest.mark.parametrize("H0,R", [(0.0, 60), (0.5, 60), (0.3, 0)])
def test_initial_weights_domain(H0, R):
    with pytest.raises(DomainError):
        initial_weights(H0, R)


# --- Nelder-Mead -------------------------------------------------------------

def test_quadratic_bowl():
    p = np.array([1.0, -2.0, 0.5])
    res = nelder_mead(lambda x: float(np.sum((x - p) ** 2)), np.zeros(3), tol=1e-14, max_iter=5000)
    assert np.allclose(res.x, p, atol=1e-6)
    assert res.converged


def test_rosenbrock():
    f = lambda x: 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
    res = nelder_mead(f, [-1.2, 1.0], tol=1e-12, max_iter=10_000)
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-4)


def test_constant_objective_returns_init():
    x0 = np.array([0.3, -1.0])
    res = nelder_mead(lambda x: 4.0, x0)
    assert np.array_equal(res.x, x0)
    assert res.fun == 4.0


def test_nonfinite_regions_are_avoided():
    f = lambda x: np.inf if x[0] > 0.5 else float((x[0] - 1) ** 2 + x[1] ** 2)
    res = nelder_mead(f, [0.0, 1.0], tol=1e-10, max_iter=4000)
    assert res.x[0] <= 0.5 and res.x[0] == pytest.approx(0.5, abs=1e-4)


def test_nonfinite_start_aborts():
    with pytest.raises(RoughVolError):
        nelder_mead(lambda x: np.nan, [1.0])


def test_deterministic():
    f = lambda x: float(np.sum(np.cos(3 * x) + x**2))
    a = nelder_mead(f, [1.0, 2.0, -1.0], max_iter=300)
    b = nelder_mead(f, [1.0, 2.0, -1.0], max_iter=300)
    assert np.array_equal(a.x, b.x) and a.n_eval == b.n_eval


# --- weight optimization -----------------------------------------------------

@pytest.mark.parametrize("track", ["lag0", "no_lag0"])
def test_optimization_never_worse_and_respects_zeros(track):
    res = optimize_weights(0.35, 6, track, m=20, max_iter=150)
    assert res.value <= res.initial_value
    assert res.b[0] == 0.0
    if track == "no_lag0":
        assert res.a[0] == 0.0
        assert var_c_thm3(6, res.a, res.b, res.c, 0.35) == pytest.approx(res.value, rel=1e-9)
    else:
        assert var_ladder(6, res.a, res.b, res.c, 0.35, m=20).var_c == pytest.approx(res.value, rel=1e-9)


def test_objective_decreases_with_more_iterations():
    short = optimize_weights(0.35, 6, "no_lag0", max_iter=20)
    long = optimize_weights(0.35, 6, "no_lag0", max_iter=400)
    assert long.value <= short.value <= short.initial_value


def test_unknown_track():
    with pytest.raises(DomainError):
        track_objective("both", 6, 0.3)


def test_weights_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ROUGHVOL_WEIGHTS_DIR", str(tmp_path))
    assert weights_dir() == tmp_path
    assert cache_key(60, 0.35, "lag0") == "weights_R60_H0.3500_lag0.json"


def test_tuned_weights_cached(tmp_path, monkeypatch):
    monkeypatch.setenv("ROUGHVOL_WEIGHTS_DIR", str(tmp_path))
    ws = tuned_weight_set(0.35, 5, m=10, max_iter=40)
    for track in ("lag0", "no_lag0"):
        assert (tmp_path / cache_key(5, 0.35, track)).exists()
    assert ws.b0[0] == 0.0 and ws.a0[0] == 0.0
    # a doctored cache file is read back verbatim
    f = tmp_path / cache_key(5, 0.35, "no_lag0")
    rec = json.loads(f.read_text())
    rec["c"] = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]
    f.write_text(json.dumps(rec))
    again = tuned_weight_set(0.35, 5, m=10)
    assert again.c0.tolist() == rec["c"]
    assert np.array_equal(again.a, ws.a)


def test_weight_set_roundtrip():
    ws = tuned_weight_set(0.3, 4, optimize=False)
    back = WeightSet.from_dict(json.loads(json.dumps(ws.to_dict())))
    assert np.array_equal(back.a0, ws.a0) and back.H0 == 0.3
    assert ws.optimized == {"lag0": False, "no_lag0": False}
