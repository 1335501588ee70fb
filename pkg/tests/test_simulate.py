import io
import json

import numpy as np
import pytest

from roughvol.exceptions import InputError
from roughvol.kernel import gamma
from roughvol.simulate import (PricePath, SimConfig, fbm_increments, fbm_increments_cholesky, fgn_eigenvalues,
                               read_path_csv, seed_streams, simulate_mixed, write_path_csv, write_sidecar)
from roughvol.stats import signature_slope


def acf(x, r):
    x = x - x.mean()
    return float(x[:-r] @ x[r:] / (x @ x))


def test_brownian_increments_uncorrelated():
    n = 2**14
    x = fbm_increments(0.5, n, 1.0 / n, seed=1)
    assert abs(acf(x, 1)) < 3 / np.sqrt(n)
    assert np.var(x) == pytest.approx(1.0 / n, rel=0.05)


def test_fgn_acf_matches_kernel():
    n = 2**16
    x = fbm_increments(0.25, n, 1.0, seed=3)
    for r in range(1, 6):
        assert abs(acf(x, r) - gamma(0.25, r)) < 4 / np.sqrt(n)


@pytest.mark.parametrize("H", [0.05, 0.3, 0.5, 0.7, 0.95])
def test_embedding_eigenvalues_nonnegative(H):
    lam = fgn_eigenvalues(H, 1000)
    assert lam.min() >= -1e-10 * lam.max()


def test_same_seed_bit_identical():
    a = fbm_increments(0.3, 5000, 1e-3, seed=42)
    b = fbm_increments(0.3, 5000, 1e-3, seed=42)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, fbm_increments(0.3, 5000, 1e-3, seed=43))


def test_increment_scale():
    delta = 1 / 23400
    x = np.concatenate([fbm_increments(0.3, 23400, delta, seed=s) for s in range(5)])
    assert np.var(x) == pytest.approx(delta**0.6, rel=0.05)


def test_circulant_agrees_with_cholesky_in_law():
    # compare sample covariances of the first few increments
    H, n, reps = 0.3, 64, 4000
    rng = np.random.default_rng(0)
    circ = np.array([fbm_increments(H, n, 1.0, rng=rng)[:4] for _ in range(reps)])
    chol = np.array([fbm_increments_cholesky(H, n, 1.0, seed=s)[:4] for s in range(reps)])
    target = gamma(H, np.abs(np.subtract.outer(np.arange(4), np.arange(4))))
    se = np.sqrt((1 + target**2) / reps)
    assert np.all(np.abs(np.cov(circ, rowvar=False) - target) < 5 * se)
    assert np.all(np.abs(np.cov(chol, rowvar=False) - target) < 5 * se)


def test_cholesky_size_limit():
    with pytest.raises(InputError):
        fbm_increments_cholesky(0.3, 5000, 1.0)


def test_mixed_increment_covariance():
    H, sigma, rho, n = 0.3, 0.01, 0.001, 100
    delta = 1 / n
    reps = 10_000
    inc = np.empty((reps, 6))
    for s in range(reps):
        p = simulate_mixed(SimConfig(H=H, sigma=sigma, rho=rho, n=8, days=1, seed=s))
        inc[s] = np.diff(p.values)[:6]
    # n=8 gives delta = 1/8
    delta = 1 / 8
    lag = np.abs(np.subtract.outer(np.arange(6), np.arange(6)))
    target = rho**2 * delta ** (2 * H) * gamma(H, lag) + sigma**2 * delta * np.eye(6)
    emp = np.cov(inc, rowvar=False)
    d = np.diag(target)
    se = np.sqrt((np.outer(d, d) + target**2) / reps)
    assert np.all(np.abs(emp - target) < 5 * se)


def test_components_independent():
    cfg_b = SimConfig(H=0.3, sigma=1.0, rho=0.0, n=5000, seed=11)
    cfg_n = SimConfig(H=0.3, sigma=0.0, rho=1.0, n=5000, seed=11)
    db = np.diff(simulate_mixed(cfg_b).values)
    dn = np.diff(simulate_mixed(cfg_n).values)
    assert abs(np.corrcoef(db, dn)[0, 1]) < 4 / np.sqrt(db.size)


def test_no_noise_is_brownian():
    rv = [np.sum(np.diff(simulate_mixed(SimConfig(sigma=0.01, rho=0.0, n=2000, seed=s)).values) ** 2)
          for s in range(50)]
    assert np.mean(rv) == pytest.approx(1e-4, rel=0.05)


def test_noise_only_normalized_rv():
    n, H = 23400, 0.3
    vals = [n ** (-(1 - 2 * H)) * np.sum(np.diff(simulate_mixed(
        SimConfig(H=H, sigma=0.0, rho=0.001, n=n, seed=s)).values) ** 2) for s in range(100)]
    assert np.mean(vals) == pytest.approx(1e-6, rel=0.10)


def test_signature_slope_of_mixed_path():
    # with the Brownian part present the noise only dominates at the finest
    # grids, so the slope follows the population curve sigma^2 + rho^2 (n/i)^(1-2H)
    H, sigma, rho, n = 0.3, 0.01, 0.001, 23400
    i = np.arange(1, 21)
    expected = np.polyfit(np.log(i), np.log(sigma**2 + rho**2 * (n / i) ** (1 - 2 * H)), 1)[0]
    slopes = [signature_slope(simulate_mixed(SimConfig(H=H, sigma=sigma, rho=rho, n=n, seed=s))).slope
              for s in range(100)]
    assert np.mean(slopes) == pytest.approx(expected, abs=0.02)
    pure = [signature_slope(simulate_mixed(SimConfig(H=H, sigma=0.0, rho=rho, n=n, seed=s))).slope
            for s in range(100)]
    assert -0.5 <= np.mean(pure) <= -0.3


def test_white_and_none_noise():
    w = simulate_mixed(SimConfig(sigma=0.0, rho=1.0, n=20000, noise_kind="white", seed=2))
    dy = np.diff(w.values)
    assert acf(dy, 1) == pytest.approx(-0.5, abs=0.03)
    a = simulate_mixed(SimConfig(sigma=0.01, rho=0.5, n=100, noise_kind="none", seed=2))
    b = simulate_mixed(SimConfig(sigma=0.01, rho=0.0, n=100, noise_kind="fbm", seed=2))
    assert np.array_equal(a.values, b.values)


def test_drift_and_step_volatility():
    p = simulate_mixed(SimConfig(sigma=0.0, rho=0.0, drift=0.5, n=10, days=2, seed=0))
    assert np.allclose(p.values, 0.5 * np.arange(21) / 10)
    cfg = SimConfig(sigma=0.01, rho=0.0, n=20000, days=2, sigma_path=[1.0, 3.0], seed=4)
    dy = np.diff(simulate_mixed(cfg).values)
    assert np.sum(dy[20000:] ** 2) / np.sum(dy[:20000] ** 2) == pytest.approx(9.0, rel=0.1)


@pytest.mark.parametrize("bad", [dict(n=1), dict(days=0), dict(sigma=-1), dict(rho=-0.1),
                                 dict(noise_kind="pink"), dict(H=1.2), dict(sigma_path=[1.0, 2.0])])
def test_config_validation(bad):
    with pytest.raises(InputError):
        SimConfig(**bad)


def test_config_roundtrip():
    cfg = SimConfig(H=0.25, n=50, days=3, seed=9, rho_path=[1, 2, 3])
    assert SimConfig.from_dict(cfg.to_dict()) == SimConfig(**{**cfg.to_dict()})
    buf = io.StringIO()
    write_sidecar(cfg, buf)
    assert json.loads(buf.getvalue())["seed"] == 9
    with pytest.raises(InputError):
        SimConfig.from_dict({"H": 0.3, "bogus": 1})


def test_seed_streams_independent_and_reproducible():
    a = [g.standard_normal(3) for g in seed_streams(5, 2)]
    b = [g.standard_normal(3) for g in seed_streams(5, 2)]
    assert np.array_equal(a[0], b[0]) and not np.array_equal(a[0], a[1])


def test_csv_roundtrip():
    p = simulate_mixed(SimConfig(n=100, days=2, seed=1))
    buf = io.StringIO()
    write_path_csv(p, buf)
    assert buf.getvalue().startswith("time,logprice\n")
    q = read_path_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(q.values, p.values)
    assert q.delta == pytest.approx(p.delta, rel=1e-12)
    assert q.days == pytest.approx(2.0)


@pytest.mark.parametrize("text", ["t,y\n0,1\n1,2\n", "time,logprice\n0,1\nx,2\n",
                                  "time,logprice\n0,1\n1,2\n3,3\n", "time,logprice\n0,1\n"])
def test_csv_rejects_bad_input(text):
    with pytest.raises(InputError):
        read_path_csv(io.StringIO(text))


def test_split_days_shares_boundaries():
    p = PricePath(np.arange(11.0), 0.2, 2.0)
    days = p.split_days(5)
    assert len(days) == 2
    assert days[0].values[-1] == days[1].values[0]
    assert sum(len(d) - 1 for d in days) == 10
