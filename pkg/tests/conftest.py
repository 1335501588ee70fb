import numpy as np
import pytest

from roughvol.estimate import WeightConfig


@pytest.fixture(autouse=True)
def _weights_cache(tmp_path_factory, monkeypatch):
    monkeypatch.setenv("ROUGHVOL_WEIGHTS_DIR", str(tmp_path_factory.getbasetemp() / "weights"))


@pytest.fixture(scope="session")
def wc():
    return WeightConfig.default(0.35, 60)


def population_vhat(H, R, pi, c, delta):
    """First-order limit of the variation vector: noise part plus realized variance bias."""
    from roughvol.kernel import gamma_vector

    v = gamma_vector(H, R) * pi
    v[0] += c * delta ** (1.0 - 2.0 * H)
    return v * delta ** (2.0 * H - 1.0)


def stats_from_vhat(vhat, delta, qhat=1.0, t=1.0):
    from roughvol.stats import VariationStats

    return VariationStats(vhat=np.asarray(vhat, dtype=float), qhat=qhat, n_obs=int(round(t / delta)),
                          delta=delta, t=t)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion:2d}: {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
