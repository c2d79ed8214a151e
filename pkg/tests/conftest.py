import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from iqfrl.data import Dataset
from iqfrl.rules import Variables

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def step_scans(n: int = 50, n_beams: int = 16, seed: int = 1) -> Dataset:
    """Two-level scans with a random cut; outputs are smooth functions of the scan."""
    rng = np.random.default_rng(seed)
    v = Variables(n_beams=n_beams)
    d = np.empty((n, n_beams))
    for i in range(n):
        cut = rng.integers(2, n_beams - 2)
        a, b = rng.uniform(0.2, 1.5, 2)
        d[i, :cut] = a
        d[i, cut:] = b
    vel = rng.uniform(0, 0.5, n)
    y = np.c_[0.5 * d.min(1) / 1.5, np.clip(d[:, 4] - d[:, 12], -0.78, 0.78)]
    return Dataset(d, vel, outputs=y, variables=v)


@pytest.fixture
def small_dataset() -> Dataset:
    return step_scans()


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
