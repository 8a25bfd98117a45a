import numpy as np
import pytest

from subgroup_tte.data import TrialDataset
from subgroup_tte.simulator import default_scenario, simulate_trial


def make_dataset(arm, beta, time, event, z0=None, z1=None, threshold=0.0):
    n = len(arm)
    rng = np.random.default_rng(n)
    return TrialDataset(
        ids=[f"s{i}" for i in range(n)],
        arm=arm,
        z0=rng.standard_normal(n) if z0 is None else z0,
        z1=rng.standard_normal(n) if z1 is None else z1,
        beta=beta,
        time=time,
        event=event,
        threshold=threshold,
    )


@pytest.fixture(scope="session")
def trial_i():
    return simulate_trial(default_scenario("i", seed=11))


@pytest.fixture(scope="session")
def trial_iii():
    return simulate_trial(default_scenario("iii", seed=11))


@pytest.fixture
def small_trial():
    rng = np.random.default_rng(3)
    n = 120
    arm = np.repeat([0, 1], n // 2)
    z0, z1 = rng.standard_normal((2, n))
    beta = 1.0 - 1.75 * arm + 0.5 * z0 + rng.standard_normal(n)
    time = rng.exponential(1.0 / np.exp(-1 + 0.3 * z0), n)
    event = rng.random(n) < 0.8
    return make_dataset(arm, beta, time, event, z0=z0, z1=z1)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
