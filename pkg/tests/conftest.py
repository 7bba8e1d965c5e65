import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from longsurrogate.panel import ExperimentWindow, PanelDataset
from longsurrogate.synthgen import SynthSpec, generate

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")

_ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    _ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


def make_panel(n_per_arm=20, t_experimental=3, t_total=6, d=2, r=0, n_history=0, seed=0):
    """Small random panel with every cell observed."""
    rng = np.random.default_rng(seed)
    n = 2 * n_per_arm
    width = n_history + t_total + 1
    arm = np.repeat(np.array([1, 0], dtype=np.int8), n_per_arm)
    return PanelDataset(
        window=ExperimentWindow(t_experimental, t_total),
        unit_ids=np.array([f"u{i}" for i in range(n)]),
        arm=arm,
        covariates=rng.normal(size=(n, r)),
        surrogates=rng.normal(size=(n, width, d)),
        outcomes=rng.normal(size=(n, width)),
        n_history=n_history,
    )


@pytest.fixture
def small_panel():
    return make_panel()


@pytest.fixture(scope="session")
def stabilized_small():
    """stabilized1 panel with 2000 units per arm and its analytic truth."""
    return generate(SynthSpec(kind="stabilized1", n_per_arm=2000, seed=3))
