import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from qevent.measurements import MeasurementEnsemble
from qevent.qla import random_contraction, random_projector, random_state

settings.register_profile(
    "qevent",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("qevent")

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=1, max_value=6)
small_m = st.integers(min_value=1, max_value=4)


def projective_ensemble(d, m, rng):
    return MeasurementEnsemble([random_projector(d, int(rng.integers(1, d + 1)), rng) for _ in range(m)])


def general_ensemble(d, m, rng):
    return MeasurementEnsemble([random_contraction(d, rng) for _ in range(m)])


def mixed_or_pure(d, rng):
    return random_state(d, rng, mode="haar" if rng.random() < 0.5 else "hs")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def record_criterion(label: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
