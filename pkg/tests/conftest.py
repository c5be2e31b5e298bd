from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from inrlab.signal_io import load_pgm_ppm

DATA = Path(__file__).parent / "data"

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def camera128():
    return load_pgm_ppm(DATA / "camera128.pgm")


@pytest.fixture(scope="session")
def camera256():
    return load_pgm_ppm(DATA / "camera256.pgm")


def central_diff(f, x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference derivative of a vectorized scalar function."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def max_rel_err(got, want, floor: float = 1e-12) -> float:
    """Worst-case error normalized by the overall magnitude of ``want``.

    Normalizing entrywise blows up on entries that are near zero by accident,
    so the scale is the largest reference magnitude.
    """
    got, want = np.asarray(got, dtype=float), np.asarray(want, dtype=float)
    scale = max(float(np.max(np.abs(want))), floor)
    return float(np.max(np.abs(got - want))) / scale


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line criterion verdict; all verdicts are repeated in the terminal summary."""

    def emit(line: str):
        ACCEPTANCE_LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
