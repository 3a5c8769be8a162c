import numpy as np
import pytest

from ppclass.core import PointPattern, Window


@pytest.fixture
def unit():
    return Window.unit(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pattern(points, window=None):
    window = window or Window.unit(2)
    return PointPattern(np.asarray(points, dtype=float).reshape(-1, window.dim), window)


def random_pattern(rng, window, max_points=6, min_points=0):
    n = int(rng.integers(min_points, max_points + 1))
    return PointPattern(window.uniform(rng, n), window)


ACCEPTANCE = []


def record_acceptance(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
