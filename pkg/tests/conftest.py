import numpy as np
import pytest

from lepkit.liouville import three_level_space
from lepkit.qops import DensityMatrix

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def basis3(k: int) -> DensityMatrix:
    m = np.zeros((3, 3), dtype=complex)
    m[k, k] = 1.0
    return DensityMatrix(three_level_space(), m)


def match_multisets(a, b) -> float:
    """Largest distance after optimally pairing two equal-length multisets."""
    from scipy.optimize import linear_sum_assignment

    a, b = np.asarray(a), np.asarray(b)
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())
