import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from acbvar import ShrinkageConfig, assemble_prior, build_blocks, simulate_var

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE = []


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}")


def random_spd(rng, n, cond=50.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.exp(rng.uniform(0.0, np.log(cond), n))
    W = (Q * eig) @ Q.T
    return 0.5 * (W + W.T)


@pytest.fixture
def small_var():
    """Stable 3-variable VAR(2) sample with its blocks and a reduced-form prior."""
    B = np.zeros((2, 3, 3))
    B[0] = [[0.5, 0.1, 0.0], [0.0, 0.4, 0.1], [0.1, 0.0, 0.3]]
    B[1] = 0.1 * np.eye(3)
    data = simulate_var(B, np.eye(3), 60, seed=3, names=["a", "b", "c"])
    blocks = build_blocks(data, 2)
    prior = assemble_prior(ShrinkageConfig(0.1, 0.02, mode="reduced"), [1.0, 1.5, 0.8], 2)
    return data, blocks, prior
