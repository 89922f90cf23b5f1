import numpy as np
import pytest

from oneshot_qit.states import random_state, trial_rng

# criterion number -> (passed, description); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def qubit_pair(rng):
    return random_state([("A", 2)], seed=rng), random_state([("A", 2)], seed=rng)


def diag_state(p, label="A"):
    from oneshot_qit.qmat import DensityMatrix

    p = np.asarray(p, dtype=float)
    return DensityMatrix(np.diag(p / p.sum()), [(label, len(p))])


def seeded(seed, trial):
    return trial_rng(seed, trial)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, desc = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {desc}")
