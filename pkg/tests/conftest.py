import numpy as np
import pytest

from eotrack.model import ModelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def cfg():
    return ModelConfig()


def random_spd(rng, d, scale=1.0, cond=10.0):
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    w = scale * np.exp(rng.uniform(0.0, np.log(cond), size=d))
    return (Q * w) @ Q.T


# Acceptance outcomes, filled by tests/test_acceptance.py and printed at the end of the run.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
