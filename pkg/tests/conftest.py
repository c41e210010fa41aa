import math

import numpy as np
import pytest

from frackin.coefficients import CoefficientSet
from frackin.config import reference_config

REFERENCE = dict(sigma=1.5, beta=2.0, gamma=2.0, n_exp=2.5, s_exp=1.3, M0=2.0,
                 c_plus=0.1, c_minus=0.1, A0=1.0, A1=1.0, V0=1.0)

# criterion number -> (verdict, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def ref_coeffs():
    return CoefficientSet(**REFERENCE)


@pytest.fixture(scope="session")
def ref_cfg():
    return reference_config()


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        verdict, detail = ACCEPTANCE[n]
        tr.write_line(f"criterion {n}: {verdict}  {detail}")
