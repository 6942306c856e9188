import numpy as np
import pytest

from cpwm.potentials import Eckart, TanhRamp, double_barrier
from cpwm.units import CM1_TO_HARTREE

V0_A = 400 * CM1_TO_HARTREE       # Eckart A barrier height
ALPHA_A = 3.0
V0_B = 0.011                      # Eckart B
ALPHA_B = 1.364
V_RAMP = 400 * CM1_TO_HARTREE     # uphill ramp product asymptote
E_RAMP = 0.0023
MASS = 2000.0


@pytest.fixture
def eckart_a():
    return Eckart(V0_A, ALPHA_A)


@pytest.fixture
def eckart_b():
    return Eckart(V0_B, ALPHA_B)


@pytest.fixture
def uphill():
    return TanhRamp(0.0, V_RAMP, 0.0, 2.5)


@pytest.fixture
def barrier_ramp():
    from cpwm.potentials import SumPotential

    return SumPotential((Eckart(0.0015, 2.5), TanhRamp(0.0, V_RAMP, 0.0, 2.5)))


@pytest.fixture
def double():
    return double_barrier(0.0015, 1.0, 2.5, 2.5, 0.0005)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


#: one PASS/FAIL line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
