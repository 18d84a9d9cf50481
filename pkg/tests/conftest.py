import numpy as np
import pytest

from qtradeoff.quantum_core import DensityMatrix, Observable

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


def qubit_state(r) -> DensityMatrix:
    """Qubit state with Bloch vector ``r`` in the Pauli convention."""
    rx, ry, rz = r
    return DensityMatrix(0.5 * (I2 + rx * SX + ry * SY + rz * SZ))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def paulis():
    return Observable(SX), Observable(SY), Observable(SZ)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
