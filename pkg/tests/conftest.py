import numpy as np
import pytest

from steadylearn.pauli import DensityMatrix

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
DENSE = {"I": I2, "X": X, "Y": Y, "Z": Z}


def dense_string(letters: str) -> np.ndarray:
    """Kronecker product with the first letter as the most significant factor."""
    out = np.eye(1, dtype=complex)
    for ch in letters:
        out = np.kron(out, DENSE[ch])
    return out


def random_rho(n_sites: int, rng: np.random.Generator) -> DensityMatrix:
    d = 1 << n_sites
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return DensityMatrix(n_sites, rho / np.trace(rho))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# One line per acceptance criterion, repeated in the terminal summary.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
