import numpy as np
import pytest


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    a = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = a @ a.conj().T
    return m / np.trace(m).real


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def random_kraus(rng, d_in, d_out, n_ops=3):
    """Random CPTP map as Kraus operators (isometry slices)."""
    a = rng.normal(size=(n_ops * d_out, d_in)) + 1j * rng.normal(size=(n_ops * d_out, d_in))
    q, _ = np.linalg.qr(a)
    return [q[k * d_out:(k + 1) * d_out] for k in range(n_ops)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
