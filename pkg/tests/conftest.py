import numpy as np
import pytest

from circsense.circulant import GeneratorSequence, PartialCirculantOperator, SampleSet

ACCEPTANCE_RESULTS = []


def record_criterion(name, passed, detail=""):
    ACCEPTANCE_RESULTS.append((name, bool(passed), detail))
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")


def dense_circulant(phi):
    """Explicit circulant matrix, C[i, j] = phi[(i - j) mod n], built entry by entry."""
    n = len(phi)
    C = np.zeros((n, n), dtype=np.result_type(np.asarray(phi).dtype, float))
    for i in range(n):
        for j in range(n):
            C[i, j] = phi[(i - j) % n]
    return C


def direct_dft(v):
    """O(n^2) DFT by direct summation, independent of numpy.fft."""
    v = np.asarray(v, dtype=complex)
    n = v.size
    out = np.zeros(n, dtype=complex)
    for w in range(n):
        for l in range(n):
            out[w] += v[l] * np.exp(-2j * np.pi * w * l / n)
    return out


@pytest.fixture
def worked_op():
    """The n=4 instance phi=(1, 1, -1, 1), Omega={0, 2}."""
    gen = GeneratorSequence(np.array([1.0, 1.0, -1.0, 1.0]), "deterministic")
    return PartialCirculantOperator(gen, SampleSet([0, 2], 4))
