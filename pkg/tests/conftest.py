import numpy as np
import pytest

from tomoprior import AngleSet, DctBasis, RadonOperator


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def op8():
    return RadonOperator((8, 8), AngleSet(6))


@pytest.fixture(scope="session")
def op16():
    return RadonOperator((16, 16), AngleSet(8))


@pytest.fixture(scope="session")
def basis8():
    return DctBasis(8, 8)


def dense_matrix(apply, in_shape):
    """Assemble a linear map column by column from its action on canonical basis arrays."""
    n = int(np.prod(in_shape))
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(np.ravel(apply(e.reshape(in_shape))))
    return np.stack(cols, axis=1)


ACCEPTANCE_COUNT = 12


@pytest.fixture
def report(request):
    """Record one acceptance line: ``report(number, ok, detail)``."""
    store = request.config.__dict__.setdefault("_acceptance", {})

    def _record(number, ok, detail):
        store[number] = (bool(ok), detail)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.__dict__.get("_acceptance")
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_COUNT + 1):
        if n in store:
            ok, detail = store[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: FAIL  (not run or raised)")
