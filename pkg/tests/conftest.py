import numpy as np
import pytest

from latentlabel.data_model import LabelMatrix, ModelState, MultiModalView


def random_instance(rng, n=None, m=None, dims=None, c=None, k=None, alpha=None, beta=None):
    """Small random (view, labels, state) triple with consistent shapes."""
    n = rng.integers(3, 12) if n is None else n
    m = rng.integers(0, 5) if m is None else m
    N = n + m
    if dims is None:
        dims = list(rng.integers(1, 7, size=rng.integers(1, 4)))
    c = rng.integers(1, 6) if c is None else c
    k = rng.integers(1, min(6, N) + 1) if k is None else k
    Xs = [rng.normal(size=(N, d)) for d in dims]
    Y = (rng.random((n, c)) < 0.4).astype(float)
    labels = LabelMatrix.from_training(Y, m)
    alpha = float(rng.uniform(0, 1)) if alpha is None else alpha
    beta = float(rng.uniform(0, 1)) if beta is None else beta
    state = ModelState([rng.normal(size=(d, k)) for d in dims], rng.normal(size=(N, k)),
                       rng.normal(size=(k, c)), alpha, beta, int(k))
    return MultiModalView.from_arrays(Xs), labels, state


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    """Store one acceptance outcome for the end-of-run summary."""
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
