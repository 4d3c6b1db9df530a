import numpy as np
import pytest

from sparsegrasp.autodiff import Tensor, get_tape


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _clean_tape():
    get_tape().clear()
    yield
    get_tape().clear()


def vjp(out: Tensor, cotangent: np.ndarray) -> None:
    """Backpropagate ``sum(out * cotangent)`` through the tape."""
    loss = Tensor(np.float32((out.data.astype(np.float64) * cotangent).sum()))
    get_tape().record((out,), loss, lambda g: (cotangent.astype(np.float32) * g,))
    get_tape().backward(loss)


def numeric_grad(fn, arr: np.ndarray, cotangent: np.ndarray, eps: float = 1e-2,
                 richardson: bool = False) -> np.ndarray:
    """Central differences of ``sum(fn() * cotangent)`` w.r.t. ``arr`` (edited in place).

    With ``richardson`` the steps ``eps`` and ``eps / 2`` are combined to cancel
    the second-order truncation error, which allows a larger step and so less
    float32 rounding noise.
    """
    if richardson:
        coarse = numeric_grad(fn, arr, cotangent, eps)
        return (4 * numeric_grad(fn, arr, cotangent, eps / 2) - coarse) / 3
    g = np.zeros(arr.shape, dtype=np.float64)
    flat = arr.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = (fn().data.astype(np.float64) * cotangent).sum()
        flat[i] = old - eps
        lo = (fn().data.astype(np.float64) * cotangent).sum()
        flat[i] = old
        g.reshape(-1)[i] = (hi - lo) / (2 * eps)
    return g


def grad_errors(analytic: np.ndarray, numeric: np.ndarray) -> tuple[float, float]:
    """(max absolute error, max error relative to the largest numeric entry)."""
    diff = np.abs(np.asarray(analytic, dtype=np.float64) - numeric)
    scale = max(np.abs(numeric).max(), 1e-12)
    return float(diff.max()), float(diff.max() / scale)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
