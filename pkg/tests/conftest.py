import numpy as np
import pytest

from conocc import engine as E
from conocc.data import synthesize_dataset

ACCEPTANCE_LINES: list[str] = []


def numeric_grad(f, arr: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arr`` (mutated in place)."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = arr[idx]
        arr[idx] = old + h
        fp = f()
        arr[idx] = old - h
        fm = f()
        arr[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.linalg.norm(a), 1e-8))


def gradcheck(op, inputs: list[np.ndarray], seed: int = 0, h: float = 1e-3) -> float:
    """Worst relative error between tape gradients and central differences, in float64.

    The scalar checked is ``sum(op(*tensors) * R)`` for a fixed random R.
    """
    with E.default_dtype(np.float64):
        tensors = [E.Tensor(x, requires_grad=True) for x in inputs]
        out = op(*tensors)
        proj = np.random.default_rng(seed).standard_normal(out.shape)

        def value():
            return float((op(*tensors).data * proj).sum())

        with E.GradTape() as tape:
            loss = E.sum_(E.mul(op(*tensors), E.Tensor(proj)))
        grads = E.backward(tape, loss, tensors)
        return max(rel_error(grads[t], numeric_grad(value, t.data, h)) for t in tensors)


@pytest.fixture(scope="session")
def small_synth():
    return synthesize_dataset(m=16, n_train=48, n_test_maj=16, n_test_min=16, separability=1.0, seed=3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
