import numpy as np
import pytest

from ice_ensemble.data import Dataset


def blobs(n=60, r=3, seed=0, shift=1.5):
    """Two overlapping Gaussian classes."""
    rng = np.random.default_rng(seed)
    Y = np.arange(n) % 2
    X = rng.normal(size=(n, r)) + shift * Y[:, None]
    return Dataset(X, Y, name=f"blobs{seed}")


def regimes(n=300, seed=0):
    """Label depends on x0 with opposite sign in two regions of x1."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    X[:, 1] = np.where(np.arange(n) < n // 2, -3.0, 3.0) + 0.5 * X[:, 1]
    Y = ((X[:, 0] > 0) == (X[:, 1] > 0)).astype(int)
    return Dataset(X, Y, name=f"regimes{seed}")


@pytest.fixture
def small_ds():
    return blobs(60, 3, seed=1)


@pytest.fixture(scope="session")
def write_csv(tmp_path_factory):
    def _write(text, name="d.csv"):
        p = tmp_path_factory.mktemp("csv") / name
        p.write_text(text)
        return p
    return _write


# one summary line per acceptance criterion, printed after the run
CRITERIA: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    CRITERIA[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
