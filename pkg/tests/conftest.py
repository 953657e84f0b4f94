import numpy as np
import pytest

from mctsga.dataset import LabeledDataset, ScalerParams, bundled_csv_path, prepare
from mctsga.network import MlpSpec

# (criterion, description, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {num}: {name} -- {detail}")


@pytest.fixture
def record():
    def _record(num, name, ok, detail=""):
        ACCEPTANCE.append((num, name, bool(ok), detail))
        return ok
    return _record


@pytest.fixture(scope="session")
def diabetes_split():
    return prepare(bundled_csv_path(), seed=0)


@pytest.fixture(scope="session")
def spec():
    return MlpSpec()


def make_dataset(X, y):
    X = np.asarray(X, dtype=float)
    return LabeledDataset(X, np.asarray(y), ScalerParams(np.zeros(X.shape[1]), np.ones(X.shape[1])))


@pytest.fixture
def toy_data():
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(40, 3))
    y = (X[:, 0] > 0.5).astype(int)
    return make_dataset(X, y)
