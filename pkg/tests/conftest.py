import os
from pathlib import Path

import numpy as np
import pytest

from transferids.data import SplitSpec, prepare, synth_fixture
from transferids.nn import MlpConfig, MlpModel

ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit, status, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"[{status}] criterion {crit}: {detail}")


@pytest.fixture
def record_criterion():
    def record(crit: str, passed: bool | None, detail: str = ""):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        ACCEPTANCE_RESULTS.append((crit, status, detail))
        return passed
    return record


def nslkdd_path() -> Path | None:
    p = os.environ.get("NSLKDD_TRAIN")
    return Path(p) if p and Path(p).exists() else None


@pytest.fixture(scope="session")
def fixture_parts():
    raw = synth_fixture(1, 2000)
    prep, parts = prepare(raw, SplitSpec(seed=0))
    return prep, parts


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_mlp(rng, n_in=None, n_classes=None, hidden=None) -> MlpModel:
    """Small MLP with random weights and biases (no training)."""
    n_in = n_in or int(rng.integers(2, 7))
    n_classes = n_classes or int(rng.integers(2, 4))
    if hidden is None:
        hidden = tuple(int(rng.integers(2, 9)) for _ in range(int(rng.integers(1, 3))))
    sizes = [n_in, *hidden, n_classes]
    weights = [rng.normal(0, 1.0, (a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
    biases = [rng.normal(0, 0.5, b) for b in sizes[1:]]
    return MlpModel(weights, biases, MlpConfig(hidden_sizes=hidden, dropout_rate=0.0),
                    tuple(str(k) for k in range(n_classes)))
