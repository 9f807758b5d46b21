import os
import subprocess
import sys

import numpy as np
import pytest

from transferids import _kernels_py, kernels
from transferids.classical.tree import grow_tree

BACKENDS = kernels.available_backends()
needs_compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")


def test_backend_is_reported():
    assert kernels.BACKEND in BACKENDS


@pytest.mark.parametrize("forced", ["python", "cython"])
def test_backend_can_be_forced(forced):
    if forced not in BACKENDS:
        pytest.skip("compiled kernels not built")
    env = {**os.environ, "TRANSFERIDS_BACKEND": forced}
    out = subprocess.run([sys.executable, "-c", "import transferids; print(transferids.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == forced


def test_python_best_split_on_hand_example():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0, 0, 1, 1])
    f, t, score = _kernels_py.best_split(X, y, np.arange(4), np.array([0]), 2)
    assert (f, t) == (0, 2.5)
    assert score == pytest.approx(4 / 2 + 4 / 2)


def test_constant_feature_gives_no_split():
    X = np.ones((5, 2))
    y = np.array([0, 1, 0, 1, 1])
    for impl in BACKENDS.values():
        assert impl.best_split(X, y, np.arange(5), np.arange(2), 2)[0] == -1


def test_adjacent_floats_threshold_separates():
    a = 0.3
    b = np.nextafter(a, 1.0)
    X = np.array([[a], [b]])
    for impl in BACKENDS.values():
        f, t, _ = impl.best_split(X, np.array([0, 1]), np.arange(2), np.array([0]), 2)
        assert f == 0 and a <= t < b


@needs_compiled
def test_best_split_matches_fallback():
    cy = BACKENDS["cython"]
    rng = np.random.default_rng(0)
    for _ in range(300):
        n, d, k = int(rng.integers(2, 60)), int(rng.integers(1, 6)), int(rng.integers(2, 4))
        X = np.round(rng.random((n, d)), int(rng.integers(1, 4)))
        y = rng.integers(0, k, n)
        idx = np.sort(rng.choice(n, size=int(rng.integers(2, n + 1)), replace=False)).astype(np.int64)
        feats = rng.permutation(d).astype(np.int64)
        a = cy.best_split(X, y, idx, feats, k)
        b = _kernels_py.best_split(X, y, idx, feats, k)
        assert a[0] == b[0] and a[1] == b[1]
        assert a[2] == pytest.approx(b[2], rel=1e-12)


@needs_compiled
def test_trees_are_identical_across_backends(monkeypatch):
    rng = np.random.default_rng(1)
    X = rng.random((300, 6))
    y = (X[:, 0] + X[:, 3] > 1).astype(np.int64)
    trees = {}
    for name, impl in BACKENDS.items():
        monkeypatch.setattr(kernels, "best_split", impl.best_split)
        trees[name] = grow_tree(X, y, 2)
    for key in ("feature", "threshold", "left", "right", "value"):
        np.testing.assert_array_equal(getattr(trees["cython"], key), getattr(trees["python"], key))
    out = [impl.tree_apply(X, *(getattr(trees["python"], k) for k in ("feature", "threshold", "left", "right")))
           for impl in BACKENDS.values()]
    np.testing.assert_array_equal(out[0], out[-1])


@needs_compiled
def test_svm_epoch_matches_fallback():
    cy = BACKENDS["cython"]
    rng = np.random.default_rng(2)
    X = rng.random((50, 3))
    y = np.where(X[:, 0] > 0.5, 1.0, -1.0)
    qii = np.einsum("ij,ij->i", X, X) + 1.0
    state = {name: (np.zeros(50), np.zeros(4)) for name in ("cython", "python")}
    for epoch in range(5):
        order = rng.permutation(50).astype(np.int64)
        ra = cy.svm_dual_cd_epoch(X, y, *state["cython"], qii, 1.0, order)
        rb = _kernels_py.svm_dual_cd_epoch(X, y, *state["python"], qii, 1.0, order)
        np.testing.assert_allclose(ra, rb, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(state["cython"][1], state["python"][1], rtol=1e-9, atol=1e-12)


@needs_compiled
@pytest.mark.parametrize("layout", ["sorted-ties", "reversed", "all-equal-but-one", "organ-pipe"])
def test_split_search_on_adversarial_orderings(layout):
    rng = np.random.default_rng(5)
    n = 2500
    v = {"sorted-ties": np.sort(rng.integers(0, 5, n)).astype(float),
         "reversed": np.sort(rng.random(n))[::-1],
         "all-equal-but-one": np.where(np.arange(n) == 17, 0.7, 0.3),
         "organ-pipe": np.concatenate([np.arange(n // 2), np.arange(n - n // 2)[::-1]]).astype(float)}[layout]
    X = np.ascontiguousarray(v[:, None])
    y = rng.integers(0, 3, n)
    args = (X, y, np.arange(n, dtype=np.int64), np.array([0], dtype=np.int64), 3)
    a, b = BACKENDS["cython"].best_split(*args), _kernels_py.best_split(*args)
    assert a[:2] == b[:2] and a[2] == pytest.approx(b[2], rel=1e-12)
