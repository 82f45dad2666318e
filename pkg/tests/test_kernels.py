import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bosonsig import _kernels
from bosonsig.classify import DecisionTree
from oracles import naive_permanent

compiled = _kernels.compiled_backend
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def _random_matrix(rng, k):
    return rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))


@pytest.mark.parametrize("backend", ["python", "compiled"])
@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
def test_permanent_matches_permutation_sum(backend, k, rng):
    mod = _kernels.python_backend if backend == "python" else compiled
    if mod is None:
        pytest.skip("compiled kernels not built")
    a = _random_matrix(rng, k)
    want = naive_permanent(a)
    assert abs(mod.permanent(a) - want) <= 1e-10 * max(1.0, abs(want))


@needs_compiled
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_submatrix_permanents_backends_agree(n, seed):
    rng = np.random.default_rng(seed)
    m = n + 3
    u = _random_matrix(rng, m)
    cols = np.sort(rng.choice(m, size=n, replace=False)).astype(np.int64)
    rows = np.sort(rng.integers(0, m, size=(12, n)), axis=1).astype(np.int64)
    a = compiled.submatrix_permanents(u, cols, rows)
    b = _kernels.python_backend.submatrix_permanents(u, cols, rows)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)


@needs_compiled
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_trees_identical_across_backends(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((400, 6))
    X[:, 2] = np.round(X[:, 2])  # duplicated values exercise the threshold scan
    y = (X[:, 0] + 0.5 * X[:, 1] + 0.3 * rng.standard_normal(400) > 0).astype(np.int64)
    sample = rng.integers(0, 400, size=250).astype(np.int64)
    a = compiled.grow_tree(X, y, sample, 2, 3, 12345 + seed)
    b = _kernels.python_backend.grow_tree(X, y, sample, 2, 3, 12345 + seed)
    for x, z in zip(a, b):
        np.testing.assert_array_equal(x, z)


def test_tree_fits_training_data(rng):
    X = rng.standard_normal((300, 4))
    y = (X[:, 1] > 0.2).astype(np.int64)
    tree = DecisionTree.grow(X, y, np.arange(300), 2, 4, 7)
    np.testing.assert_array_equal(tree.predict_codes(X), y)
    assert np.all(np.isfinite(tree.threshold[tree.feature >= 0]))


def test_pure_python_fallback_selected_by_environment():
    env = dict(os.environ, BOSONSIG_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from bosonsig import _kernels; print(_kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == _kernels.python_backend.BACKEND
