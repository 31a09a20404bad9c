import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drgkit import kernels


def full_matrix_levenshtein(a, b):
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[-1][-1]


def test_compiled_backend_built():
    assert "cython" in kernels.available_backends()


@pytest.mark.parametrize("a,b,expected", [
    ("", "", 0), ("abc", "", 3), ("", "ab", 2), ("kitten", "sitting", 3),
    ("CC CONCUSSION WITH", "CONCUSSION MCC WITH", 7),
])
def test_levenshtein_known(backend, a, b, expected):
    assert backend.levenshtein(a, b) == expected


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="ABC W/-é", max_size=14), st.text(alphabet="ABC W/-é", max_size=14))
def test_levenshtein_matches_full_matrix(a, b):
    expected = full_matrix_levenshtein(a, b)
    for impl in kernels.available_backends().values():
        assert impl.levenshtein(a, b) == expected
        assert impl.levenshtein(b, a) == expected


def _random_csr(rng, n, v, density=0.3):
    dense = rng.normal(size=(n, v)) * (rng.random((n, v)) < density)
    indptr, indices, data = [0], [], []
    for row in dense:
        nz = np.flatnonzero(row)
        indices += nz.tolist()
        data += row[nz].tolist()
        indptr.append(len(indices))
    return dense, np.array(indptr, np.int64), np.array(indices, np.int32), np.array(data)


def test_sparse_matmul_matches_dense(backend):
    rng = np.random.default_rng(3)
    dense, indptr, indices, data = _random_csr(rng, 7, 13)
    w = rng.normal(size=(5, 13))
    np.testing.assert_allclose(backend.sparse_matmul(indptr, indices, data, w), dense @ w.T, rtol=1e-12, atol=1e-12)


def test_sparse_grad_accumulate_matches_dense(backend):
    rng = np.random.default_rng(4)
    dense, indptr, indices, data = _random_csr(rng, 6, 11)
    g = rng.normal(size=(6, 4))
    out = rng.normal(size=(4, 11))
    expected = out + g.T @ dense
    backend.sparse_grad_accumulate(indptr, indices, data, g, out)
    np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)


def test_empty_rows(backend):
    indptr = np.array([0, 0, 0], np.int64)
    out = backend.sparse_matmul(indptr, np.empty(0, np.int32), np.empty(0), np.ones((3, 4)))
    assert out.shape == (2, 3) and not out.any()


def test_env_var_forces_pure_python():
    import os
    import subprocess
    import sys
    env = dict(os.environ, DRGKIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from drgkit import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
