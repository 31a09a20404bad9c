"""Pure-Python/numpy implementations of the hot kernels.

Signatures mirror ``_ckernels``; :mod:`drgkit.kernels` picks one at import.
"""

from __future__ import annotations

import numpy as np


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert, delete, substitute)."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def sparse_matmul(indptr, indices, data, weight) -> np.ndarray:
    """Rows of a CSR matrix times ``weight.T``; result is (n_rows, weight.shape[0])."""
    n = len(indptr) - 1
    out = np.zeros((n, weight.shape[0]), dtype=np.float64)
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        if hi > lo:
            out[i] = weight[:, indices[lo:hi]] @ data[lo:hi]
    return out


def sparse_grad_accumulate(indptr, indices, data, grad_out, out) -> None:
    """In place: ``out += grad_out.T @ X`` for CSR ``X``."""
    for i in range(len(indptr) - 1):
        lo, hi = indptr[i], indptr[i + 1]
        if hi > lo:
            out[:, indices[lo:hi]] += np.outer(grad_out[i], data[lo:hi])
