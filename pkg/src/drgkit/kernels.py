"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise, or when
``DRGKIT_PURE_PYTHON=1`` is set, the numpy/pure-Python versions are used.
"""

from __future__ import annotations

import os

from drgkit import _pykernels

if os.environ.get("DRGKIT_PURE_PYTHON") == "1":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from drgkit import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

levenshtein = _impl.levenshtein
sparse_matmul = _impl.sparse_matmul
sparse_grad_accumulate = _impl.sparse_grad_accumulate


def available_backends() -> dict:
    """Name -> module for every backend importable in this environment."""
    found = {"python": _pykernels}
    try:
        from drgkit import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
