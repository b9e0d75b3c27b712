"""Kernel dispatch: compiled extension when importable, pure Python otherwise.

Set ``DGSIM_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("DGSIM_PURE_PYTHON"):
        raise ImportError("pure-python kernels requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two integer sequences."""
    if _impl is _pykernels:
        return _impl.lcs_length(a, b)
    return _impl.lcs_length(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))


def rbf_cross_sum(a, wa, b, wb, gamma: float) -> float:
    """sum_ij wa_i * wb_j * exp(-gamma * (a_i - b_j)^2) for 1-D points."""
    return float(_impl.rbf_cross_sum(
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(wa, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        np.ascontiguousarray(wb, dtype=np.float64),
        float(gamma),
    ))


def trigram_features(text: str, dim: int) -> np.ndarray:
    """Signed hashed character-trigram counts (unnormalized)."""
    return _impl.trigram_features(text, int(dim))
