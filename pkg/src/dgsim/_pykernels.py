"""Pure-Python / numpy implementations of the hot loops in ``_ckernels``."""
from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1
_CHUNK = 2048


def lcs_length(a, b) -> int:
    a = list(a)
    b = list(b)
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for ai in a:
        cur = [0]
        for j, bj in enumerate(b):
            if ai == bj:
                cur.append(prev[j] + 1)
            else:
                cur.append(prev[j + 1] if prev[j + 1] >= cur[j] else cur[j])
        prev = cur
    return prev[-1]


def rbf_cross_sum(a, wa, b, wb, gamma: float) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    wa = np.asarray(wa, dtype=np.float64)
    wb = np.asarray(wb, dtype=np.float64)
    total = 0.0
    for start in range(0, a.shape[0], _CHUNK):
        block = a[start:start + _CHUNK]
        k = np.exp(-gamma * (block[:, None] - b[None, :]) ** 2)
        total += float(wa[start:start + _CHUNK] @ (k @ wb))
    return total


def _fnv_codepoint(h: int, ch: str) -> int:
    cp = ord(ch)
    for k in range(4):
        h ^= (cp >> (8 * k)) & 0xFF
        h = (h * _FNV_PRIME) & _MASK
    return h


def trigram_features(text: str, dim: int) -> np.ndarray:
    out = np.zeros(dim, dtype=np.float64)
    n = len(text)
    if n == 0:
        return out
    width = 3 if n >= 3 else n
    for i in range(n - width + 1):
        h = _FNV_OFFSET
        for ch in text[i:i + width]:
            h = _fnv_codepoint(h, ch)
        if (h >> 63) & 1:
            out[h % dim] -= 1.0
        else:
            out[h % dim] += 1.0
    return out
