# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics must match ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from libc.stdint cimport uint64_t

cnp.import_array()

cdef uint64_t FNV_OFFSET = 0xcbf29ce484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001b3ULL


def lcs_length(const long long[:] a, const long long[:] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    if n == 0 or m == 0:
        return 0
    if m > n:
        a, b = b, a
        n, m = m, n
    cdef long long[:] prev = np.zeros(m + 1, dtype=np.int64)
    cdef long long[:] cur = np.zeros(m + 1, dtype=np.int64)
    cdef long long[:] tmp
    cdef long long ai
    for i in range(n):
        ai = a[i]
        cur[0] = 0
        for j in range(m):
            if ai == b[j]:
                cur[j + 1] = prev[j] + 1
            elif prev[j + 1] >= cur[j]:
                cur[j + 1] = prev[j + 1]
            else:
                cur[j + 1] = cur[j]
        tmp = prev
        prev = cur
        cur = tmp
    return int(prev[m])


def rbf_cross_sum(const double[:] a, const double[:] wa, const double[:] b,
                  const double[:] wb, double gamma):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    cdef double total = 0.0, row, ai, d
    for i in range(n):
        ai = a[i]
        row = 0.0
        for j in range(m):
            d = ai - b[j]
            row += wb[j] * exp(-gamma * d * d)
        total += wa[i] * row
    return total


cdef inline uint64_t _fnv_codepoint(uint64_t h, Py_UCS4 c):
    cdef unsigned int cp = <unsigned int>c
    cdef int k
    for k in range(4):
        h ^= (cp >> (8 * k)) & 0xFF
        h *= FNV_PRIME
    return h


def trigram_features(str text, int dim):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(dim, dtype=np.float64)
    cdef Py_ssize_t n = len(text), i, k, width
    cdef uint64_t h
    if n == 0:
        return out
    width = 3 if n >= 3 else n
    for i in range(n - width + 1):
        h = FNV_OFFSET
        for k in range(width):
            h = _fnv_codepoint(h, text[i + k])
        if (h >> 63) & 1:
            out[h % dim] -= 1.0
        else:
            out[h % dim] += 1.0
    return out
