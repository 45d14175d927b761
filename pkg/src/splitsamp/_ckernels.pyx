# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (see ``_pykernels`` for the contract)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport isnan

cnp.import_array()


cdef inline Py_ssize_t _bisect_right(const double[::1] a, double x,
                                     Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) // 2
        if x < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def locate(values, edges):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64).ravel()
    cdef const double[::1] e = np.ascontiguousarray(edges, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], ne = e.shape[0], i
    cdef Py_ssize_t n_cells = ne - 1
    cdef double x
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    with nogil:
        for i in range(n):
            x = v[i]
            if isnan(x) or x < e[0]:
                o[i] = -1
            elif x > e[ne - 1]:
                o[i] = n_cells
            elif x == e[ne - 1]:
                o[i] = n_cells - 1
            else:
                o[i] = _bisect_right(e, x, 0, ne) - 1
    return out.reshape(np.shape(values))


def reassign(lo, hi, cum, u):
    cdef const cnp.int64_t[::1] l = np.ascontiguousarray(lo, dtype=np.int64).ravel()
    cdef const cnp.int64_t[::1] h = np.ascontiguousarray(hi, dtype=np.int64).ravel()
    cdef const double[::1] c = np.ascontiguousarray(cum, dtype=np.float64)
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef Py_ssize_t n = l.shape[0], i, b
    cdef double target
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    with nogil:
        for i in range(n):
            target = c[l[i]] + uu[i] * (c[h[i]] - c[l[i]])
            b = _bisect_right(c, target, 0, c.shape[0]) - 1
            if b < l[i]:
                b = l[i]
            elif b > h[i] - 1:
                b = h[i] - 1
            o[i] = b
    return out.reshape(np.shape(lo))


def group_sums(groups, vals, Py_ssize_t n_groups):
    cdef const cnp.int64_t[::1] g = np.ascontiguousarray(groups, dtype=np.int64)
    arr = np.asarray(vals, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    cdef const double[:, ::1] v = np.ascontiguousarray(arr)
    cdef Py_ssize_t n = g.shape[0], p = v.shape[1], i, j, k
    sums = np.zeros((n_groups, p))
    counts = np.zeros(n_groups, dtype=np.int64)
    cdef double[:, ::1] sm = sums
    cdef cnp.int64_t[::1] ct = counts
    with nogil:
        for i in range(n):
            k = g[i]
            ct[k] += 1
            for j in range(p):
                sm[k, j] += v[i, j]
    return sums, counts


def scheme_sums(cells, groups, vals, key, Py_ssize_t n_keys, Py_ssize_t n_groups):
    cdef const cnp.int64_t[::1] c = np.ascontiguousarray(cells, dtype=np.int64)
    cdef const cnp.int64_t[::1] g = np.ascontiguousarray(groups, dtype=np.int64)
    arr = np.asarray(vals, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    cdef const double[:, ::1] v = np.ascontiguousarray(arr)
    cdef const cnp.int64_t[:, ::1] kk = np.ascontiguousarray(key, dtype=np.int64)
    cdef Py_ssize_t n_split = kk.shape[0], n = c.shape[0], p = v.shape[1]
    cdef Py_ssize_t s, i, j, k
    sums = np.zeros((n_split, n_keys, n_groups, p))
    counts = np.zeros((n_split, n_keys, n_groups), dtype=np.int64)
    cdef double[:, :, :, ::1] sm = sums
    cdef cnp.int64_t[:, :, ::1] ct = counts
    with nogil:
        for s in range(n_split):
            for i in range(n):
                k = kk[s, c[i]]
                ct[s, k, g[i]] += 1
                for j in range(p):
                    sm[s, k, g[i], j] += v[i, j]
    return sums, counts
