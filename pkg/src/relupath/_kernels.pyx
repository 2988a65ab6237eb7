# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. ``_kernels_py`` mirrors every function here."""

import numpy as np


def pattern_sups(const double[:, ::1] lo, const double[:, ::1] hi):
    """Row-wise ``max_a (lo[p1, a] + hi[p2, a])`` for every (p2, p1).

    Output index is ``p2 * lo.shape[0] + p1``.
    """
    cdef Py_ssize_t nlo = lo.shape[0]
    cdef Py_ssize_t nhi = hi.shape[0]
    cdef Py_ssize_t m = lo.shape[1]
    cdef Py_ssize_t p1, p2, a
    cdef double best, s
    if m == 0 or hi.shape[1] != m:
        raise ValueError("lo and hi must share a nonzero column count")
    out = np.empty(nlo * nhi, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for p2 in range(nhi):
            for p1 in range(nlo):
                best = lo[p1, 0] + hi[p2, 0]
                for a in range(1, m):
                    s = lo[p1, a] + hi[p2, a]
                    if s > best:
                        best = s
                o[p2 * nlo + p1] = best
    return out


cdef double _path_dfs(const double* buf, const Py_ssize_t* offsets,
                      const Py_ssize_t* ncols, Py_ssize_t level,
                      Py_ssize_t depth, Py_ssize_t row, double prod) noexcept nogil:
    cdef Py_ssize_t base = offsets[level] + row * ncols[level]
    cdef Py_ssize_t j
    cdef double total = 0.0
    if level == depth - 1:
        for j in range(ncols[level]):
            total += prod * buf[base + j]
        return total
    for j in range(ncols[level]):
        total += _path_dfs(buf, offsets, ncols, level + 1, depth, j,
                           prod * buf[base + j])
    return total


def path_product_sum(list mats):
    """Sum over every root-to-input path of the product of its edge weights.

    ``mats`` is outermost-first; ``mats[0]`` has a single row.
    """
    cdef Py_ssize_t depth = len(mats)
    if depth == 0:
        raise ValueError("need at least one weight matrix")
    arrays = [np.ascontiguousarray(m, dtype=np.float64) for m in mats]
    offs = np.zeros(depth, dtype=np.intp)
    cols = np.zeros(depth, dtype=np.intp)
    cdef Py_ssize_t k, pos = 0
    for k in range(depth):
        offs[k] = pos
        cols[k] = arrays[k].shape[1]
        pos += arrays[k].size
    flat = np.concatenate([a.ravel() for a in arrays])
    cdef const double[::1] buf = flat
    cdef const Py_ssize_t[::1] o = offs
    cdef const Py_ssize_t[::1] c = cols
    cdef double total
    with nogil:
        total = _path_dfs(&buf[0], &o[0], &c[0], 0, depth, 0, 1.0)
    return total


def greedy_pack(const double[:, ::1] vals, double eps2):
    """Indices admitted by a sequential greedy packing.

    A row is admitted iff its squared distance to every admitted row
    exceeds ``eps2``.
    """
    cdef Py_ssize_t n = vals.shape[0]
    cdef Py_ssize_t dim = vals.shape[1]
    cdef Py_ssize_t i, c, k, count = 0
    cdef double diff, dist
    cdef bint ok
    centers = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] cen = centers
    with nogil:
        for i in range(n):
            ok = True
            for c in range(count):
                dist = 0.0
                for k in range(dim):
                    diff = vals[i, k] - vals[cen[c], k]
                    dist += diff * diff
                if dist <= eps2:
                    ok = False
                    break
            if ok:
                cen[count] = i
                count += 1
    return centers[:count].copy()
