# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled split search, presorted partition and tree traversal."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def best_split(const double[:, ::1] X, const signed char[::1] y, const cnp.intp_t[:, ::1] order,
               Py_ssize_t start, Py_ssize_t end, const cnp.intp_t[::1] features, Py_ssize_t min_leaf):
    cdef Py_ssize_t n = end - start
    cdef Py_ssize_t best_f = -1, k, f, i, row, nxt
    cdef double best_score = INFINITY, best_thr = 0.0, score, v, vn, thr
    cdef long long p_tot = 0, pl, nl, nr, pr
    with nogil:
        for i in range(start, end):
            p_tot += y[order[0, i]]
        for k in range(features.shape[0]):
            f = features[k]
            pl = 0
            for i in range(start, end - 1):
                row = order[f, i]
                nxt = order[f, i + 1]
                pl += y[row]
                nl = i - start + 1
                nr = n - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                v = X[row, f]
                vn = X[nxt, f]
                if not v < vn:
                    continue
                pr = p_tot - pl
                score = <double>(pl * (nl - pl)) / nl + <double>(pr * (nr - pr)) / nr
                if score < best_score:
                    thr = 0.5 * (v + vn)
                    if thr >= vn:
                        thr = v
                    best_score = score
                    best_thr = thr
                    best_f = f
    return best_f, best_thr, best_score


def partition(cnp.intp_t[:, ::1] order, const double[:, ::1] X, Py_ssize_t start, Py_ssize_t end,
              Py_ssize_t feature, double threshold):
    """Stable-partition every feature's segment by ``X[:, feature] <= threshold``.

    Returns the size of the left part.
    """
    cdef Py_ssize_t d = order.shape[0], m = order.shape[1]
    cdef Py_ssize_t f, i, row, a, b, n_left = 0
    cdef unsigned char[::1] left = np.zeros(m, dtype=np.uint8)
    cdef cnp.intp_t[::1] buf = np.empty(end - start, dtype=np.intp)
    with nogil:
        for i in range(start, end):
            row = order[feature, i]
            if X[row, feature] <= threshold:
                left[row] = 1
                n_left += 1
        for f in range(d):
            a = start
            b = 0
            for i in range(start, end):
                row = order[f, i]
                if left[row]:
                    order[f, a] = row
                    a += 1
                else:
                    buf[b] = row
                    b += 1
            for i in range(b):
                order[f, a + i] = buf[i]
    return n_left


def predict(const cnp.intp_t[::1] feature, const double[::1] threshold, const cnp.intp_t[::1] left,
            const cnp.intp_t[::1] right, const double[::1] value, const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], i, node
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            res[i] = value[node]
    return out
