# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: CART split search, tree traversal, linear-SVM dual coordinate descent.

Every function mirrors one in ``_kernels_py`` and must return identical results.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.string cimport memset

cnp.import_array()

ctypedef cnp.int64_t i64

cdef struct Pair:
    double v
    i64 c

cdef inline void _swap(Pair* a, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef Pair t = a[i]
    a[i] = a[j]
    a[j] = t


cdef void _sift_down(Pair* a, Py_ssize_t start, Py_ssize_t end) noexcept nogil:
    cdef Py_ssize_t root = start, child
    while 2 * root + 1 < end:
        child = 2 * root + 1
        if child + 1 < end and a[child].v < a[child + 1].v:
            child += 1
        if a[root].v < a[child].v:
            _swap(a, root, child)
            root = child
        else:
            return


cdef void _heapsort(Pair* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n // 2 - 1, -1, -1):
        _sift_down(a, i, n)
    for i in range(n - 1, 0, -1):
        _swap(a, 0, i)
        _sift_down(a, 0, i)


cdef void _introsort(Pair* a, Py_ssize_t n, int depth) noexcept nogil:
    # Sorts by value only; the order of equal values is irrelevant to split scoring.
    cdef Py_ssize_t i, j, mid
    cdef double pivot
    cdef Pair t
    while n > 16:
        if depth == 0:
            _heapsort(a, n)
            return
        depth -= 1
        mid = n // 2
        if a[mid].v < a[0].v:
            _swap(a, 0, mid)
        if a[n - 1].v < a[0].v:
            _swap(a, 0, n - 1)
        if a[n - 1].v < a[mid].v:
            _swap(a, mid, n - 1)
        pivot = a[mid].v
        i = 0
        j = n - 1
        while True:
            while a[i].v < pivot:
                i += 1
            while pivot < a[j].v:
                j -= 1
            if i >= j:
                break
            _swap(a, i, j)
            i += 1
            j -= 1
        _introsort(a, j + 1, depth)
        a += j + 1
        n -= j + 1
    for i in range(1, n):
        t = a[i]
        j = i
        while j > 0 and t.v < a[j - 1].v:
            a[j] = a[j - 1]
            j -= 1
        a[j] = t


cdef inline void _sort_pairs(Pair* a, Py_ssize_t n) noexcept nogil:
    cdef int depth = 0
    cdef Py_ssize_t m = n
    while m > 1:
        depth += 2
        m >>= 1
    _introsort(a, n, depth)


def best_split(const double[:, ::1] X, const i64[::1] y, const i64[::1] idx,
               const i64[::1] features, int n_classes):
    """Return (feature, threshold, score) of the best Gini split, or (-1, 0.0, -inf)."""
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t nf = features.shape[0]
    cdef Py_ssize_t i, j, k
    cdef i64 f, c
    cdef i64 best_f = -1
    cdef double best_t = 0.0
    cdef double best_s = -np.inf
    cdef double score, t
    cdef long long sumsq_l, sumsq_r, sumsq_tot = 0
    if n < 2:
        return -1, 0.0, best_s
    cdef Pair* pairs = <Pair*>malloc(n * sizeof(Pair))
    cdef i64* total = <i64*>malloc(n_classes * sizeof(i64))
    cdef i64* left = <i64*>malloc(n_classes * sizeof(i64))
    cdef i64* right = <i64*>malloc(n_classes * sizeof(i64))
    try:
        with nogil:
            memset(total, 0, n_classes * sizeof(i64))
            for i in range(n):
                total[y[idx[i]]] += 1
            for k in range(n_classes):
                sumsq_tot += total[k] * total[k]
            for j in range(nf):
                f = features[j]
                for i in range(n):
                    pairs[i].v = X[idx[i], f]
                    pairs[i].c = y[idx[i]]
                _sort_pairs(pairs, n)
                if not (pairs[0].v < pairs[n - 1].v):
                    continue
                for k in range(n_classes):
                    left[k] = 0
                    right[k] = total[k]
                sumsq_l = 0
                sumsq_r = sumsq_tot
                for i in range(n - 1):
                    c = pairs[i].c
                    sumsq_l += 2 * left[c] + 1
                    left[c] += 1
                    sumsq_r -= 2 * right[c] - 1
                    right[c] -= 1
                    if pairs[i].v < pairs[i + 1].v:
                        score = (<double>sumsq_l) / (<double>(i + 1)) + (<double>sumsq_r) / (<double>(n - i - 1))
                        if score > best_s:
                            best_s = score
                            best_f = f
                            t = (pairs[i].v + pairs[i + 1].v) / 2.0
                            if t >= pairs[i + 1].v:
                                t = pairs[i].v
                            best_t = t
    finally:
        free(pairs)
        free(total)
        free(left)
        free(right)
    return int(best_f), float(best_t), float(best_s)


def tree_apply(const double[:, ::1] X, const i64[::1] feature, const double[::1] threshold,
               const i64[::1] left, const i64[::1] right):
    """Index of the leaf reached by every row of ``X``."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i
    cdef i64 node
    out = np.empty(n, dtype=np.int64)
    cdef i64[::1] o = out
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            o[i] = node
    return out


def svm_dual_cd_epoch(const double[:, ::1] X, const double[::1] y, double[::1] alpha,
                      double[::1] w, const double[::1] qii, double C, const i64[::1] order):
    """One pass of dual coordinate descent for the L1-loss linear SVM.

    ``w`` has length d + 1; the last entry is the (regularised) bias whose
    feature is the constant 1. Returns (max, min) projected gradient.
    """
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t m = order.shape[0]
    cdef Py_ssize_t r, j
    cdef i64 i
    cdef double g, pg, a_old, a_new, delta
    cdef double pg_max = -np.inf
    cdef double pg_min = np.inf
    with nogil:
        for r in range(m):
            i = order[r]
            if qii[i] <= 0.0:
                continue
            g = w[d]
            for j in range(d):
                g = g + w[j] * X[i, j]
            g = y[i] * g - 1.0
            a_old = alpha[i]
            if a_old == 0.0:
                pg = g if g < 0.0 else 0.0
            elif a_old == C:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0:
                a_new = a_old - g / qii[i]
                if a_new < 0.0:
                    a_new = 0.0
                elif a_new > C:
                    a_new = C
                alpha[i] = a_new
                delta = (a_new - a_old) * y[i]
                for j in range(d):
                    w[j] = w[j] + delta * X[i, j]
                w[d] = w[d] + delta
    return pg_max, pg_min
