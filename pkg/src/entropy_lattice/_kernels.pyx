# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: chunked signed log-sum-exp and alias-table sampling.

Mirrors ``_kernels_py`` operation for operation; summation order is strictly
left to right inside a chunk so results do not depend on vectorization.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, INFINITY

cnp.import_array()


cdef inline void _merge(int s1, double l1, int s2, double l2,
                        int* so, double* lo) noexcept nogil:
    cdef double mx, v
    if s1 == 0:
        so[0] = s2
        lo[0] = l2
        return
    if s2 == 0:
        so[0] = s1
        lo[0] = l1
        return
    mx = l1 if l1 > l2 else l2
    v = s1 * exp(l1 - mx) + s2 * exp(l2 - mx)
    if v == 0.0:
        so[0] = 0
        lo[0] = -INFINITY
    elif v > 0.0:
        so[0] = 1
        lo[0] = mx + log(v)
    else:
        so[0] = -1
        lo[0] = mx + log(-v)


def chunk_logsumexp(const double[::1] terms, const signed char[::1] signs,
                    Py_ssize_t chunk):
    """Per-chunk signed log-sum-exp. Returns (chunk_signs, chunk_logs)."""
    cdef Py_ssize_t n = terms.shape[0]
    cdef Py_ssize_t nchunks = (n + chunk - 1) // chunk
    cdef cnp.ndarray[cnp.int8_t, ndim=1] out_s = np.zeros(nchunks, dtype=np.int8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_l = np.full(nchunks, -np.inf)
    cdef Py_ssize_t c, i, start, stop
    cdef double mx, acc
    with nogil:
        for c in range(nchunks):
            start = c * chunk
            stop = start + chunk
            if stop > n:
                stop = n
            mx = -INFINITY
            for i in range(start, stop):
                if signs[i] != 0 and terms[i] > mx:
                    mx = terms[i]
            if mx == -INFINITY:
                continue
            acc = 0.0
            for i in range(start, stop):
                if signs[i] != 0:
                    acc = acc + signs[i] * exp(terms[i] - mx)
            if acc > 0.0:
                out_s[c] = 1
                out_l[c] = mx + log(acc)
            elif acc < 0.0:
                out_s[c] = -1
                out_l[c] = mx + log(-acc)
    return out_s, out_l


def tree_merge(const signed char[::1] signs, const double[::1] logs):
    """Pairwise merge of signed log magnitudes: ((0,1),(2,3),...) per level."""
    cdef Py_ssize_t n = signs.shape[0]
    if n == 0:
        return 0, -np.inf
    cdef cnp.ndarray[cnp.int32_t, ndim=1] s = np.asarray(signs, dtype=np.int32).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] l = np.asarray(logs, dtype=np.float64).copy()
    cdef Py_ssize_t k, j
    cdef int so
    cdef double lo
    while n > 1:
        k = 0
        j = 0
        while j + 1 < n:
            _merge(s[j], l[j], s[j + 1], l[j + 1], &so, &lo)
            s[k] = so
            l[k] = lo
            k += 1
            j += 2
        if j < n:
            s[k] = s[j]
            l[k] = l[j]
            k += 1
        n = k
    return int(s[0]), float(l[0])


def alias_build(const double[::1] probs):
    """Vose alias table. Returns (accept, alias)."""
    cdef Py_ssize_t K = probs.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] q = np.empty(K)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] J = np.arange(K, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] small = np.empty(K, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] large = np.empty(K, dtype=np.int64)
    cdef Py_ssize_t ns = 0, nl = 0, i, sm, lg
    for i in range(K):
        q[i] = K * probs[i]
        if q[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        sm = small[ns]
        nl -= 1
        lg = large[nl]
        J[sm] = lg
        q[lg] = (q[lg] + q[sm]) - 1.0
        if q[lg] < 1.0:
            small[ns] = lg
            ns += 1
        else:
            large[nl] = lg
            nl += 1
    while nl > 0:
        nl -= 1
        q[large[nl]] = 1.0
    while ns > 0:
        ns -= 1
        q[small[ns]] = 1.0
    return q, J


def alias_draw(const double[::1] q, const cnp.int64_t[::1] J,
               const double[::1] u_col, const double[::1] u_acc):
    cdef Py_ssize_t K = q.shape[0]
    cdef Py_ssize_t n = u_col.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i, k
    for i in range(n):
        k = <Py_ssize_t>(u_col[i] * K)
        if k >= K:
            k = K - 1
        out[i] = k if u_acc[i] < q[k] else J[k]
    return out
