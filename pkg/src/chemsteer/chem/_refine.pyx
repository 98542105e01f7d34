# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled colour refinement; see ``_refine_py`` for the reference version."""

from libc.stdlib cimport malloc, free, qsort
from libc.stdint cimport uint64_t, int64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef int64_t BOND_STRIDE = 1 << 20


cdef struct Keyed:
    int64_t color
    uint64_t h
    int64_t idx


cdef int cmp_keyed(const void* a, const void* b) noexcept nogil:
    cdef const Keyed* x = <const Keyed*>a
    cdef const Keyed* y = <const Keyed*>b
    if x.color != y.color:
        return -1 if x.color < y.color else 1
    if x.h != y.h:
        return -1 if x.h < y.h else 1
    if x.idx != y.idx:
        return -1 if x.idx < y.idx else 1
    return 0


cdef int cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef int64_t x = (<const int64_t*>a)[0]
    cdef int64_t y = (<const int64_t*>b)[0]
    return (x > y) - (x < y)


cdef inline uint64_t mix(uint64_t h, uint64_t v) noexcept nogil:
    h ^= v + GOLDEN + (h << 6) + (h >> 2)
    return h


cdef inline uint64_t finalize(uint64_t h) noexcept nogil:
    h ^= h >> 30
    h *= 0xBF58476D1CE4E5B9ULL
    h ^= h >> 27
    h *= 0x94D049BB133111EBULL
    h ^= h >> 31
    return h


def refine(indptr, indices, weights, colors):
    cdef Py_ssize_t n = len(colors)
    cdef Py_ssize_t m = len(indices)
    cdef Py_ssize_t i, e, k, deg, maxdeg = 0
    cdef int64_t* ptr = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    cdef int64_t* ind = <int64_t*>malloc((m + 1) * sizeof(int64_t))
    cdef int64_t* wt = <int64_t*>malloc((m + 1) * sizeof(int64_t))
    cdef int64_t* col = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    cdef Keyed* keyed = <Keyed*>malloc((n + 1) * sizeof(Keyed))
    cdef int64_t* vals
    cdef uint64_t h
    cdef int64_t rank, n_classes, prev_c
    cdef uint64_t prev_h
    if not ptr or not ind or not wt or not col or not keyed:
        raise MemoryError()
    try:
        for i in range(n + 1):
            ptr[i] = indptr[i]
        for e in range(m):
            ind[e] = indices[e]
            wt[e] = weights[e]
        for i in range(n):
            col[i] = colors[i]
            deg = ptr[i + 1] - ptr[i]
            if deg > maxdeg:
                maxdeg = deg
        vals = <int64_t*>malloc((maxdeg + 1) * sizeof(int64_t))
        if not vals:
            raise MemoryError()
        n_classes = len(set(colors))
        try:
            while True:
                for i in range(n):
                    deg = ptr[i + 1] - ptr[i]
                    for k in range(deg):
                        e = ptr[i] + k
                        vals[k] = wt[e] * BOND_STRIDE + col[ind[e]]
                    qsort(vals, deg, sizeof(int64_t), cmp_i64)
                    h = <uint64_t>col[i]
                    for k in range(deg):
                        h = mix(h, <uint64_t>vals[k])
                    keyed[i].color = col[i]
                    keyed[i].h = finalize(h)
                    keyed[i].idx = i
                qsort(keyed, n, sizeof(Keyed), cmp_keyed)
                rank = -1
                for k in range(n):
                    if k == 0 or keyed[k].color != prev_c or keyed[k].h != prev_h:
                        rank += 1
                        prev_c = keyed[k].color
                        prev_h = keyed[k].h
                    col[keyed[k].idx] = rank
                if rank + 1 == n_classes:
                    break
                n_classes = rank + 1
        finally:
            free(vals)
        return [col[i] for i in range(n)]
    finally:
        free(ptr)
        free(ind)
        free(wt)
        free(col)
        free(keyed)
