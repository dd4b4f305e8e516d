# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: FIFO multi-server service loop and fast
non-dominated sorting.  Mirrors portslot._pykernels exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline void _heap_push(double* heap, int* size, double value) nogil:
    cdef int i = size[0]
    cdef int parent
    heap[i] = value
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= heap[i]:
            break
        heap[parent], heap[i] = heap[i], heap[parent]
        i = parent


cdef inline double _heap_pop(double* heap, int* size) nogil:
    cdef double top = heap[0]
    cdef int n = size[0] - 1
    cdef int i = 0
    cdef int child
    heap[0] = heap[n]
    size[0] = n
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and heap[child + 1] < heap[child]:
            child += 1
        if heap[i] <= heap[child]:
            break
        heap[i], heap[child] = heap[child], heap[i]
        i = child
    return top


def serve_fifo(arrivals, services, int n_servers):
    """Serve jobs FIFO on ``n_servers`` identical servers.

    ``arrivals`` must be sorted ascending.  Returns (waits, departures).
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] arr = np.ascontiguousarray(arrivals, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] svc = np.ascontiguousarray(services, dtype=np.float64)
    if arr.shape[0] != svc.shape[0]:
        raise ValueError("arrivals and services must have equal length")
    if n_servers < 1:
        raise ValueError("n_servers must be >= 1")
    cdef Py_ssize_t n = arr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] waits = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] deps = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] heap_arr = np.zeros(n_servers, dtype=np.float64)
    cdef double* heap = <double*> heap_arr.data
    cdef int heap_size = n_servers
    cdef Py_ssize_t i
    cdef double t_arr, t_free, start, dep
    with nogil:
        for i in range(n):
            t_arr = arr[i]
            t_free = _heap_pop(heap, &heap_size)
            start = t_arr if t_arr > t_free else t_free
            waits[i] = start - t_arr
            dep = start + svc[i]
            deps[i] = dep
            _heap_push(heap, &heap_size, dep)
    return waits, deps


def nondomination_ranks(objectives):
    """Front index (0-based) per point, minimizing every column.

    Fast non-dominated sort: domination counts plus dominated-set lists.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] objs = np.ascontiguousarray(objectives, dtype=np.float64)
    cdef Py_ssize_t n = objs.shape[0]
    cdef Py_ssize_t m = objs.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ranks = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return ranks
    # adjacency: dom_list holds, per point, the indices it dominates
    cdef cnp.ndarray[cnp.int64_t, ndim=1] dom_count = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] dom_start = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] dom_list = np.empty(n * n, dtype=np.int64)
    cdef Py_ssize_t i, j, k, pos
    cdef bint i_le_j, i_lt_j, j_le_i, j_lt_i
    cdef double a, b
    pos = 0
    with nogil:
        for i in range(n):
            dom_start[i] = pos
            for j in range(n):
                if i == j:
                    continue
                i_le_j = True
                i_lt_j = False
                for k in range(m):
                    a = objs[i, k]
                    b = objs[j, k]
                    if a > b:
                        i_le_j = False
                        break
                    if a < b:
                        i_lt_j = True
                if i_le_j and i_lt_j:
                    dom_list[pos] = j
                    pos += 1
                    dom_count[j] += 1
        dom_start[n] = pos
    current = np.nonzero(dom_count == 0)[0].astype(np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cur
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nxt = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t n_next, front = 0
    cdef Py_ssize_t p, q
    cur = current
    while cur.shape[0] > 0:
        n_next = 0
        for i in range(cur.shape[0]):
            p = cur[i]
            ranks[p] = front
            for j in range(dom_start[p], dom_start[p + 1]):
                q = dom_list[j]
                dom_count[q] -= 1
                if dom_count[q] == 0:
                    nxt[n_next] = q
                    n_next += 1
        cur = np.sort(nxt[:n_next].copy())
        front += 1
    return ranks
