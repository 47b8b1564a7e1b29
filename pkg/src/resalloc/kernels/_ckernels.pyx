# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_pykernels`` for the contracts."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, isfinite

cnp.import_array()


def project_simplex_sorted(v, double budget):
    cdef cnp.ndarray[double, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0], i
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double s = 0.0, acc = 0.0, theta = 0.0, t
    for i in range(n):
        if vv[i] > 0.0:
            s += vv[i]
    if s <= budget:
        for i in range(n):
            out[i] = vv[i] if vv[i] > 0.0 else 0.0
        return out
    cdef cnp.ndarray[double, ndim=1] u = np.sort(vv)[::-1].copy()
    for i in range(n):
        acc += u[i]
        t = (acc - budget) / (i + 1.0)
        if u[i] - t > 0.0:
            theta = t
    for i in range(n):
        t = vv[i] - theta
        out[i] = t if t > 0.0 else 0.0
    return out


cdef inline double _clip(double x, double lo, double hi) nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def project_box_simplex(v, lower, upper, double budget):
    cdef cnp.ndarray[double, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] hi = np.ascontiguousarray(upper, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0], i, k, m
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double g0 = 0.0, tau0 = 0.0, tau, ge, e
    cdef long slope = 0
    for i in range(n):
        out[i] = _clip(vv[i], lo[i], hi[i])
        g0 += out[i]
    if g0 <= budget:
        return out
    # events: 2*i is "leaves upper bound", 2*i+1 is "reaches lower bound"
    cdef cnp.ndarray[double, ndim=1] ev = np.empty(2 * n, dtype=np.float64)
    for i in range(n):
        ev[2 * i] = vv[i] - hi[i]
        ev[2 * i + 1] = vv[i] - lo[i]
        if ev[2 * i] <= 0.0 < ev[2 * i + 1]:
            slope += 1
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.argsort(ev, kind="mergesort")
    tau = -1.0
    m = 2 * n
    for k in range(m):
        e = ev[order[k]]
        if not isfinite(e) or e <= 0.0:
            continue
        ge = g0 - slope * (e - tau0)
        if ge <= budget:
            tau = tau0 + (g0 - budget) / slope
            break
        tau0 = e
        g0 = ge
        if order[k] % 2 == 0:
            slope += 1
        else:
            slope -= 1
    if tau < 0.0:
        if slope > 0:
            tau = tau0 + (g0 - budget) / slope
        else:
            tau = tau0
    for i in range(n):
        out[i] = _clip(vv[i] - tau, lo[i], hi[i])
    return out


def hungarian_min(cost):
    cdef cnp.ndarray[double, ndim=2] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], i, j, j0, j1, i0
    cdef double delta, cur
    cdef cnp.ndarray[double, ndim=1] u = np.zeros(n + 1)
    cdef cnp.ndarray[double, ndim=1] v = np.zeros(n + 1)
    cdef cnp.ndarray[double, ndim=1] minv = np.empty(n + 1)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] p = np.zeros(n + 1, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] way = np.zeros(n + 1, dtype=np.intp)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] used = np.zeros(n + 1, dtype=np.uint8)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    cdef cnp.ndarray[cnp.intp_t, ndim=1] assignment = np.empty(n, dtype=np.intp)
    for j in range(1, n + 1):
        assignment[p[j] - 1] = j - 1
    return assignment
