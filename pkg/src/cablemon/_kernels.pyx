# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Mirrors ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def dwt_step(x, lo, hi):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] lov = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] hiv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t m = xv.shape[0], n = xv.shape[1], half = n // 2
    cdef Py_ssize_t L = lov.shape[0]
    a_arr = np.zeros((m, half))
    d_arr = np.zeros((m, half))
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] d = d_arr
    cdef Py_ssize_t r, k, j, idx
    cdef Py_ssize_t off = L // 2 - 1
    cdef double sa, sd, v
    with nogil:
        for r in range(m):
            for k in range(half):
                sa = 0.0
                sd = 0.0
                for j in range(L):
                    idx = (2 * k + j - off) % n
                    if idx < 0:
                        idx = idx + n
                    v = xv[r, idx]
                    sa = sa + lov[j] * v
                    sd = sd + hiv[j] * v
                a[r, k] = sa
                d[r, k] = sd
    return a_arr, d_arr


def idwt_step(a, d, lo, hi):
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef double[::1] lov = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] hiv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t m = av.shape[0], half = av.shape[1], n = 2 * half
    cdef Py_ssize_t L = lov.shape[0]
    x_arr = np.zeros((m, n))
    cdef double[:, ::1] xv = x_arr
    cdef Py_ssize_t r, k, j, idx
    cdef Py_ssize_t off = L // 2 - 1
    cdef double ak, dk
    with nogil:
        for r in range(m):
            for k in range(half):
                ak = av[r, k]
                dk = dv[r, k]
                for j in range(L):
                    idx = (2 * k + j - off) % n
                    if idx < 0:
                        idx = idx + n
                    xv[r, idx] = xv[r, idx] + lov[j] * ak + hiv[j] * dk
    return x_arr


def find_peaks(x, double threshold, Py_ssize_t min_distance):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cand_list = []
    cdef Py_ssize_t i
    for i in range(n):
        if xv[i] <= threshold:
            continue
        if i > 0 and not (xv[i] > xv[i - 1]):
            continue
        if i < n - 1 and not (xv[i] >= xv[i + 1]):
            continue
        cand_list.append(i)
    cdef Py_ssize_t nc = len(cand_list)
    if nc == 0:
        return np.zeros(0, dtype=np.int64)
    cand_arr = np.asarray(cand_list, dtype=np.int64)
    heights = np.asarray(xv)[cand_arr]
    order_arr = np.argsort(-heights, kind="stable").astype(np.int64)
    keep_arr = np.ones(nc, dtype=np.uint8)
    cdef cnp.int64_t[::1] cand = cand_arr
    cdef cnp.int64_t[::1] order = order_arr
    cdef unsigned char[::1] keep = keep_arr
    cdef Py_ssize_t oi, c, k, pos
    for oi in range(nc):
        c = order[oi]
        if not keep[c]:
            continue
        pos = cand[c]
        k = c - 1
        while k >= 0 and pos - cand[k] < min_distance:
            keep[k] = 0
            k -= 1
        k = c + 1
        while k < nc and cand[k] - pos < min_distance:
            keep[k] = 0
            k += 1
    return cand_arr[keep_arr.astype(bool)]


def half_widths(x, peaks):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.int64_t[::1] pv = np.ascontiguousarray(peaks, dtype=np.int64)
    cdef Py_ssize_t n = xv.shape[0], npk = pv.shape[0]
    lefts_arr = np.empty(npk)
    rights_arr = np.empty(npk)
    cdef double[::1] lefts = lefts_arr
    cdef double[::1] rights = rights_arr
    cdef Py_ssize_t k, p, i
    cdef double half, lo_v, hi_v
    for k in range(npk):
        p = pv[k]
        half = 0.5 * xv[p]
        i = p
        while i > 0 and xv[i - 1] > half:
            i -= 1
        if i == 0 and xv[0] > half:
            lefts[k] = 0.0
        else:
            lo_v = xv[i - 1]
            hi_v = xv[i]
            lefts[k] = (i - 1) + (half - lo_v) / (hi_v - lo_v)
        i = p
        while i < n - 1 and xv[i + 1] > half:
            i += 1
        if i == n - 1 and xv[n - 1] > half:
            rights[k] = <double>(n - 1)
        else:
            hi_v = xv[i]
            lo_v = xv[i + 1]
            rights[k] = i + (hi_v - half) / (hi_v - lo_v)
    return lefts_arr, rights_arr


def occurrence_acf(train, max_lag):
    cdef double[::1] t = np.ascontiguousarray(train, dtype=np.float64)
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t K = min(<Py_ssize_t>max_lag, n - 1)
    if K < 0:
        return np.zeros(0)
    out_arr = np.zeros(K + 1)
    cdef double[::1] out = out_arr
    # sparse trains: iterate over occupied bins only
    nz_arr = np.flatnonzero(np.asarray(t)).astype(np.int64)
    cdef cnp.int64_t[::1] nz = nz_arr
    cdef Py_ssize_t nnz = nz.shape[0], a, b, lag
    with nogil:
        for a in range(nnz):
            for b in range(a, nnz):
                lag = nz[b] - nz[a]
                if lag > K:
                    break
                out[lag] = out[lag] + t[nz[a]] * t[nz[b]]
        for lag in range(K + 1):
            out[lag] = out[lag] / (n - lag)
    return out_arr


def kalman_step(est, var, z, pred, double q, double r, double gate):
    cdef double[::1] ev = np.ascontiguousarray(est, dtype=np.float64).ravel()
    cdef double[::1] vv = np.ascontiguousarray(var, dtype=np.float64).ravel()
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64).ravel()
    cdef double[::1] pv = np.ascontiguousarray(pred, dtype=np.float64).ravel()
    cdef Py_ssize_t n = zv.shape[0], i
    new_est_arr = np.empty(n)
    new_var_arr = np.empty(n)
    innov_arr = np.empty(n)
    flag_arr = np.zeros(n, dtype=bool)
    cdef double[::1] ne = new_est_arr
    cdef double[::1] nv = new_var_arr
    cdef double[::1] inn = innov_arr
    cdef cnp.npy_bool[::1] fl = flag_arr
    cdef double p_pred, nu, s, gain
    for i in range(n):
        p_pred = vv[i] + q
        nu = zv[i] - pv[i]
        s = p_pred + r
        inn[i] = nu
        if fabs(nu) > gate * sqrt(s):
            fl[i] = 1
            ne[i] = pv[i]
            nv[i] = p_pred
        else:
            gain = p_pred / s
            ne[i] = pv[i] + gain * nu
            nv[i] = (1.0 - gain) * p_pred
    shape = np.shape(z)
    return (new_est_arr.reshape(shape), new_var_arr.reshape(shape),
            innov_arr.reshape(shape), flag_arr.reshape(shape))
