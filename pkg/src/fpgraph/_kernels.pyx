# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the hot inner loops.

Semantics must stay bit-identical to ``_kernels_py``: same loop nesting, same
accumulation order, libm ``exp``. The build passes -ffp-contract=off so the C
compiler cannot fuse a*b+c into FMA and break parity with the interpreter.
"""

from libc.math cimport exp
from libc.stdint cimport int64_t

import numpy as np

BACKEND_NAME = "compiled"


cdef inline double _leaky(double x, double slope) nogil:
    return x if x >= 0.0 else slope * x


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def matmul(A, B):
    """Row-major matrix product of two 2-D float64 arrays."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"matmul shape mismatch: {A.shape} x {B.shape}")
    cdef double[:, ::1] a = A
    cdef double[:, ::1] b = B
    cdef Py_ssize_t m = a.shape[0], kk = a.shape[1], n = b.shape[1]
    out_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double aik
    with nogil:
        for i in range(m):
            for k in range(kk):
                aik = a[i, k]
                for j in range(n):
                    out[i, j] += aik * b[k, j]
    return out_arr


def gat_forward(H, W, a, indptr, indices, ew, double slope, bint use_w):
    """One attention layer over a graph given in CSR form.

    Same contract as the fallback: returns (Hout, Z, alpha, pre).
    """
    cdef double[:, ::1] h = np.ascontiguousarray(H, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef int64_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] wts = np.ascontiguousarray(ew, dtype=np.float64)

    cdef Py_ssize_t n_nodes = h.shape[0], n_in = h.shape[1], n_out = w.shape[0]
    cdef Py_ssize_t nnz = ptr[n_nodes]

    z_arr = np.empty((n_nodes, n_out), dtype=np.float64)
    src_arr = np.empty(n_nodes, dtype=np.float64)
    dst_arr = np.empty(n_nodes, dtype=np.float64)
    pre_arr = np.empty(nnz, dtype=np.float64)
    alpha_arr = np.empty(nnz, dtype=np.float64)
    hout_arr = np.zeros((n_nodes, n_out), dtype=np.float64)
    cdef double[:, ::1] z = z_arr
    cdef double[::1] src = src_arr
    cdef double[::1] dst = dst_arr
    cdef double[::1] pre = pre_arr
    cdef double[::1] alpha = alpha_arr
    cdef double[:, ::1] hout = hout_arr

    cdef Py_ssize_t u, d, k, m, lo, hi
    cdef double acc, s, t, aw, lg, mx, lam, tot, e, x, al

    aw = av[2 * n_out] if use_w else 0.0
    with nogil:
        for u in range(n_nodes):
            for d in range(n_out):
                acc = 0.0
                for k in range(n_in):
                    acc += w[d, k] * h[u, k]
                z[u, d] = acc

        for u in range(n_nodes):
            s = 0.0
            t = 0.0
            for d in range(n_out):
                s += av[d] * z[u, d]
                t += av[n_out + d] * z[u, d]
            src[u] = s
            dst[u] = t

        for u in range(n_nodes):
            lo = ptr[u]
            hi = ptr[u + 1]
            for m in range(lo, hi):
                lg = src[u] + dst[idx[m]]
                if use_w:
                    lg += aw * wts[m]
                pre[m] = lg
            mx = _leaky(pre[lo], slope)
            for m in range(lo + 1, hi):
                lam = _leaky(pre[m], slope)
                if lam > mx:
                    mx = lam
            tot = 0.0
            for m in range(lo, hi):
                e = exp(_leaky(pre[m], slope) - mx)
                alpha[m] = e
                tot += e
            for m in range(lo, hi):
                alpha[m] /= tot

        for u in range(n_nodes):
            for m in range(ptr[u], ptr[u + 1]):
                al = alpha[m]
                for d in range(n_out):
                    hout[u, d] += al * z[idx[m], d]
            for d in range(n_out):
                hout[u, d] = _sigmoid(hout[u, d])

    return hout_arr, z_arr, alpha_arr, pre_arr


def gat_backward(dHout, H, W, a, indptr, indices, ew, double slope, bint use_w,
                 Z, alpha, pre, Hout):
    """Gradients of one attention layer; returns (dH, dW, da)."""
    cdef double[:, ::1] dho = np.ascontiguousarray(dHout, dtype=np.float64)
    cdef double[:, ::1] h = np.ascontiguousarray(H, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef int64_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] wts = np.ascontiguousarray(ew, dtype=np.float64)
    cdef double[:, ::1] z = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef double[::1] pr = np.ascontiguousarray(pre, dtype=np.float64)
    cdef double[:, ::1] ho = np.ascontiguousarray(Hout, dtype=np.float64)

    cdef Py_ssize_t n_nodes = h.shape[0], n_in = h.shape[1], n_out = w.shape[0]
    cdef Py_ssize_t nnz = ptr[n_nodes]

    ds_arr = np.empty((n_nodes, n_out), dtype=np.float64)
    dalpha_arr = np.empty(nnz, dtype=np.float64)
    dz_arr = np.zeros((n_nodes, n_out), dtype=np.float64)
    dpre_arr = np.empty(nnz, dtype=np.float64)
    rowsum_arr = np.empty(n_nodes, dtype=np.float64)
    da_arr = np.zeros(av.shape[0], dtype=np.float64)
    dw_arr = np.zeros((n_out, n_in), dtype=np.float64)
    dh_arr = np.zeros((n_nodes, n_in), dtype=np.float64)
    cdef double[:, ::1] ds = ds_arr
    cdef double[::1] dalpha = dalpha_arr
    cdef double[:, ::1] dz = dz_arr
    cdef double[::1] dpre = dpre_arr
    cdef double[::1] rowsum = rowsum_arr
    cdef double[::1] da = da_arr
    cdef double[:, ::1] dw = dw_arr
    cdef double[:, ::1] dh = dh_arr

    cdef Py_ssize_t u, d, k, m, lo, hi, v
    cdef double acc, dot, g, am, ru

    with nogil:
        for u in range(n_nodes):
            for d in range(n_out):
                ds[u, d] = dho[u, d] * ho[u, d] * (1.0 - ho[u, d])

        for u in range(n_nodes):
            for m in range(ptr[u], ptr[u + 1]):
                v = idx[m]
                acc = 0.0
                for d in range(n_out):
                    acc += ds[u, d] * z[v, d]
                dalpha[m] = acc
        for u in range(n_nodes):
            for m in range(ptr[u], ptr[u + 1]):
                am = al[m]
                v = idx[m]
                for d in range(n_out):
                    dz[v, d] += am * ds[u, d]

        for u in range(n_nodes):
            lo = ptr[u]
            hi = ptr[u + 1]
            dot = 0.0
            for m in range(lo, hi):
                dot += al[m] * dalpha[m]
            for m in range(lo, hi):
                g = al[m] * (dalpha[m] - dot)
                dpre[m] = g if pr[m] >= 0.0 else g * slope

        for u in range(n_nodes):
            acc = 0.0
            for m in range(ptr[u], ptr[u + 1]):
                acc += dpre[m]
            rowsum[u] = acc

        for u in range(n_nodes):
            ru = rowsum[u]
            for d in range(n_out):
                da[d] += ru * z[u, d]
                dz[u, d] += ru * av[d]
        for u in range(n_nodes):
            for m in range(ptr[u], ptr[u + 1]):
                g = dpre[m]
                v = idx[m]
                for d in range(n_out):
                    da[n_out + d] += g * z[v, d]
                    dz[v, d] += g * av[n_out + d]
        if use_w:
            acc = 0.0
            for m in range(nnz):
                acc += dpre[m] * wts[m]
            da[2 * n_out] = acc

        for d in range(n_out):
            for u in range(n_nodes):
                g = dz[u, d]
                for k in range(n_in):
                    dw[d, k] += g * h[u, k]
        for u in range(n_nodes):
            for d in range(n_out):
                g = dz[u, d]
                for k in range(n_in):
                    dh[u, k] += g * w[d, k]

    return dh_arr, dw_arr, da_arr
