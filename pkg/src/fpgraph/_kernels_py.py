"""Pure-Python kernels: fallback used when the compiled extension is absent.

Every function mirrors its counterpart in ``_kernels.pyx`` operation for
operation (same loop nesting, same accumulation order, libm ``exp``), so the
two backends produce bit-identical float64 results.
"""

from math import exp

import numpy as np

BACKEND_NAME = "python"


def matmul(A, B):
    """Row-major matrix product of two 2-D float64 arrays."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    m, kk = A.shape
    k2, n = B.shape
    if kk != k2:
        raise ValueError(f"matmul shape mismatch: {A.shape} x {B.shape}")
    a = A.tolist()
    b = B.tolist()
    out = [[0.0] * n for _ in range(m)]
    for i in range(m):
        ai = a[i]
        oi = out[i]
        for k in range(kk):
            aik = ai[k]
            bk = b[k]
            for j in range(n):
                oi[j] += aik * bk[j]
    return np.array(out, dtype=np.float64).reshape(m, n)


def _leaky(x, slope):
    return x if x >= 0.0 else slope * x


def gat_forward(H, W, a, indptr, indices, ew, slope, use_w):
    """One attention layer over a graph given in CSR form.

    ``indptr``/``indices`` list each receiver's neighborhood (self-loop
    included); ``ew`` carries the per-entry edge feature (0 on self-loops).
    Returns (Hout, Z, alpha, pre): the updated features, the projected
    features, and the flat attention weights / pre-activation logits aligned
    with ``indices``.
    """
    n_nodes, n_in = H.shape
    n_out = W.shape[0]
    h = H.tolist()
    w = W.tolist()
    av = a.tolist()
    ptr = indptr.tolist()
    idx = indices.tolist()
    wts = ew.tolist()

    # Z[u] = W @ H[u]
    z = [[0.0] * n_out for _ in range(n_nodes)]
    for u in range(n_nodes):
        hu = h[u]
        zu = z[u]
        for d in range(n_out):
            wd = w[d]
            acc = 0.0
            for k in range(n_in):
                acc += wd[k] * hu[k]
            zu[d] = acc

    # per-node halves of the attention logit
    src = [0.0] * n_nodes
    dst = [0.0] * n_nodes
    for u in range(n_nodes):
        zu = z[u]
        s = 0.0
        t = 0.0
        for d in range(n_out):
            s += av[d] * zu[d]
            t += av[n_out + d] * zu[d]
        src[u] = s
        dst[u] = t

    nnz = ptr[n_nodes]
    pre = [0.0] * nnz
    alpha = [0.0] * nnz
    aw = av[2 * n_out] if use_w else 0.0
    for u in range(n_nodes):
        lo, hi = ptr[u], ptr[u + 1]
        for m in range(lo, hi):
            lg = src[u] + dst[idx[m]]
            if use_w:
                lg += aw * wts[m]
            pre[m] = lg
        # softmax over the neighborhood, max-subtracted for stability
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

    # Hout[u] = sigmoid( sum_v alpha * Z[v] )
    hout = [[0.0] * n_out for _ in range(n_nodes)]
    for u in range(n_nodes):
        ou = hout[u]
        for m in range(ptr[u], ptr[u + 1]):
            al = alpha[m]
            zv = z[idx[m]]
            for d in range(n_out):
                ou[d] += al * zv[d]
        for d in range(n_out):
            x = ou[d]
            if x >= 0.0:
                ou[d] = 1.0 / (1.0 + exp(-x))
            else:
                e = exp(x)
                ou[d] = e / (1.0 + e)

    return (
        np.array(hout, dtype=np.float64).reshape(n_nodes, n_out),
        np.array(z, dtype=np.float64).reshape(n_nodes, n_out),
        np.array(alpha, dtype=np.float64),
        np.array(pre, dtype=np.float64),
    )


def gat_backward(dHout, H, W, a, indptr, indices, ew, slope, use_w, Z, alpha, pre, Hout):
    """Gradients of one attention layer; returns (dH, dW, da)."""
    n_nodes, n_in = H.shape
    n_out = W.shape[0]
    dho = dHout.tolist()
    h = H.tolist()
    w = W.tolist()
    av = a.tolist()
    ptr = indptr.tolist()
    idx = indices.tolist()
    wts = ew.tolist()
    z = Z.tolist()
    al = alpha.tolist()
    pr = pre.tolist()
    ho = Hout.tolist()
    nnz = ptr[n_nodes]

    # through the sigmoid
    ds = [[0.0] * n_out for _ in range(n_nodes)]
    for u in range(n_nodes):
        du = dho[u]
        hu = ho[u]
        su = ds[u]
        for d in range(n_out):
            su[d] = du[d] * hu[d] * (1.0 - hu[d])

    # d(alpha) and the aggregation half of dZ
    dalpha = [0.0] * nnz
    dz = [[0.0] * n_out for _ in range(n_nodes)]
    for u in range(n_nodes):
        su = ds[u]
        for m in range(ptr[u], ptr[u + 1]):
            zv = z[idx[m]]
            acc = 0.0
            for d in range(n_out):
                acc += su[d] * zv[d]
            dalpha[m] = acc
    for u in range(n_nodes):
        su = ds[u]
        for m in range(ptr[u], ptr[u + 1]):
            am = al[m]
            dzv = dz[idx[m]]
            for d in range(n_out):
                dzv[d] += am * su[d]

    # softmax rows, then the LeakyReLU mask
    dpre = [0.0] * nnz
    for u in range(n_nodes):
        lo, hi = ptr[u], ptr[u + 1]
        dot = 0.0
        for m in range(lo, hi):
            dot += al[m] * dalpha[m]
        for m in range(lo, hi):
            g = al[m] * (dalpha[m] - dot)
            dpre[m] = g if pr[m] >= 0.0 else g * slope

    rowsum = [0.0] * n_nodes
    for u in range(n_nodes):
        acc = 0.0
        for m in range(ptr[u], ptr[u + 1]):
            acc += dpre[m]
        rowsum[u] = acc

    # attention-vector gradient and the logit halves of dZ
    da = [0.0] * len(av)
    for u in range(n_nodes):
        ru = rowsum[u]
        zu = z[u]
        dzu = dz[u]
        for d in range(n_out):
            da[d] += ru * zu[d]
            dzu[d] += ru * av[d]
    for u in range(n_nodes):
        for m in range(ptr[u], ptr[u + 1]):
            g = dpre[m]
            zv = z[idx[m]]
            dzv = dz[idx[m]]
            for d in range(n_out):
                da[n_out + d] += g * zv[d]
                dzv[d] += g * av[n_out + d]
    if use_w:
        acc = 0.0
        for m in range(nnz):
            acc += dpre[m] * wts[m]
        da[2 * n_out] = acc

    # through Z = H @ W^T
    dw = [[0.0] * n_in for _ in range(n_out)]
    for d in range(n_out):
        dwd = dw[d]
        for u in range(n_nodes):
            g = dz[u][d]
            hu = h[u]
            for k in range(n_in):
                dwd[k] += g * hu[k]
    dh = [[0.0] * n_in for _ in range(n_nodes)]
    for u in range(n_nodes):
        dzu = dz[u]
        dhu = dh[u]
        for d in range(n_out):
            g = dzu[d]
            wd = w[d]
            for k in range(n_in):
                dhu[k] += g * wd[k]

    return (
        np.array(dh, dtype=np.float64).reshape(n_nodes, n_in),
        np.array(dw, dtype=np.float64).reshape(n_out, n_in),
        np.array(da, dtype=np.float64),
    )
