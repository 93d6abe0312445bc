"""NumPy reference kernels for batched Cayley-Dickson products.

Same call signatures as the compiled extension; selected as fallback in
:mod:`cdpde.kernels`.
"""
import numpy as np


def cd_mul_batch(a, b, idx, sign):
    """Batched Cayley-Dickson product of coefficient vectors.

    a, b: (N, d) float64; idx, sign: (d, d) structure tables.
    Returns (N, d).
    """
    d = idx.shape[0]
    out = np.zeros_like(a)
    for j in range(d):
        aj = a[:, j]
        row_idx = idx[j]
        row_sign = sign[j]
        for k in range(d):
            out[:, row_idx[k]] += row_sign[k] * aj * b[:, k]
    return out


def cd_matmul(A, B, idx, sign):
    """Matrix product over Cayley-Dickson entries.

    A: (n, k, d), B: (k, m, d) -> (n, m, d) with the inner sum over the
    shared index taken after entrywise CD products (fixed association).
    """
    n, kk, d = A.shape
    m = B.shape[1]
    out = np.zeros((n, m, d))
    for j in range(d):
        row_idx = idx[j]
        row_sign = sign[j]
        Aj = A[:, :, j]
        for k in range(d):
            # (n,m) real matmul contributes to output component idx[j,k]
            out[:, :, row_idx[k]] += row_sign[k] * (Aj @ B[:, :, k])
    return out
