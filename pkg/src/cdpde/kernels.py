"""Structure tables for the Cayley-Dickson algebras and the kernel backend.

The doubling convention is fixed once and for all as

    (a, b) (c, d) = (a c - d* b,  d a + b c*)

which gives ``i1 * i2 = i3`` on the quaternions.  Products of basis
generators satisfy ``i_j i_k = sign[j, k] * i_{j XOR k}``; the tables are
built by recursing the doubling and are frozen into a golden CSV shipped
with the package.

A compiled extension (``_kernels_cy``) provides the batched product loops;
a NumPy implementation is used when the extension is unavailable or when
``CDPDE_FORCE_PYTHON=1`` is set.
"""
import os
from functools import lru_cache

import numpy as np

if os.environ.get("CDPDE_FORCE_PYTHON") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

MAX_LEVEL = 4
MIN_LEVEL = 2


def dim(level: int) -> int:
    return 1 << level


@lru_cache(maxsize=None)
def sign_table(level: int) -> np.ndarray:
    """(d, d) table with i_j * i_k = sign_table[j, k] * i_{j ^ k}."""
    d = dim(level)
    s = np.ones((1, 1))
    h = 1
    while h < d:
        conj_sign = np.full(h, -1.0)
        conj_sign[0] = 1.0
        new = np.zeros((2 * h, 2 * h))
        for j in range(h):
            for k in range(h):
                new[j, k] = s[j, k]
                new[j, k + h] = s[k, j]
                new[j + h, k] = conj_sign[k] * s[j, k]
                new[j + h, k + h] = -conj_sign[k] * s[k, j]
        s = new
        h *= 2
    s.setflags(write=False)
    return s


@lru_cache(maxsize=None)
def index_table(level: int) -> np.ndarray:
    d = dim(level)
    j = np.arange(d)
    t = (j[:, None] ^ j[None, :]).astype(np.int64)
    t.setflags(write=False)
    return t


@lru_cache(maxsize=None)
def structure_tensor(level: int) -> np.ndarray:
    """Dense (d, d, d) tensor C with (a*b)[l] = sum_{jk} C[j,k,l] a[j] b[k]."""
    d = dim(level)
    C = np.zeros((d, d, d))
    s = sign_table(level)
    idx = index_table(level)
    for j in range(d):
        for k in range(d):
            C[j, k, idx[j, k]] = s[j, k]
    C.setflags(write=False)
    return C


def cd_mul(a: np.ndarray, b: np.ndarray, level: int) -> np.ndarray:
    """Cayley-Dickson product, broadcasting over leading axes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = dim(level)
    if a.shape[-1] != d or b.shape[-1] != d:
        raise ValueError(f"coefficient vectors must have length {d}")
    a_b, b_b = np.broadcast_arrays(a, b)
    lead = a_b.shape[:-1]
    af = np.ascontiguousarray(a_b.reshape(-1, d))
    bf = np.ascontiguousarray(b_b.reshape(-1, d))
    out = _impl.cd_mul_batch(af, bf, index_table(level), sign_table(level))
    return out.reshape(*lead, d)


def cd_matmul(A: np.ndarray, B: np.ndarray, level: int) -> np.ndarray:
    """(n, k, d) @ (k, m, d) matrix product over CD entries."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    if A.ndim != 3 or B.ndim != 3 or A.shape[1] != B.shape[0]:
        raise ValueError("shape mismatch in cd_matmul")
    return _impl.cd_matmul(A, B, index_table(level), sign_table(level))


def conj_vec(a: np.ndarray) -> np.ndarray:
    out = -np.asarray(a, dtype=np.float64).copy()
    out[..., 0] = a[..., 0]
    return out


@lru_cache(maxsize=None)
def basis(level: int, j: int) -> np.ndarray:
    e = np.zeros(dim(level))
    e[j] = 1.0
    e.setflags(write=False)
    return e
