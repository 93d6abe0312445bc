# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for batched Cayley-Dickson products."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def cd_mul_batch(const double[:, ::1] a, const double[:, ::1] b,
                 const long[:, ::1] idx, const double[:, ::1] sign):
    cdef Py_ssize_t N = a.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    cdef cnp.ndarray[double, ndim=2] out_arr = np.zeros((N, d))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k, tgt
    cdef double s
    for j in range(d):
        for k in range(d):
            tgt = idx[j, k]
            s = sign[j, k]
            for i in range(N):
                out[i, tgt] += s * a[i, j] * b[i, k]
    return out_arr


def cd_matmul(const double[:, :, ::1] A, const double[:, :, ::1] B,
              const long[:, ::1] idx, const double[:, ::1] sign):
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t kk = A.shape[1]
    cdef Py_ssize_t d = A.shape[2]
    cdef Py_ssize_t m = B.shape[1]
    cdef cnp.ndarray[double, ndim=3] out_arr = np.zeros((n, m, d))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, p, q, j, k, tgt
    cdef double s, acc
    for i in range(n):
        for q in range(m):
            for j in range(d):
                for k in range(d):
                    tgt = idx[j, k]
                    s = sign[j, k]
                    acc = 0.0
                    for p in range(kk):
                        acc += A[i, p, j] * B[p, q, k]
                    out[i, q, tgt] += s * acc
    return out_arr
