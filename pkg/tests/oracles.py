"""Independent oracles for the test suite.

These deliberately avoid the production code paths: multiplication recurses
on coefficient-vector halves instead of using structure tables, derivatives
use central finite differences, and 1-d integrals use exact antiderivatives
of t^k e^(mu t).
"""
import numpy as np


def conj_vec(a):
    out = -np.asarray(a, dtype=np.float64).copy()
    out[0] = a[0]
    return out


def mul_recursive(a, b):
    """Doubling-construction product on plain coefficient vectors:
    (a1, a2)(b1, b2) = (a1 b1 - b2* a2, b2 a1 + a2 b1*)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = len(a)
    if n == 1:
        return a * b
    h = n // 2
    a1, a2 = a[:h], a[h:]
    b1, b2 = b[:h], b[h:]
    lo = mul_recursive(a1, b1) - mul_recursive(conj_vec(b2), a2)
    hi = mul_recursive(b2, a1) + mul_recursive(a2, conj_vec(b1))
    return np.concatenate([lo, hi])


def matmul_entrywise(A, B):
    """Matrix product over hypercomplex entries by explicit loops."""
    n, k, d = A.shape
    m = B.shape[1]
    out = np.zeros((n, m, d))
    for i in range(n):
        for j in range(m):
            acc = np.zeros(d)
            for l in range(k):
                acc = acc + mul_recursive(A[i, l], B[l, j])
            out[i, j] = acc
    return out


def fd_partial(f, x, coord, h=1e-4):
    """Fourth-order central difference of a vector-valued function."""
    e = np.zeros_like(x)
    e[coord] = 1.0
    return (-f(x + 2 * h * e) + 8 * f(x + h * e)
            - 8 * f(x - h * e) + f(x - 2 * h * e)) / (12 * h)


def exp_poly_integral(k: int, mu: float, a: float, b: float) -> float:
    """Exact integral_a^b t^k e^(mu t) dt (b may be inf when mu < 0)."""
    def anti(t):
        # antiderivative via integration by parts, evaluated at finite t
        acc = 0.0
        coeff = 1.0
        for j in range(k, -1, -1):
            term = coeff * t ** j / mu
            acc += term if (k - j) % 2 == 0 else term
            coeff *= -j / mu
        # rebuild: d/dt sum_j c_j t^j e^{mu t}; do it by explicit recursion
        return acc

    if mu == 0.0:
        if np.isinf(b):
            raise ValueError("divergent")
        return (b ** (k + 1) - a ** (k + 1)) / (k + 1)
    # recursion: I_k(a, b) = [t^k e^{mu t}/mu]_a^b - (k/mu) I_{k-1}
    def upper(t):
        return 0.0 if np.isinf(t) and mu < 0 else t

    def ik(kk):
        if kk == 0:
            hi = 0.0 if np.isinf(b) else np.exp(mu * b)
            return (hi - np.exp(mu * a)) / mu
        hi = 0.0 if np.isinf(b) else b ** kk * np.exp(mu * b)
        return (hi - a ** kk * np.exp(mu * a)) / mu - (kk / mu) * ik(kk - 1)

    return ik(k)
