"""Cayley-Dickson numbers and small matrices over them.

Levels r = 2, 3, 4 (quaternions, octonions, sedenions).  Values are
immutable: every operation returns a fresh object and the underlying
buffers are marked read-only, so instances are safe to share freely.
"""
from __future__ import annotations

import io

import numpy as np

from . import kernels
from .kernels import MAX_LEVEL, MIN_LEVEL, dim


class LevelMismatchError(ValueError):
    pass


class ShapeMismatchError(ValueError):
    pass


def _check_level(level: int) -> int:
    if not (MIN_LEVEL <= level <= MAX_LEVEL):
        raise ValueError(f"algebra level must be in [{MIN_LEVEL}, {MAX_LEVEL}], got {level}")
    return int(level)


class CDNumber:
    """Element of A_r as a dense coefficient vector of length 2^r."""

    __slots__ = ("level", "coeffs")

    def __init__(self, level: int, coeffs):
        self.level = _check_level(level)
        c = np.array(coeffs, dtype=np.float64)
        if c.shape != (dim(level),):
            raise ValueError(f"expected {dim(level)} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        self.coeffs = c

    @classmethod
    def zero(cls, level: int) -> "CDNumber":
        return cls(level, np.zeros(dim(level)))

    @classmethod
    def one(cls, level: int) -> "CDNumber":
        return cls.generator(level, 0)

    @classmethod
    def generator(cls, level: int, j: int) -> "CDNumber":
        e = np.zeros(dim(level))
        e[j] = 1.0
        return cls(level, e)

    @classmethod
    def from_real(cls, level: int, x: float) -> "CDNumber":
        e = np.zeros(dim(level))
        e[0] = x
        return cls(level, e)

    def _coerce(self, other) -> "CDNumber":
        if isinstance(other, CDNumber):
            if other.level != self.level:
                raise LevelMismatchError(f"levels differ: {self.level} vs {other.level}")
            return other
        if np.isscalar(other):
            return CDNumber.from_real(self.level, float(other))
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return CDNumber(self.level, self.coeffs + o.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return CDNumber(self.level, self.coeffs - o.coeffs)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return CDNumber(self.level, o.coeffs - self.coeffs)

    def __neg__(self):
        return CDNumber(self.level, -self.coeffs)

    def __mul__(self, other):
        if np.isscalar(other):
            return CDNumber(self.level, self.coeffs * float(other))
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return CDNumber(self.level, kernels.cd_mul(self.coeffs, o.coeffs, self.level))

    def __rmul__(self, other):
        if np.isscalar(other):
            return CDNumber(self.level, self.coeffs * float(other))
        return NotImplemented

    def conj(self) -> "CDNumber":
        return CDNumber(self.level, kernels.conj_vec(self.coeffs))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def real(self) -> float:
        return float(self.coeffs[0])

    def inv(self) -> "CDNumber":
        n2 = float(self.coeffs @ self.coeffs)
        if n2 == 0.0:
            raise ZeroDivisionError("cannot invert zero Cayley-Dickson number")
        return CDNumber(self.level, kernels.conj_vec(self.coeffs) / n2)

    def is_real(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs[1:]) <= tol))

    def __eq__(self, other):
        if not isinstance(other, CDNumber):
            return NotImplemented
        return self.level == other.level and bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.level, self.coeffs.tobytes()))

    def __repr__(self):
        parts = []
        for j, c in enumerate(self.coeffs):
            if c != 0.0:
                parts.append(f"{c:g}*i{j}" if j else f"{c:g}")
        return "CD(" + (" + ".join(parts) if parts else "0") + ")"


def cd_mul(a: CDNumber, b: CDNumber) -> CDNumber:
    return a * b


def cd_conj(a: CDNumber) -> CDNumber:
    return a.conj()


def cd_norm(a: CDNumber) -> float:
    return a.norm()


def cd_inv(a: CDNumber) -> CDNumber:
    return a.inv()


def associator(a: CDNumber, b: CDNumber, c: CDNumber) -> CDNumber:
    """(ab)c - a(bc)."""
    if not (a.level == b.level == c.level):
        raise LevelMismatchError("associator arguments must share one level")
    return (a * b) * c - a * (b * c)


def commutator(a: CDNumber, b: CDNumber) -> CDNumber:
    return a * b - b * a


class CDMatrix:
    """n x n (or rectangular) matrix over A_r, entries stored (rows, cols, 2^r).

    ``real_only`` asserts every entry lies on the real axis; it is validated
    at construction and preserved where operations allow.
    """

    __slots__ = ("level", "entries", "real_only")

    MAX_N = 4

    def __init__(self, level: int, entries, real_only: bool = False):
        self.level = _check_level(level)
        e = np.array(entries, dtype=np.float64)
        if e.ndim != 3 or e.shape[2] != dim(level):
            raise ValueError("entries must have shape (rows, cols, 2^r)")
        if max(e.shape[0], e.shape[1]) > self.MAX_N:
            raise ValueError(f"matrix dimension capped at {self.MAX_N}")
        if real_only and np.any(e[:, :, 1:] != 0.0):
            raise ValueError("real_only matrix has non-real entries")
        e.setflags(write=False)
        self.entries = e
        self.real_only = bool(real_only)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def identity(cls, level: int, n: int) -> "CDMatrix":
        e = np.zeros((n, n, dim(level)))
        for i in range(n):
            e[i, i, 0] = 1.0
        return cls(level, e, real_only=True)

    @classmethod
    def zeros(cls, level: int, rows: int, cols: int) -> "CDMatrix":
        return cls(level, np.zeros((rows, cols, dim(level))), real_only=True)

    @classmethod
    def from_real(cls, level: int, mat) -> "CDMatrix":
        m = np.asarray(mat, dtype=np.float64)
        e = np.zeros((m.shape[0], m.shape[1], dim(level)))
        e[:, :, 0] = m
        return cls(level, e, real_only=True)

    @classmethod
    def from_number(cls, a: CDNumber) -> "CDMatrix":
        return cls(a.level, a.coeffs.reshape(1, 1, -1), real_only=a.is_real())

    def entry(self, i: int, j: int) -> CDNumber:
        return CDNumber(self.level, self.entries[i, j])

    def _check(self, other: "CDMatrix"):
        if other.level != self.level:
            raise LevelMismatchError("matrix levels differ")

    def __add__(self, other: "CDMatrix") -> "CDMatrix":
        self._check(other)
        if other.entries.shape != self.entries.shape:
            raise ShapeMismatchError("matrix shapes differ")
        return CDMatrix(self.level, self.entries + other.entries,
                        real_only=self.real_only and other.real_only)

    def __sub__(self, other: "CDMatrix") -> "CDMatrix":
        self._check(other)
        if other.entries.shape != self.entries.shape:
            raise ShapeMismatchError("matrix shapes differ")
        return CDMatrix(self.level, self.entries - other.entries,
                        real_only=self.real_only and other.real_only)

    def __neg__(self) -> "CDMatrix":
        return CDMatrix(self.level, -self.entries, real_only=self.real_only)

    def __matmul__(self, other: "CDMatrix") -> "CDMatrix":
        self._check(other)
        if self.cols != other.rows:
            raise ShapeMismatchError(
                f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        out = kernels.cd_matmul(self.entries, other.entries, self.level)
        return CDMatrix(self.level, out, real_only=self.real_only and other.real_only)

    def scale(self, alpha, side: str = "left") -> "CDMatrix":
        """Entrywise product with a scalar CDNumber or real, on the given side."""
        if np.isscalar(alpha):
            return CDMatrix(self.level, self.entries * float(alpha), real_only=self.real_only)
        if not isinstance(alpha, CDNumber):
            raise TypeError("scale expects a real or a CDNumber")
        if alpha.level != self.level:
            raise LevelMismatchError("scalar level differs from matrix level")
        flat = self.entries.reshape(-1, dim(self.level))
        a = np.broadcast_to(alpha.coeffs, flat.shape)
        if side == "left":
            out = kernels.cd_mul(a, flat, self.level)
        elif side == "right":
            out = kernels.cd_mul(flat, a, self.level)
        else:
            raise ValueError("side must be 'left' or 'right'")
        return CDMatrix(self.level, out.reshape(self.entries.shape),
                        real_only=self.real_only and alpha.is_real())

    def conj(self) -> "CDMatrix":
        return CDMatrix(self.level, kernels.conj_vec(self.entries), real_only=self.real_only)

    def norm(self) -> float:
        """Frobenius norm built from the entrywise Euclidean norms."""
        return float(np.linalg.norm(self.entries))

    def __eq__(self, other):
        if not isinstance(other, CDMatrix):
            return NotImplemented
        return self.level == other.level and bool(np.array_equal(self.entries, other.entries))

    def __hash__(self):
        return hash((self.level, self.entries.tobytes()))

    def __repr__(self):
        return f"CDMatrix(level={self.level}, shape={self.rows}x{self.cols})"


def mat_mul(a: CDMatrix, b: CDMatrix) -> CDMatrix:
    return a @ b


def mat_add(a: CDMatrix, b: CDMatrix) -> CDMatrix:
    return a + b


def mat_scale(m: CDMatrix, alpha, side: str = "left") -> CDMatrix:
    return m.scale(alpha, side=side)


def generator_table_csv(level: int) -> str:
    """Generator multiplication table as CSV text.

    Cell (j, k) holds the signed index s of i_j * i_k = sign * i_{|s|-1}...
    encoded as ``+m`` / ``-m`` where m = j XOR k, so ``i_j i_k = (sign) i_m``.
    """
    _check_level(level)
    d = dim(level)
    sign = kernels.sign_table(level)
    idx = kernels.index_table(level)
    buf = io.StringIO()
    buf.write("j\\k," + ",".join(str(k) for k in range(d)) + "\r\n")
    for j in range(d):
        cells = []
        for k in range(d):
            s = "+" if sign[j, k] > 0 else "-"
            cells.append(f"{s}{idx[j, k]}")
        buf.write(str(j) + "," + ",".join(cells) + "\r\n")
    return buf.getvalue()
