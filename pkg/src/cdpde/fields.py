"""Closed-form fields U -> Mat(A_r) and the Dirac-type operators acting on them.

A field is a finite sum of terms

    coef * monomial(coords) * exp(<rates, coords>)

over the flattened real coordinates of its argument slots (each slot is one
Cayley-Dickson argument of dimension 2^r, or a real parameter block).  The
class is closed under products, real partial derivatives, the sigma
operators, affine substitution of arguments and the sigma anti-derivative,
so every identity in the suite can be checked with exact calculus on one
side and numerics on the other.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import kernels
from .algebra import CDMatrix, CDNumber, LevelMismatchError, _check_level
from .kernels import dim

Monomial = tuple  # ((coord, power), ...), sorted by coord

_PRUNE = 1e-300


@dataclass(frozen=True)
class DiracSpec:
    """First-order operator sum_j i_j^* (d/dz_{xi(j)}) psi_j (or its
    right-multiplied twin when ``conjugated`` is set)."""

    level: int
    xi: tuple
    psi: tuple
    conjugated: bool = False

    def __post_init__(self):
        _check_level(self.level)
        d = dim(self.level)
        xi = tuple(int(j) for j in self.xi)
        psi = tuple(float(p) for p in self.psi)
        if sorted(xi) != list(range(d)):
            raise ValueError("xi must be a permutation of 0..2^r-1")
        if len(psi) != d:
            raise ValueError(f"psi must have length {d}")
        if sum(p * p for p in psi) <= 0.0:
            raise ValueError("psi must not vanish identically")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "psi", psi)

    @property
    def dim(self) -> int:
        return dim(self.level)

    def support(self) -> tuple:
        return tuple(j for j, p in enumerate(self.psi) if p != 0.0)

    def symbol(self, rates: np.ndarray) -> np.ndarray:
        """Lambda = sum_j psi_j rates[xi(j)] i_j^* as a coefficient vector.

        For an exponential field f = C exp(<rates, z>) one has
        sigma f = (Lambda C) f pointwise (left product).
        """
        d = self.dim
        lam = np.zeros(d)
        for j in range(d):
            v = self.psi[j] * rates[self.xi[j]]
            if j == 0:
                lam[0] += v
            else:
                lam[j] -= v
        return lam

    def conjugate_pair(self) -> "DiracSpec":
        return DiracSpec(self.level, self.xi, self.psi, not self.conjugated)


def identity_spec(level: int, psi=None, xi=None, conjugated: bool = False) -> DiracSpec:
    d = dim(level)
    if xi is None:
        xi = tuple(range(d))
    if psi is None:
        psi = tuple(1.0 for _ in range(d))
    return DiracSpec(level, tuple(xi), tuple(psi), conjugated)


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    acc = dict(a)
    for c, p in b:
        acc[c] = acc.get(c, 0) + p
    return tuple(sorted(acc.items()))


def _mono_degree(m: Monomial) -> int:
    return sum(p for _, p in m)


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            key = _mono_mul(ma, mb)
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def _linear_form_power(form: dict, const: float, power: int) -> dict:
    """Expand (sum_c form[c]*u_c + const)^power as a monomial dict."""
    poly = {(): 1.0}
    base = {((c, 1),): v for c, v in form.items() if v != 0.0}
    if const != 0.0:
        base[()] = base.get((), 0.0) + const
    for _ in range(power):
        poly = _poly_mul(poly, base)
    return poly


class Field:
    """Exponential-polynomial field with CDMatrix-valued coefficients."""

    __slots__ = ("level", "shape", "slot_dims", "_terms")

    def __init__(self, level: int, shape, slot_dims, terms=None):
        self.level = _check_level(level)
        self.shape = (int(shape[0]), int(shape[1]))
        self.slot_dims = tuple(int(s) for s in slot_dims)
        # key: (rates_bytes, monomial) -> coef ndarray (n, m, d)
        self._terms: dict = {}
        if terms:
            for rates, mono, coef in terms:
                self._add_term(np.asarray(rates, dtype=np.float64), mono,
                               np.asarray(coef, dtype=np.float64))

    # -- construction -----------------------------------------------------

    @classmethod
    def zero(cls, level: int, shape, slot_dims) -> "Field":
        return cls(level, shape, slot_dims)

    @classmethod
    def constant(cls, value: CDMatrix, slot_dims) -> "Field":
        f = cls(value.level, (value.rows, value.cols), slot_dims)
        D = f.total_dim
        f._add_term(np.zeros(D), (), value.entries)
        return f

    @classmethod
    def exp_term(cls, level: int, shape, slot_dims, rates, coef, mono: Monomial = ()) -> "Field":
        f = cls(level, shape, slot_dims)
        f._add_term(np.asarray(rates, dtype=np.float64), tuple(mono),
                    np.asarray(coef, dtype=np.float64))
        return f

    @property
    def total_dim(self) -> int:
        return sum(self.slot_dims)

    def slot_offset(self, slot: int) -> int:
        return sum(self.slot_dims[:slot])

    @property
    def num_slots(self) -> int:
        return len(self.slot_dims)

    @property
    def term_count(self) -> int:
        return len(self._terms)

    def _add_term(self, rates: np.ndarray, mono: Monomial, coef: np.ndarray):
        if rates.shape != (self.total_dim,):
            raise ValueError("rates length mismatch")
        n, m = self.shape
        d = dim(self.level)
        if coef.shape != (n, m, d):
            raise ValueError(f"coef must have shape {(n, m, d)}, got {coef.shape}")
        key = (rates.tobytes(), mono)
        cur = self._terms.get(key)
        if cur is None:
            self._terms[key] = coef.copy()
        else:
            self._terms[key] = cur + coef

    def terms(self) -> Iterator[tuple]:
        for (rb, mono), coef in self._terms.items():
            yield np.frombuffer(rb, dtype=np.float64), mono, coef

    def pruned(self, rel: float = 0.0) -> "Field":
        """Drop terms whose coefficient norm is negligible."""
        if not self._terms:
            return self
        scale = max(np.max(np.abs(c)) for c in self._terms.values())
        thr = max(_PRUNE, rel * scale)
        out = Field(self.level, self.shape, self.slot_dims)
        for rates, mono, coef in self.terms():
            if np.max(np.abs(coef)) > thr:
                out._add_term(rates, mono, coef)
        return out

    # -- linear structure --------------------------------------------------

    def _like(self) -> "Field":
        return Field(self.level, self.shape, self.slot_dims)

    def _check_compat(self, other: "Field"):
        if other.level != self.level:
            raise LevelMismatchError("field levels differ")
        if other.slot_dims != self.slot_dims:
            raise ValueError("field slot signatures differ")

    def __add__(self, other: "Field") -> "Field":
        self._check_compat(other)
        if other.shape != self.shape:
            raise ValueError("field shapes differ")
        out = self._like()
        for rates, mono, coef in self.terms():
            out._add_term(rates, mono, coef)
        for rates, mono, coef in other.terms():
            out._add_term(rates, mono, coef)
        return out

    def __sub__(self, other: "Field") -> "Field":
        return self + (-other)

    def __neg__(self) -> "Field":
        out = self._like()
        for rates, mono, coef in self.terms():
            out._add_term(rates, mono, -coef)
        return out

    def scale(self, alpha: float) -> "Field":
        out = self._like()
        for rates, mono, coef in self.terms():
            out._add_term(rates, mono, coef * float(alpha))
        return out

    # -- multiplicative structure -------------------------------------------

    def __mul__(self, other: "Field") -> "Field":
        """Pointwise matrix product (left factor self), exact on terms."""
        self._check_compat(other)
        if self.shape[1] != other.shape[0]:
            raise ValueError("shape mismatch in field product")
        out = Field(self.level, (self.shape[0], other.shape[1]), self.slot_dims)
        for r1, m1, c1 in self.terms():
            for r2, m2, c2 in other.terms():
                out._add_term(r1 + r2, _mono_mul(m1, m2),
                              kernels.cd_matmul(c1, c2, self.level))
        return out

    def left_mul_vec(self, a: np.ndarray) -> "Field":
        """Left product by a constant scalar CD number (coefficient vector)."""
        out = self._like()
        d = dim(self.level)
        for rates, mono, coef in self.terms():
            flat = coef.reshape(-1, d)
            prod = kernels.cd_mul(np.broadcast_to(a, flat.shape), flat, self.level)
            out._add_term(rates, mono, prod.reshape(coef.shape))
        return out

    def right_mul_vec(self, a: np.ndarray) -> "Field":
        out = self._like()
        d = dim(self.level)
        for rates, mono, coef in self.terms():
            flat = coef.reshape(-1, d)
            prod = kernels.cd_mul(flat, np.broadcast_to(a, flat.shape), self.level)
            out._add_term(rates, mono, prod.reshape(coef.shape))
        return out

    def left_matmul(self, B: CDMatrix) -> "Field":
        out = Field(self.level, (B.rows, self.shape[1]), self.slot_dims)
        for rates, mono, coef in self.terms():
            out._add_term(rates, mono, kernels.cd_matmul(B.entries, coef, self.level))
        return out

    def map_values(self, S: np.ndarray) -> "Field":
        """Apply a linear map to every coefficient vector (entrywise)."""
        out = self._like()
        for rates, mono, coef in self.terms():
            out._add_term(rates, mono, np.einsum("st,nmt->nms", S, coef))
        return out

    def conj_values(self) -> "Field":
        out = self._like()
        for rates, mono, coef in self.terms():
            out._add_term(rates, mono, kernels.conj_vec(coef))
        return out

    # -- calculus ------------------------------------------------------------

    def partial(self, coord: int) -> "Field":
        out = self._like()
        for rates, mono, coef in self.terms():
            lam = rates[coord]
            if lam != 0.0:
                out._add_term(rates, mono, coef * lam)
            for i, (c, p) in enumerate(mono):
                if c == coord:
                    reduced = mono[:i] + (((c, p - 1),) if p > 1 else ()) + mono[i + 1:]
                    out._add_term(rates, tuple(sorted(reduced)), coef * p)
        return out

    def sigma(self, spec: DiracSpec, slot: int) -> "Field":
        """sigma (or sigma-hat when the spec is conjugated) in the given slot."""
        if self.slot_dims[slot] != spec.dim:
            raise ValueError("slot dimension does not match spec level")
        off = self.slot_offset(slot)
        out = Field(self.level, self.shape, self.slot_dims)
        for j in range(spec.dim):
            psi = spec.psi[j]
            if psi == 0.0:
                continue
            df = self.partial(off + spec.xi[j]).scale(psi)
            if spec.conjugated:
                gen = kernels.basis(self.level, j)
                contrib = df.right_mul_vec(gen)
            else:
                gen = kernels.conj_vec(kernels.basis(self.level, j))
                contrib = df.left_mul_vec(gen)
            out = out + contrib
        return out

    def sigma_power(self, spec: DiracSpec, slot: int, m: int) -> "Field":
        if m < 0:
            raise ValueError("sigma power must be non-negative")
        f = self
        for _ in range(m):
            f = f.sigma(spec, slot)
        return f

    def sigma_antiderivative(self, spec: DiracSpec, slot: int,
                             min_symbol: float = 1e-12) -> "Field":
        """Exact W with sigma_slot W = self.

        Solves term by term: for a pure exponential the inverse is a left
        product with Lambda^{-1}; polynomial factors in the slot are handled
        by a triangular solve over descending degree.  Raises if any term's
        symbol is singular (no decaying anti-derivative exists) or if the
        spec is conjugated (only the left-operator form is inverted here).
        """
        if spec.conjugated:
            raise ValueError("anti-derivative implemented for the unconjugated operator")
        if self.level >= 4:
            raise ValueError("anti-derivative requires an alternative algebra (r <= 3)")
        off = self.slot_offset(slot)
        sd = self.slot_dims[slot]
        out = self._like()
        d = dim(self.level)
        for rates, mono, coef in self.terms():
            lam = spec.symbol(rates[off:off + sd])
            nl = np.linalg.norm(lam)
            if nl <= min_symbol:
                raise ArithmeticError(
                    "sigma-singular term: slot rates give a non-invertible symbol")
            lam_inv = kernels.conj_vec(lam) / (nl * nl)
            slot_mono = tuple((c, p) for c, p in mono if off <= c < off + sd)
            rest_mono = tuple((c, p) for c, p in mono if not (off <= c < off + sd))
            if not slot_mono:
                flat = coef.reshape(-1, d)
                w = kernels.cd_mul(np.broadcast_to(lam_inv, flat.shape), flat, self.level)
                out._add_term(rates, mono, w.reshape(coef.shape))
                continue
            # triangular solve over slot monomials m' <= slot_mono
            sol: dict = {}
            top = slot_mono
            order = sorted(_mono_divisors(top), key=_mono_degree, reverse=True)
            for mprime in order:
                rhs = coef.copy() if mprime == top else np.zeros_like(coef)
                if mprime != top:
                    rhs = np.zeros_like(coef)
                # contributions sigma produces on m' from already-solved higher terms
                acc = np.zeros_like(coef)
                for c_local in range(sd):
                    mpp = _mono_bump(mprime, off + c_local)
                    if mpp in sol:
                        j = spec.xi.index(c_local)
                        psi = spec.psi[j]
                        if psi == 0.0:
                            continue
                        power = dict(mpp).get(off + c_local, 0)
                        gen = kernels.conj_vec(kernels.basis(self.level, j))
                        flat = sol[mpp].reshape(-1, d)
                        term = kernels.cd_mul(np.broadcast_to(gen, flat.shape), flat,
                                              self.level).reshape(coef.shape)
                        acc = acc + psi * power * term
                rhs = rhs - acc
                flat = rhs.reshape(-1, d)
                w = kernels.cd_mul(np.broadcast_to(lam_inv, flat.shape), flat,
                                   self.level).reshape(coef.shape)
                sol[mprime] = w
            for mprime, w in sol.items():
                if np.max(np.abs(w)) > _PRUNE:
                    out._add_term(rates, tuple(sorted(mprime + rest_mono)), w)
        return out

    # -- substitution ---------------------------------------------------------

    def subs_affine(self, A: np.ndarray, b: np.ndarray, new_slot_dims) -> "Field":
        """Return g(u) = f(A u + b) over the new slot signature."""
        new_slot_dims = tuple(int(s) for s in new_slot_dims)
        D_old = self.total_dim
        D_new = sum(new_slot_dims)
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if A.shape != (D_old, D_new) or b.shape != (D_old,):
            raise ValueError("affine map shape mismatch")
        out = Field(self.level, self.shape, new_slot_dims)
        for rates, mono, coef in self.terms():
            new_rates = A.T @ rates
            scale = float(np.exp(rates @ b))
            poly = {(): 1.0}
            for c, p in mono:
                form = {k: A[c, k] for k in range(D_new) if A[c, k] != 0.0}
                poly = _poly_mul(poly, _linear_form_power(form, float(b[c]), p))
            for m_new, cval in poly.items():
                v = scale * cval
                if v != 0.0:
                    out._add_term(new_rates, m_new, coef * v)
        return out

    def rename_slots(self, slot_map: Sequence[int], new_slot_dims) -> "Field":
        """Embed into a larger slot signature; slot i goes to new slot slot_map[i]."""
        new_slot_dims = tuple(int(s) for s in new_slot_dims)
        D_new = sum(new_slot_dims)
        A = np.zeros((self.total_dim, D_new))
        new_offsets = [sum(new_slot_dims[:i]) for i in range(len(new_slot_dims))]
        for i, tgt in enumerate(slot_map):
            if self.slot_dims[i] != new_slot_dims[tgt]:
                raise ValueError("slot dimension mismatch in rename")
            off_old = self.slot_offset(i)
            for c in range(self.slot_dims[i]):
                A[off_old + c, new_offsets[tgt] + c] = 1.0
        return self.subs_affine(A, np.zeros(self.total_dim), new_slot_dims)

    def restrict_slot(self, slot: int, to_slot: int) -> "Field":
        """Substitute the content of ``slot`` by ``to_slot`` (e.g. z := x)."""
        if self.slot_dims[slot] != self.slot_dims[to_slot]:
            raise ValueError("restriction needs equal slot dimensions")
        new_dims = tuple(sd for i, sd in enumerate(self.slot_dims) if i != slot)
        mapping = []
        k = 0
        for i in range(self.num_slots):
            if i == slot:
                continue
            mapping.append((i, k))
            k += 1
        new_index = {i: j for i, j in mapping}
        D_new = sum(new_dims)
        A = np.zeros((self.total_dim, D_new))
        new_offsets = [sum(new_dims[:i]) for i in range(len(new_dims))]
        for i in range(self.num_slots):
            src = to_slot if i == slot else i
            tgt = new_index[src]
            off_old = self.slot_offset(i)
            for c in range(self.slot_dims[i]):
                A[off_old + c, new_offsets[tgt] + c] = 1.0
        return self.subs_affine(A, np.zeros(self.total_dim), new_dims)

    def translate(self, offsets: np.ndarray) -> "Field":
        """f(u + offsets) over the same slots."""
        D = self.total_dim
        return self.subs_affine(np.eye(D), np.asarray(offsets, dtype=np.float64),
                                self.slot_dims)

    # -- evaluation ------------------------------------------------------------

    def eval(self, points: np.ndarray) -> np.ndarray:
        """points (N, D) -> values (N, n, m, d)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[1] != self.total_dim:
            raise ValueError("point dimension mismatch")
        N = pts.shape[0]
        n, m = self.shape
        out = np.zeros((N, n, m, dim(self.level)))
        for rates, mono, coef in self.terms():
            scal = np.exp(pts @ rates)
            for c, p in mono:
                scal = scal * pts[:, c] ** p
            out += scal[:, None, None, None] * coef[None]
        return out

    def eval_one(self, point: np.ndarray) -> CDMatrix:
        v = self.eval(np.asarray(point)[None, :])[0]
        return CDMatrix(self.level, v)

    def sup_norm(self, points: np.ndarray) -> float:
        vals = self.eval(points)
        return float(np.max(np.sqrt(np.sum(vals ** 2, axis=(1, 2, 3))))) if len(vals) else 0.0

    # -- ray data ----------------------------------------------------------------

    def slot_rates(self, slot: int):
        off = self.slot_offset(slot)
        sd = self.slot_dims[slot]
        return [rates[off:off + sd] for rates, _, _ in self.terms()]

    def max_decay_along(self, slot: int, v0: np.ndarray) -> float:
        """max over terms of <slot rates, v0>; negative means decay."""
        mus = [float(r @ v0) for r in self.slot_rates(slot)]
        return max(mus) if mus else -np.inf

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        """Bit-exact term list (floats as hex strings) for config round-trips."""
        terms = []
        for rates, mono, coef in self.terms():
            terms.append({
                "rates": [float(v).hex() for v in rates],
                "mono": [[int(c), int(p)] for c, p in mono],
                "coef": [float(v).hex() for v in coef.ravel()],
            })
        return {"level": self.level, "shape": list(self.shape),
                "slot_dims": list(self.slot_dims), "terms": terms}

    @classmethod
    def from_dict(cls, blob: dict) -> "Field":
        shape = tuple(blob["shape"])
        d = dim(blob["level"])
        out = cls(blob["level"], shape, tuple(blob["slot_dims"]))
        for t in blob["terms"]:
            rates = np.array([float.fromhex(v) for v in t["rates"]])
            mono = tuple(sorted((int(c), int(p)) for c, p in t["mono"]))
            coef = np.array([float.fromhex(v) for v in t["coef"]]).reshape(
                shape[0], shape[1], d)
            out._add_term(rates, mono, coef)
        return out

    def __repr__(self):
        return (f"Field(level={self.level}, shape={self.shape}, "
                f"slots={self.slot_dims}, terms={self.term_count})")


AnalyticField = Field


def _mono_divisors(m: Monomial) -> list:
    out = [()]
    for c, p in m:
        out = [base + (((c, q),) if q else ()) for base in out for q in range(p + 1)]
    return [tuple(sorted(x)) for x in out]


def _mono_bump(m: Monomial, coord: int) -> Monomial:
    acc = dict(m)
    acc[coord] = acc.get(coord, 0) + 1
    return tuple(sorted(acc.items()))


# -- operator entry points (module surface) -----------------------------------


def sigma_apply(spec: DiracSpec, f: Field, slot: int, x: np.ndarray) -> CDMatrix:
    """Evaluate (sigma f) at point x using the exact derivative oracle."""
    return f.sigma(spec, slot).eval_one(x)


def sigma_power_apply(spec: DiracSpec, f: Field, slot: int, m: int, x: np.ndarray) -> CDMatrix:
    return f.sigma_power(spec, slot, m).eval_one(x)


class OrderedProduct:
    """Product of factors with an explicit association tree.

    ``tree`` is a nested tuple of factor indices, e.g. (0, (1, 2)); a flat
    left fold is used when none is given.
    """

    def __init__(self, factors: Sequence[Field], tree=None):
        if not factors:
            raise ValueError("ordered product needs at least one factor")
        self.factors = list(factors)
        sig = self.factors[0].slot_dims
        for f in self.factors[1:]:
            if f.slot_dims != sig:
                raise ValueError("all factors must share one slot signature")
        self.tree = tree if tree is not None else _left_tree(len(factors))
        if sorted(_tree_leaves(self.tree)) != list(range(len(factors))):
            raise ValueError("tree leaves must enumerate the factors exactly once")

    def materialize(self, factors=None) -> Field:
        factors = self.factors if factors is None else factors

        def build(node):
            if isinstance(node, int):
                return factors[node]
            left, right = node
            return build(left) * build(right)

        return build(self.tree)

    def sigma_positional(self, spec: DiracSpec, s: int, slot: int) -> Field:
        """^s sigma: differentiate factor s only, left-multiplying the whole
        product by i_j^* (right-multiplying by i_j for a conjugated spec)."""
        if not (0 <= s < len(self.factors)):
            raise IndexError("factor index out of range")
        f_s = self.factors[s]
        off = f_s.slot_offset(slot)
        out = None
        for j in range(spec.dim):
            psi = spec.psi[j]
            if psi == 0.0:
                continue
            repl = list(self.factors)
            repl[s] = f_s.partial(off + spec.xi[j])
            prod = self.materialize(repl).scale(psi)
            if spec.conjugated:
                contrib = prod.right_mul_vec(kernels.basis(prod.level, j))
            else:
                contrib = prod.left_mul_vec(kernels.conj_vec(kernels.basis(prod.level, j)))
            out = contrib if out is None else out + contrib
        if out is None:
            f0 = self.materialize()
            out = Field.zero(f0.level, f0.shape, f0.slot_dims)
        return out


def _left_tree(k: int):
    node = 0
    for i in range(1, k):
        node = (node, i)
    return node


def _tree_leaves(node) -> list:
    if isinstance(node, int):
        return [node]
    return _tree_leaves(node[0]) + _tree_leaves(node[1])


def sigma_positional(spec: DiracSpec, prod: OrderedProduct, s: int, slot: int,
                     x: np.ndarray) -> CDMatrix:
    """Evaluate ^s sigma of the ordered product at x (s is 1-based as in the
    positional notation)."""
    return prod.sigma_positional(spec, s - 1, slot).eval_one(x)


def conjugation_duality_defect(spec: DiracSpec, f: Field, slot: int, x: np.ndarray) -> float:
    """|| (sigma f)^* - sigma_hat (f^*) || at x, for 1x1 fields."""
    if f.shape != (1, 1):
        raise ValueError("duality check is defined for scalar (1x1) fields")
    left = f.sigma(spec, slot).conj_values()
    right = f.conj_values().sigma(spec.conjugate_pair(), slot)
    return (left - right).eval_one(x).norm()
