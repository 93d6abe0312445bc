"""Boundary-term families produced when sigma powers cross the improper
integral: A_m/B_m, their hatted forms with the commutator remainders P_m/Q_m,
and the tilde family for the swapped kernel order.

Positional operators act on ordered products before any value is
materialized; a pending term records a real coefficient, a chain of
generator multiplications (innermost first) wrapping the whole product, and
the factor fields themselves.  The diagonal restriction z = x is always
applied after all operators, matching the order the recursions require.

Slot conventions: the plain families work over (x, z, y) = slots (0, 1, 2);
the hatted families over (x, y, z, ...) with scratch slots appended as
needed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .algebra import CDMatrix
from .fields import DiracSpec, Field

MAX_ORDER = 6

FAMILIES = ("A", "B", "Ahat", "Bhat", "P", "Q", "Atilde", "Btilde")


class OrderError(ValueError):
    pass


def _check_order(m: int):
    if not (1 <= m <= MAX_ORDER):
        raise OrderError(f"boundary-term order must be in [1, {MAX_ORDER}], got {m}")


@dataclass(frozen=True)
class PendingTerm:
    coeff: float
    chain: tuple          # generator indices, innermost first
    factors: tuple        # Fields over a common slot signature
    label: str = ""


Expression = list


def product_expr(factors: Sequence[Field], coeff: float = 1.0, label: str = "") -> Expression:
    return [PendingTerm(float(coeff), (), tuple(factors), label)]


def expr_scale(expr: Expression, c: float) -> Expression:
    return [PendingTerm(t.coeff * c, t.chain, t.factors, t.label) for t in expr]


def pos_sigma(expr: Expression, spec: DiracSpec, factor: int, slot: int,
              tag: str = "") -> Expression:
    """One application of a positional sigma to every pending term."""
    out: Expression = []
    for t in expr:
        f = t.factors[factor]
        off = f.slot_offset(slot)
        for j in range(spec.dim):
            psi = spec.psi[j]
            if psi == 0.0:
                continue
            repl = list(t.factors)
            repl[factor] = f.partial(off + spec.xi[j])
            out.append(PendingTerm(t.coeff * psi, t.chain + (j,), tuple(repl),
                                   t.label + tag))
    return out


def pos_sigma_power(expr: Expression, spec: DiracSpec, factor: int, slot: int,
                    m: int, tag: str = "") -> Expression:
    for _ in range(m):
        expr = pos_sigma(expr, spec, factor, slot, tag)
    return expr


def pos_sigma_sum(expr: Expression, spec: DiracSpec, factors: Sequence[int],
                  slot: int, tag: str = "") -> Expression:
    out: Expression = []
    for fidx in factors:
        out.extend(pos_sigma(expr, spec, fidx, slot, tag))
    return out


def pos_sigma_sum_power(expr: Expression, spec: DiracSpec, factors: Sequence[int],
                        slot: int, m: int, tag: str = "") -> Expression:
    for _ in range(m):
        expr = pos_sigma_sum(expr, spec, factors, slot, tag)
    return expr


def materialize(expr: Expression) -> Field:
    """Left-fold each term's factors, then apply the generator chain
    innermost-first, and sum."""
    if not expr:
        raise ValueError("cannot materialize an empty expression without a prototype")
    proto = expr[0].factors[0]
    out = None
    for t in expr:
        f = t.factors[0]
        for g in t.factors[1:]:
            f = f * g
        for j in t.chain:
            f = f.left_mul_vec(kernels.conj_vec(kernels.basis(f.level, j)))
        f = f.scale(t.coeff)
        out = f if out is None else out + f
    return out.pruned()


def expression_lines(expr: Expression) -> list:
    """Plain-text dump, one line per additive pending term."""
    lines = []
    for t in expr:
        chain = "".join(f" i{j}*" for j in reversed(t.chain)) or " (no chain)"
        facs = " . ".join(f"[{f.term_count}t{f.shape}]" for f in t.factors)
        lines.append(f"{t.coeff:+.6g}{chain} {facs} {t.label}".rstrip())
    return lines


def _subs_slot_keep(f: Field, slot: int, to_slot: int) -> Field:
    """Substitute slot := to_slot without dropping the slot."""
    D = f.total_dim
    A = np.eye(D)
    off_s, off_t = f.slot_offset(slot), f.slot_offset(to_slot)
    for c in range(f.slot_dims[slot]):
        A[off_s + c, off_s + c] = 0.0
        A[off_s + c, off_t + c] = 1.0
    return f.subs_affine(A, np.zeros(D), f.slot_dims)


# -- A_m / B_m over the (x, z, y) universe -------------------------------------


def _lift_FN(F: Field, N: Field):
    if N.num_slots != 3:
        raise ValueError("N must be a 3-slot field (x, z, y)")
    U = N.slot_dims
    F_l = F.rename_slots([1, 2], U)  # F(z, y)
    return F_l, N, U


def a_family_recursive(F: Field, N: Field, spec: DiracSpec, m: int) -> Field:
    """A_m(F, N)(x, y) by the recursion (positional power, then sigma_x)."""
    _check_order(m)
    F_l, N, U = _lift_FN(F, N)
    if m == 1:
        return (-(F_l * N)).restrict_slot(1, 0)
    boundary = materialize(
        pos_sigma_power(product_expr([F_l, N]), spec, 1, 0, m - 1, "^2sx")
    ).restrict_slot(1, 0)
    return (-boundary) + a_family_recursive(F, N, spec, m - 1).sigma(spec, 0)


def a_family_closed(F: Field, N: Field, spec: DiracSpec, m: int) -> Field:
    """A_m as the closed sum of sigma_x^j of restricted positional powers."""
    _check_order(m)
    F_l, N, U = _lift_FN(F, N)
    acc = None
    for j in range(m):
        inner = materialize(
            pos_sigma_power(product_expr([F_l, N]), spec, 1, 0, m - 1 - j, "^2sx")
        ).restrict_slot(1, 0)
        term = inner.sigma_power(spec, 0, j)
        acc = term if acc is None else acc + term
    return -acc


def _b_expression(F_l: Field, N: Field, spec: DiracSpec, m: int) -> Expression:
    if m == 1:
        return product_expr([F_l, N], coeff=-1.0, label="B1")
    first = expr_scale(
        pos_sigma_power(product_expr([F_l, N]), spec, 1, 1, m - 1, "^2sz"),
        (-1.0) ** m)
    rest = pos_sigma(_b_expression(F_l, N, spec, m - 1), spec, 0, 1, "^1sz")
    return first + rest


def b_family_recursive(F: Field, N: Field, spec: DiracSpec, m: int) -> Field:
    """B_m(F, N)(x, y): recursion kept in z-form, restricted z = x at the end."""
    _check_order(m)
    F_l, N, U = _lift_FN(F, N)
    return materialize(_b_expression(F_l, N, spec, m)).restrict_slot(1, 0)


def b_family_closed(F: Field, N: Field, spec: DiracSpec, m: int) -> Field:
    _check_order(m)
    F_l, N, U = _lift_FN(F, N)
    acc: Expression = []
    for k in range(m):
        e = pos_sigma_power(product_expr([F_l, N]), spec, 1, 1, k, "^2sz")
        e = pos_sigma_power(e, spec, 0, 1, m - 1 - k, "^1sz")
        acc.extend(expr_scale(e, (-1.0) ** (k + 1)))
    return materialize(acc).restrict_slot(1, 0)


def b_family_z_expression(F: Field, N: Field, spec: DiracSpec, m: int) -> Expression:
    """Unrestricted z-form of B_m, for diagnostics and the term-tree dump."""
    _check_order(m)
    F_l, N, U = _lift_FN(F, N)
    return _b_expression(F_l, N, spec, m)


# -- tilde family: integrand N(x, z, y) K(x, z) --------------------------------


def _lift_NK(N: Field, K: Field):
    U = N.slot_dims
    K_l = K.rename_slots([0, 1], U)  # K(x, z)
    return N, K_l, U


def atilde_closed(N: Field, K: Field, spec: DiracSpec, m: int) -> Field:
    """tilde-A_m(N; K)(x, y): full sigma_x inside (both factors carry x)."""
    _check_order(m)
    N, K_l, U = _lift_NK(N, K)
    prod = N * K_l
    acc = None
    for j in range(m):
        inner = prod.sigma_power(spec, 0, m - 1 - j).restrict_slot(1, 0)
        term = inner.sigma_power(spec, 0, j)
        acc = term if acc is None else acc + term
    return -acc


def atilde_recursive(N: Field, K: Field, spec: DiracSpec, m: int) -> Field:
    _check_order(m)
    Nf, K_l, U = _lift_NK(N, K)
    prod = Nf * K_l
    if m == 1:
        return (-prod).restrict_slot(1, 0)
    return (atilde_recursive(N, K, spec, m - 1).sigma(spec, 0)
            - prod.sigma_power(spec, 0, m - 1).restrict_slot(1, 0))


def btilde_closed(N: Field, K: Field, spec: DiracSpec, m: int) -> Field:
    _check_order(m)
    Nf, K_l, U = _lift_NK(N, K)
    acc: Expression = []
    for k in range(m):
        e = pos_sigma_power(product_expr([Nf, K_l]), spec, 1, 1, k, "^2sz")
        e = pos_sigma_power(e, spec, 0, 1, m - 1 - k, "^1sz")
        acc.extend(expr_scale(e, (-1.0) ** (k + 1)))
    return materialize(acc).restrict_slot(1, 0)


def btilde_recursive(N: Field, K: Field, spec: DiracSpec, m: int) -> Field:
    _check_order(m)
    Nf, K_l, U = _lift_NK(N, K)

    def z_expr(mm: int) -> Expression:
        if mm == 1:
            return product_expr([Nf, K_l], coeff=-1.0, label="Bt1")
        first = expr_scale(
            pos_sigma_power(product_expr([Nf, K_l]), spec, 1, 1, mm - 1, "^2sz"),
            (-1.0) ** mm)
        return first + pos_sigma(z_expr(mm - 1), spec, 0, 1, "^1sz")

    return materialize(z_expr(m)).restrict_slot(1, 0)


# -- hatted family (reconstruction data) ---------------------------------------


def _decreasing_tuples(top: int, length: int, minimum: int = 0):
    """Strictly decreasing tuples (j_0 > ... > j_{length-1} >= minimum), j_0 <= top."""
    if length == 0:
        yield ()
        return
    for j0 in range(top, minimum - 1 + (length - 1), -1):
        for rest in _decreasing_tuples(j0 - 1, length - 1, minimum):
            yield (j0,) + rest


def ahat_p(m: int, K: Field, N0: Field, E, Ax, spec: DiracSpec):
    """hat-A_m and P_m for the pair (K, N0).

    K is an (x, y) field (possibly with frozen extra slots appended); N0 is
    the corresponding (x, z)-role field over K's signature plus one scratch
    z slot appended at the end.  E maps (x, y)-role fields; Ax is the
    integral operator at roles (0, 1).  Returns (ahat, p_part) over K's
    signature; p_part is None when every commutator term vanishes
    structurally (identity E).
    """
    _check_order(m)
    d = kernels.dim(K.level)
    U = K.slot_dims + (d,)
    z_slot = len(K.slot_dims)
    if N0.slot_dims != U:
        raise ValueError("N0 must live over K's signature plus one scratch slot")
    K_l = K.rename_slots(list(range(K.num_slots)), U)
    p = Ax.p

    kernel_cache: dict = {}

    def kernel(indices: tuple) -> Field:
        # K_{ell, l_1..l_ell}(x, y), indices consumed last-outermost
        if indices in kernel_cache:
            return kernel_cache[indices]
        if len(indices) == 1:
            bracket = N0.sigma_power(spec, 0, indices[0])
        else:
            prev = kernel(indices[:-1])
            EG = E.apply(prev, 0, 1).rename_slots(
                [0, z_slot] + list(range(2, K.num_slots)), U)
            bracket = EG.sigma_power(spec, 0, indices[-1])
        out = (K_l * bracket).restrict_slot(z_slot, 0)
        kernel_cache[indices] = out
        return out

    ahat = None
    p_terms = None
    for ell in range(1, m + 1):
        for js in _decreasing_tuples(m - 1, ell):
            kidx = (m - js[0] - 1,) + tuple(js[i - 1] - js[i] - 1 for i in range(1, ell))
            kern = kernel(kidx)
            term = kern.sigma_power(spec, 0, js[-1]).scale(p ** (ell - 1))
            ahat = term if ahat is None else ahat + term
            if js[-1] >= 1 and not E.is_identity:
                comm = (E.apply(kern, 0, 1).sigma_power(spec, 0, js[-1])
                        - E.apply(kern.sigma_power(spec, 0, js[-1]), 0, 1))
                comm = comm.scale(p ** (ell - 1))
                p_terms = comm if p_terms is None else p_terms + comm
    ahat = (-ahat).pruned()
    p_part = Ax(p_terms) if p_terms is not None else None
    return ahat, p_part


def bhat_q(m: int, K: Field, E, Ax, spec: DiracSpec, N0: Field = None):
    """hat-B_m and Q_m for the pair (K, N0), N0 defaulting to E K.

    K has slots (x, y, *extras); N0 is the kernel N'(alpha, beta, *extras).
    Works over (x, y, *extras, z, w, v); the substitutions v = z, w = x are
    applied simultaneously after all operators, then z = x.  Returns
    (bhat, q_part), q_part None when E commutes structurally.
    """
    _check_order(m)
    d = kernels.dim(K.level)
    nK = K.num_slots
    extras = list(range(2, nK))
    U = K.slot_dims + (d, d, d)
    zi, wi, vi = nK, nK + 1, nK + 2
    if N0 is None:
        N0 = E.apply(K, 0, 1)
    # N0 may carry a trailing reference to K's y slot (kernels like EK(x, ay+bz))
    n0_y = [1] if N0.num_slots == len(extras) + 3 else []
    K_zy = K.rename_slots([zi, 1] + extras, U)

    bhat = None
    q_part = None
    for j in range(1, m + 1):
        sgn = (-1.0) ** j
        C_j = N0.rename_slots([wi, vi] + extras + n0_y, U).sigma_power(spec, vi, j - 1)
        t1 = materialize(
            pos_sigma_power(product_expr([K_zy, C_j]), spec, 0, zi, m - j, "^1sz"))
        term = t1.scale(sgn)
        bhat = term if bhat is None else bhat + term
        if m - j >= 1:
            # nested hat-A at base roles (a=z, y) with (xo, w, v) frozen
            UL = (d, d) + K.slot_dims[2:] + (d, d, d)  # a, y, *extras, xo, w, v
            nL = len(UL)
            wl, vl = nL - 2, nL - 1
            K_loc = K.rename_slots([0, 1] + extras, UL)
            ULz = UL + (d,)
            zeta = nL
            N_azeta = N0.rename_slots([0, zeta] + extras + ([1] if n0_y else []), ULz)
            C_loc = N0.rename_slots([wl, vl] + extras + ([1] if n0_y else []), ULz).sigma_power(spec, vl, j - 1)
            N0_loc = N_azeta * C_loc
            a_hat, p_hat = ahat_p(m - j, K_loc, N0_loc, E, Ax, spec)
            # back to (x, y, *extras, z, w, v); the substituted seed
            # contributes with sign -(-1)^j
            back = [zi, 1] + extras + [0, wi, vi]
            a_b = a_hat.rename_slots(back, U).scale(-sgn * Ax.p)
            bhat = bhat + a_b
            if p_hat is not None:
                p_b = p_hat.rename_slots(back, U).scale(-sgn * Ax.p)
                q_part = p_b if q_part is None else q_part + p_b

    def finish(f: Field) -> Field:
        f = _subs_slot_keep(f, vi, zi)
        f = _subs_slot_keep(f, wi, 0)
        f = f.restrict_slot(vi, zi).restrict_slot(wi, 0)
        return f.restrict_slot(zi, 0).pruned()

    bhat_f = finish(bhat)
    q_f = finish(q_part) if q_part is not None else None
    return bhat_f, q_f


@dataclass
class BoundaryTermRequest:
    """Declarative request for one boundary term at one point.

    ``family`` is one of A/B (plain pair F, N), Ahat/Bhat/P/Q (solved pair
    K with Ax and E), Atilde/Btilde (swapped kernel order N, K).  Fields not
    used by the requested family may be left None.
    """

    family: str
    m: int
    spec: DiracSpec
    point: np.ndarray
    F: Field = None
    N: Field = None
    K: Field = None
    E: object = None
    Ax: object = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown boundary-term family {self.family!r}")
        _check_order(self.m)


def evaluate_boundary_term(req: BoundaryTermRequest) -> CDMatrix:
    """Evaluate the requested family at the request's point."""
    fam = req.family
    if fam == "A":
        f = a_family_closed(req.F, req.N, req.spec, req.m)
    elif fam == "B":
        f = b_family_closed(req.F, req.N, req.spec, req.m)
    elif fam == "Atilde":
        f = atilde_closed(req.N, req.K, req.spec, req.m)
    elif fam == "Btilde":
        f = btilde_closed(req.N, req.K, req.spec, req.m)
    elif fam in ("Ahat", "P"):
        if req.E is None or req.Ax is None:
            raise ValueError("hatted families need E and the integral operator")
        d = kernels.dim(req.K.level)
        N0 = req.N
        if N0 is None:
            U = req.K.slot_dims + (d,)
            N0 = req.E.apply(req.K, 0, 1).rename_slots(
                [0, req.K.num_slots] + list(range(2, req.K.num_slots)), U)
        ah, p_part = ahat_p(req.m, req.K, N0, req.E, req.Ax, req.spec)
        if fam == "P":
            if p_part is None:
                return CDMatrix.zeros(req.K.level, *req.K.shape)
            f = p_part
        else:
            f = ah
    elif fam in ("Bhat", "Q"):
        if req.E is None or req.Ax is None:
            raise ValueError("hatted families need E and the integral operator")
        bh, q_part = bhat_q(req.m, req.K, req.E, req.Ax, req.spec, N0=req.N)
        if fam == "Q":
            if q_part is None:
                return CDMatrix.zeros(req.K.level, *req.K.shape)
            f = q_part
        else:
            f = bh
    else:  # pragma: no cover
        raise ValueError(fam)
    return f.eval_one(np.asarray(req.point, dtype=np.float64))
