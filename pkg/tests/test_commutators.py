"""Boundary-term families: bases, recursions, crossing identities and the
hat-family reconstructions."""
import numpy as np
import pytest

from cdpde import commutators as bt
from cdpde import kernels
from cdpde.algebra import CDMatrix
from cdpde.fields import DiracSpec, Field
from cdpde.identities import (FAMILIES, random_adapted_spec, random_decaying_pair,
                              ray_direction, lemma3_5_rows, prop2_5_rows,
                              prop3_15_rows)
from cdpde.lineint import improper_field
from cdpde.solver import AxOperator


def make_pair(r, rng):
    spec = random_adapted_spec(r, rng)
    v0 = ray_direction(spec)
    F, N = random_decaying_pair(r, spec, rng, v0, poly=False)
    return spec, v0, F, N


class TestBaseCases:
    def test_a1_is_minus_product_on_diagonal(self, rng):
        spec, v0, F, N = make_pair(2, rng)
        d = 4
        got = bt.a_family_recursive(F, N, spec, 1)
        F_l = F.rename_slots([1, 2], (d, d, d))
        want = (-(F_l * N)).restrict_slot(1, 0)
        pts = rng.normal(size=(5, 2 * d)) * 0.3
        assert np.max(np.abs((got - want).eval(pts))) == 0.0

    def test_b1_matches_a1_after_restriction(self, rng):
        spec, v0, F, N = make_pair(2, rng)
        got = bt.b_family_recursive(F, N, spec, 1)
        want = bt.a_family_recursive(F, N, spec, 1)
        pts = rng.normal(size=(5, 8)) * 0.3
        assert np.max(np.abs((got - want).eval(pts))) == 0.0

    def test_zero_kernel_gives_zero(self, rng):
        spec, v0, F, _ = make_pair(2, rng)
        Nz = Field.zero(2, (1, 1), (4, 4, 4))
        for m in (1, 2, 3):
            assert bt.a_family_recursive(F, Nz, spec, m).term_count == 0
            assert bt.b_family_recursive(F, Nz, spec, m).term_count == 0

    def test_constants_vanish_beyond_first_order(self, rng):
        spec = random_adapted_spec(2, rng)
        Fc = Field.constant(CDMatrix.from_real(2, [[1.7]]), (4, 4))
        Nc = Field.constant(CDMatrix(2, rng.normal(size=(1, 1, 4))), (4, 4, 4))
        a1 = bt.a_family_recursive(Fc, Nc, spec, 1)
        pts = rng.normal(size=(4, 8))
        want = -1.7 * Nc.eval(rng.normal(size=(1, 12)))[0]
        assert np.max(np.abs(a1.eval(pts)[0] - want)) <= 1e-14
        for fam in (bt.a_family_recursive, bt.b_family_recursive):
            assert np.max(np.abs(fam(Fc, Nc, spec, 2).eval(pts))) == 0.0

    def test_order_cap(self, rng):
        spec, v0, F, N = make_pair(2, rng)
        with pytest.raises(bt.OrderError):
            bt.a_family_recursive(F, N, spec, 7)


class TestClosedVsRecursive:
    @pytest.mark.parametrize("level", [2, 3])
    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_ab_agreement(self, level, m, rng):
        spec, v0, F, N = make_pair(level, rng)
        d = kernels.dim(level)
        pts = rng.normal(size=(5, 2 * d)) * 0.3
        ar = bt.a_family_recursive(F, N, spec, m)
        ac = bt.a_family_closed(F, N, spec, m)
        scl = max(ac.sup_norm(pts), 1e-30)
        assert (ar - ac).sup_norm(pts) / scl <= 1e-10
        br = bt.b_family_recursive(F, N, spec, m)
        bc = bt.b_family_closed(F, N, spec, m)
        sclb = max(bc.sup_norm(pts), 1e-30)
        assert (br - bc).sup_norm(pts) / sclb <= 1e-10

    @pytest.mark.parametrize("level", [2, 3])
    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_tilde_agreement(self, level, m, rng):
        spec = random_adapted_spec(level, rng)
        v0 = ray_direction(spec)
        F, N = random_decaying_pair(level, spec, rng, v0)
        K = F
        d = kernels.dim(level)
        pts = rng.normal(size=(5, 2 * d)) * 0.3
        diff = (bt.atilde_closed(N, K, spec, m)
                - bt.atilde_recursive(N, K, spec, m)).sup_norm(pts)
        assert diff <= 1e-10 * max(1, bt.atilde_closed(N, K, spec, m).sup_norm(pts))
        diffb = (bt.btilde_closed(N, K, spec, m)
                 - bt.btilde_recursive(N, K, spec, m)).sup_norm(pts)
        assert diffb <= 1e-10 * max(1, bt.btilde_closed(N, K, spec, m).sup_norm(pts))


class TestSecondOrderForms:
    def test_a2_explicit_form(self, rng):
        # A_2 = -sigma_x[F N|diag] - [pos-x (F N)]|diag
        spec, v0, F, N = make_pair(2, rng)
        d = 4
        F_l = F.rename_slots([1, 2], (d, d, d))
        diag = (F_l * N).restrict_slot(1, 0)
        pos = bt.materialize(bt.pos_sigma(bt.product_expr([F_l, N]), spec, 1, 0)
                             ).restrict_slot(1, 0)
        want = -(diag.sigma(spec, 0)) - pos
        got = bt.a_family_recursive(F, N, spec, 2)
        pts = rng.normal(size=(5, 8)) * 0.3
        assert (got - want).sup_norm(pts) <= 1e-12

    def test_a2_minus_b2_difference_identity(self, rng):
        # A_2 - B_2 = -2 (pos-x + pos-z)[F N]|diag, the total positional
        # derivative of the second factor on the diagonal
        spec, v0, F, N = make_pair(2, rng)
        d = 4
        F_l = F.rename_slots([1, 2], (d, d, d))
        e = bt.product_expr([F_l, N])
        rhs = bt.materialize(bt.pos_sigma(e, spec, 1, 0)
                             + bt.pos_sigma(e, spec, 1, 1)).restrict_slot(1, 0).scale(-2.0)
        lhs = (bt.a_family_closed(F, N, spec, 2) - bt.b_family_closed(F, N, spec, 2))
        pts = rng.normal(size=(5, 8)) * 0.3
        assert (lhs - rhs).sup_norm(pts) <= 1e-12 * max(1, rhs.sup_norm(pts))

    def test_real_kernel_commutation(self, rng):
        # positional powers on the second factor commute with a real first
        # factor: pos-x^p [F N] = F * sigma_x^p N, exactly
        spec = random_adapted_spec(3, rng)
        d = 8
        coef = np.zeros((1, 1, d))
        coef[0, 0, 0] = rng.normal()
        F = Field.exp_term(3, (1, 1), (d, d), rng.normal(size=2 * d) * 0.4, coef)
        N = Field.exp_term(3, (1, 1), (d, d, d), rng.normal(size=3 * d) * 0.4,
                           rng.normal(size=(1, 1, d)))
        F_l = F.rename_slots([1, 2], (d, d, d))
        for p in (1, 2, 3):
            lhs = bt.materialize(
                bt.pos_sigma_power(bt.product_expr([F_l, N]), spec, 1, 0, p))
            rhs = F_l * N.sigma_power(spec, 0, p)
            pts = rng.normal(size=(4, 3 * d)) * 0.3
            assert np.max(np.abs((lhs - rhs).eval(pts))) <= 1e-13 * max(
                1, np.max(np.abs(rhs.eval(pts))))


class TestCrossingIdentities:
    @pytest.mark.parametrize("level", [2, 3])
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_sigma_crossing_exact_route(self, level, m, rng):
        # module route on both sides: closed-form integrals and boundary sums
        spec, v0, F, N = make_pair(level, rng)
        d = kernels.dim(level)
        F_l = F.rename_slots([1, 2], (d, d, d))
        V = improper_field(F_l * N, spec, 1, 0, v0)
        lhs = V.sigma_power(spec, 0, m)
        rhs = improper_field(
            bt.materialize(bt.pos_sigma_power(bt.product_expr([F_l, N]), spec, 1, 0, m)),
            spec, 1, 0, v0) + bt.a_family_closed(F, N, spec, m)
        pts = rng.normal(size=(5, 2 * d)) * 0.3
        scl = max(lhs.sup_norm(pts), 1e-30)
        assert (lhs - rhs).sup_norm(pts) / scl <= 1e-10

    def test_fd_quadrature_route(self, rng):
        rows = prop2_5_rows(2, 2, seed=7, pairs=2)
        assert max(r["defect"] for r in rows) <= 1e-5

    @pytest.mark.parametrize("m", [1, 2])
    def test_swapped_kernel_identity(self, m, rng):
        rows = prop3_15_rows(2, m, seed=11, pairs=2)
        assert max(r["defect"] for r in rows) <= 1e-6


class TestHatFamilies:
    def test_ahat1_base(self, rng):
        rows = lemma3_5_rows(2, 1, seed=3)
        assert max(r["defect"] for r in rows) <= 1e-6

    @pytest.mark.parametrize("level", [2, 3])
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_reconstruction(self, level, m):
        rows = lemma3_5_rows(level, m, seed=5)
        assert max(r["defect"] for r in rows) <= 1e-6

    def test_identity_operator_kills_commutator_parts(self, rng):
        from cdpde.identities import _mini_problem
        from cdpde.solver import solve_neumann, lattice_points
        from cdpde.symmetry import EOperator
        prob = _mini_problem(2, seed=9)
        prob.E = EOperator.identity(2, 1)
        d = 4
        pts = lattice_points(2, prob.foliation, np.zeros(d), np.zeros(d), 3, 3, 2.0)
        K, _ = solve_neumann(prob, pts)
        Ax = prob.ax()
        N0 = prob.E.apply(K).rename_slots([0, 2], (d, d, d))
        for m in range(1, 7):
            _, p_part = bt.ahat_p(m, K, N0, prob.E, Ax, prob.int_spec)
            assert p_part is None
            _, q_part = bt.bhat_q(min(m, 6), K, prob.E, Ax, prob.int_spec)
            assert q_part is None


class TestTermDump:
    def test_expression_lines(self, rng):
        spec, v0, F, N = make_pair(2, rng)
        expr = bt.b_family_z_expression(F, N, spec, 3)
        lines = bt.expression_lines(expr)
        assert len(lines) == len(expr)
        assert all(line.lstrip("+-")[0].isdigit() for line in lines)
        # signs and chains visible
        assert any("i" in line for line in lines)


class TestOrderThreeDifference:
    def test_difference_identity(self, rng):
        # A_3 - B_3 expressed through positional derivative groups: the
        # unrestricted second-factor group and the diagonal-pair group
        spec, v0, F, N = make_pair(2, rng)
        d = 4
        F_l = F.rename_slots([1, 2], (d, d, d))
        pts = rng.normal(size=(5, 2 * d)) * 0.3
        lhs = bt.a_family_closed(F, N, spec, 3) - bt.b_family_closed(F, N, spec, 3)

        def e():
            return bt.product_expr([F_l, N])

        g1 = (bt.materialize(bt.pos_sigma_power(e(), spec, 1, 0, 2)).scale(3.0)
              + bt.materialize(bt.pos_sigma(bt.pos_sigma(e(), spec, 1, 1), spec, 1, 0))
              + bt.materialize(bt.pos_sigma(bt.pos_sigma(e(), spec, 1, 0), spec, 1, 1)).scale(2.0)
              ).restrict_slot(1, 0)
        Nd = N.restrict_slot(1, 0)

        def e2():
            return bt.product_expr([F.rename_slots([0, 1], (d, d)), Nd])

        g2 = (bt.materialize(bt.pos_sigma(bt.pos_sigma(e2(), spec, 0, 0), spec, 1, 0)).scale(2.0)
              + bt.materialize(bt.pos_sigma(bt.pos_sigma(e2(), spec, 1, 0), spec, 0, 0)))
        rhs = -(g1) - g2
        assert (lhs - rhs).sup_norm(pts) <= 1e-12 * max(1, lhs.sup_norm(pts))


class TestBoundaryTermRequest:
    def test_dispatch_matches_direct_calls(self, rng):
        spec, v0, F, N = make_pair(2, rng)
        pt = rng.normal(size=8) * 0.3
        req = bt.BoundaryTermRequest("A", 2, spec, pt, F=F, N=N)
        got = bt.evaluate_boundary_term(req)
        want = bt.a_family_closed(F, N, spec, 2).eval_one(pt)
        assert (got - want).norm() == 0.0

    def test_ahat_base_form(self, rng):
        # order-1 hatted term is minus the diagonal product
        from cdpde.identities import _mini_problem
        from cdpde.solver import lattice_points, solve_neumann
        prob = _mini_problem(2, seed=13)
        d = 4
        pts = lattice_points(2, prob.foliation, np.zeros(d), np.zeros(d), 3, 3, 2.0)
        K, _ = solve_neumann(prob, pts)
        EK = prob.E.apply(K)
        req = bt.BoundaryTermRequest("Ahat", 1, prob.int_spec, pts[3, :2 * d],
                                     K=K, E=prob.E, Ax=prob.ax())
        got = bt.evaluate_boundary_term(req)
        want = (-(K * EK.restrict_slot(1, 0).rename_slots([0], (d, d)))
                ).eval_one(pts[3, :2 * d])
        assert (got - want).norm() <= 1e-12

    def test_family_gate(self, rng):
        spec, v0, F, N = make_pair(2, rng)
        with pytest.raises(ValueError):
            bt.BoundaryTermRequest("X", 1, spec, np.zeros(8))
        with pytest.raises(bt.OrderError):
            bt.BoundaryTermRequest("A", 9, spec, np.zeros(8))

    def test_commuting_symmetry_gives_zero_remainders(self, rng):
        from cdpde.identities import _mini_problem
        from cdpde.solver import lattice_points, solve_neumann
        prob = _mini_problem(2, seed=17)
        d = 4
        pts = lattice_points(2, prob.foliation, np.zeros(d), np.zeros(d), 3, 3, 2.0)
        K, _ = solve_neumann(prob, pts)
        for fam in ("P", "Q"):
            req = bt.BoundaryTermRequest(fam, 3, prob.int_spec, pts[0, :2 * d],
                                         K=K, E=prob.E, Ax=prob.ax())
            # the catalog symmetry family commutes with sigma: remainders
            # evaluate to end exactly zero
            assert bt.evaluate_boundary_term(req).norm() <= 1e-12
