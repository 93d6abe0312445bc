"""Scenario catalog: seed constraints, membership gates, end-to-end residuals."""
import numpy as np
import pytest

from cdpde.scenarios import (ScenarioError, catalog_names, load_scenario,
                             run_scenario)


class TestCatalog:
    def test_names(self):
        names = catalog_names()
        assert names == sorted([
            "ex3_7", "ex3_8", "ex3_9", "ex3_10", "ex3_11_multiplier",
            "ex3_12", "ex3_13", "ex3_14_1", "kdv_4_2", "newtonian_4_3",
        ])

    def test_unknown_family(self):
        with pytest.raises(ScenarioError):
            load_scenario("no_such_scenario")


class TestSeeds:
    @pytest.mark.parametrize("name", catalog_names())
    def test_linear_constraints(self, name, rng):
        sc = load_scenario(name)
        assert sc.validate_seed(rng) <= 1e-9

    @pytest.mark.parametrize("name", catalog_names())
    def test_symmetry_membership(self, name, rng):
        sc = load_scenario(name)
        assert sc.validate_symmetry(rng) <= 1e-10

    def test_composed_kernel_parameter_gate(self):
        with pytest.raises(ScenarioError):
            load_scenario("ex3_13", {"a": 5.0, "b": 2.0})


class TestPipelines:
    def test_quaternion_scenario(self):
        out = run_scenario(load_scenario("ex3_8"))
        assert out["diagnostics"].converged
        assert out["residual_norms"]["pde"] <= 1e-4

    def test_octonion_scenario(self):
        out = run_scenario(load_scenario("ex3_9"))
        assert out["diagnostics"].converged
        assert out["residual_norms"]["pde"] <= 1e-4

    def test_kdv_at_unit_coupling(self):
        sc = load_scenario("kdv_4_2")
        assert sc.p == 1.0
        out = run_scenario(sc)
        assert out["diagnostics"].converged
        assert out["residual_norms"]["pde"] <= 1e-4
        assert out["residual_norms"]["kdv_v"] <= 1e-4
        # the nonlinear profile is genuinely present
        assert out["residual_norms"]["_v"] > 1e-2
        # operator bracket terms are evaluated and reported
        assert "_bracket_zx" in out["residual_norms"]
        assert "_bracket_xx" in out["residual_norms"]

    def test_composed_kernel_branches(self):
        for name in ("ex3_13", "ex3_13_alt"):
            sc = load_scenario(name)
            out = run_scenario(sc)
            assert out["residual_norms"]["pde"] <= sc.residual_ceiling

    def test_override_p(self):
        sc = load_scenario("ex3_8", {"p": 0.02})
        assert sc.p == 0.02
        out = run_scenario(sc)
        assert out["residual_norms"]["pde"] <= 1e-4


class TestSpecInvariants:
    def test_operator_form_of_the_residual(self):
        # R_s(K) = L_s K - A_x E (L_s K) equals (I - A_x E) M_s(K) where
        # M_s is the hat-term assembly of the scenario's residual
        import numpy as np
        from cdpde import commutators as bt
        from cdpde.scenarios import _standard_N0
        from cdpde.solver import solve_neumann
        sc = load_scenario("ex3_8")
        pts = sc.lattice()
        K, _ = solve_neumann(sc.problem, pts)
        L2 = dict(sc.L_ops)["L2"]
        a2 = sc.params.get("a2", 1.0)
        Ax = sc.problem.ax()
        N0 = _standard_N0(K, sc.E)
        ah, _ = bt.ahat_p(2, K, N0, sc.E, Ax, sc.spec)
        bh, _ = bt.bhat_q(2, K, sc.E, Ax, sc.spec)
        M = (ah.scale(2 * a2) + bh.scale(-2 * a2)).scale(sc.p)
        LK = L2(K)
        R = LK - Ax(sc.E.apply(LK))
        rhs = M - Ax(sc.E.apply(M))
        scale = max(R.sup_norm(pts), 1e-30)
        assert (R - rhs).sup_norm(pts) / scale <= 1e-5

    def test_t_derivative_under_the_integral(self):
        # d_t of the improper integral = integral of d_t F * N plus
        # integral of F * d_t N, exact on the closed-form class
        import numpy as np
        from cdpde.kernels import dim
        from cdpde.lineint import improper_field
        from cdpde.solver import solve_neumann
        sc = load_scenario("ex3_14_1")
        pts = sc.lattice()
        K, _ = solve_neumann(sc.problem, pts)
        d = dim(sc.level)
        prob = sc.problem
        N = prob.make_N(K)
        F_l = prob.F.rename_slots([1, 2] + prob._extra_map(), prob._universe())
        t_coord = 3 * d  # t slot of the integrand universe
        lhs = improper_field(F_l * N, sc.spec, 1, 0, sc.foliation.v0).partial(2 * d)
        rhs = (improper_field(F_l.partial(t_coord) * N, sc.spec, 1, 0, sc.foliation.v0)
               + improper_field(F_l * N.partial(t_coord), sc.spec, 1, 0,
                                sc.foliation.v0))
        scale = max(lhs.sup_norm(pts), 1e-30)
        assert (lhs - rhs).sup_norm(pts) / scale <= 1e-6
