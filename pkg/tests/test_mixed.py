import numpy as np
import pytest

from vmoment import catalog, mixed
from vmoment.fem import interpolate_2d
from vmoment.mesh import build_rect_mesh
from vmoment.nonlinearity import (InfinityLaplacian, MongeAmpere, ProblemSpec)


def quad_spec(eps=1e-3):
    return catalog.build_2d("ma-quadratic", eps)


def small_space(n=4, k=2, tau=0.0):
    mesh = build_rect_mesh((0, 1), (0, 1), n, n)
    return mixed.build_space(mesh, k=k, tau=tau)


class TestResidual:
    @pytest.mark.parametrize("tau", [0.0, 0.5])
    def test_exact_interpolant_residual_vanishes(self, tau):
        # u quadratic, sigma = 2I + tau*u*I: in the k=2 space the interpolant
        # is exact and the bilaplacian term vanishes identically
        eps = 1e-3
        spec = quad_spec(eps)
        space = small_space(n=4, k=2, tau=tau)
        state = mixed.MixedState(space, eps, np.zeros(space.n_total))
        coords = space.dofmap.coords
        uex = spec.exact.value(coords)
        state.part("u")[:] = uex
        state.part("s11")[:] = 2.0 + tau * uex
        state.part("s12")[:] = 0.0
        state.part("s22")[:] = 2.0 + tau * uex
        res, _, mag = mixed.assemble_residual_jacobian(spec, space, state)
        free = space.free_mask()
        rel = np.linalg.norm(res[free]) / np.linalg.norm(mag[free])
        assert rel <= 1e-13

    def test_zero_data_zero_residual(self):
        spec = ProblemSpec(
            operator=MongeAmpere(),
            f=lambda x: np.zeros(len(np.atleast_2d(x))),
            g=lambda x: np.zeros(len(np.atleast_2d(x))),
            grad_g=lambda x: np.zeros_like(np.atleast_2d(x)),
            second_trace=lambda x, nu: 0.0)
        space = small_space(n=3, k=1)
        state = mixed.MixedState(space, 1e-2, np.zeros(space.n_total))
        res, _, _ = mixed.assemble_residual_jacobian(spec, space, state)
        assert np.max(np.abs(res)) == 0.0

    def test_state_dimension_mismatch(self):
        spec = quad_spec()
        space = small_space()
        bad = mixed.MixedState(space, 1e-3, np.zeros(7))
        with pytest.raises(RuntimeError):
            mixed.assemble_residual_jacobian(spec, space, bad)

    @pytest.mark.parametrize("pid,tau", [("ma-quadratic", 0.0),
                                         ("gauss-exp", 0.0),
                                         ("il-trig", 1.0)])
    def test_jacobian_matches_finite_differences(self, pid, tau):
        eps = 0.02
        entry = catalog.get(pid)
        kw = {"gamma": 1e-4} if entry.gamma_from_eps else {}
        spec = entry.build(eps, **kw)
        mesh = build_rect_mesh(entry.x_range, entry.y_range, 4, 4)
        space = mixed.build_space(mesh, k=1, tau=tau)
        rng = np.random.default_rng(21)
        state = mixed.initial_guess(spec, space, eps)
        state.X += 0.01 * rng.standard_normal(space.n_total)
        mixed.apply_boundary_data(spec, space, state.X, eps)
        res, J, _ = mixed.assemble_residual_jacobian(spec, space, state)
        Jd = J.todense()
        delta = 1e-6
        free = np.nonzero(space.free_mask())[0]
        for j in rng.choice(free, 20, replace=False):
            xp = state.copy()
            xp.X[j] += delta
            xm = state.copy()
            xm.X[j] -= delta
            rp, _, _ = mixed.assemble_residual_jacobian(spec, space, xp,
                                                        want_matrix=False)
            rm, _, _ = mixed.assemble_residual_jacobian(spec, space, xm,
                                                        want_matrix=False)
            fd = (rp - rm) / (2 * delta)
            scale = max(np.max(np.abs(Jd[:, j])), 1.0)
            assert np.max(np.abs(fd - Jd[:, j])) / scale <= 1e-5


class TestNewton:
    def test_restart_at_solution_is_free(self):
        spec = quad_spec()
        space = small_space(n=6, k=2)
        st0 = mixed.initial_guess(spec, space, 1e-3)
        st, _ = mixed.newton_solve(spec, space, st0, tol=1e-11)
        st2, rep = mixed.newton_solve(spec, space, st, tol=1e-10)
        assert rep.iterations <= 1
        assert rep.converged

    def test_quadratic_from_poisson_guess(self):
        # 16x16, k=1: the Poisson start is nodal-exact and Newton converges
        # well within eight iterations
        spec = quad_spec(1e-3)
        mesh = build_rect_mesh((0, 1), (0, 1), 16, 16)
        space = mixed.build_space(mesh, k=1, tau=0.0)
        st0 = mixed.initial_guess(spec, space, 1e-3)
        st, rep = mixed.newton_solve(spec, space, st0, tol=1e-10)
        assert rep.converged and rep.iterations <= 8
        assert rep.residual_history[-1] <= 1e-10

    def test_quadratic_reproduced_exactly_k2(self):
        # with quadratics in the space the discrete solution hits the exact
        # one at machine precision, independently of eps
        spec = quad_spec(1e-3)
        space = small_space(n=8, k=2)
        st0 = mixed.initial_guess(spec, space, 1e-3)
        st, _ = mixed.newton_solve(spec, space, st0, tol=1e-11)
        errs = mixed.state_errors(st, spec.exact)
        assert errs["L2"] <= 1e-8 and errs["Linf"] <= 1e-8

    def test_quadratic_tail(self):
        spec = quad_spec()
        space = small_space(n=8, k=2)
        st0 = mixed.initial_guess(spec, space, 1e-3)
        st, _ = mixed.newton_solve(spec, space, st0, tol=1e-12)
        rng = np.random.default_rng(4)
        pert = st.copy()
        free = space.free_mask()
        pert.X[free] += 1e-3 * rng.standard_normal(free.sum())
        _, rep = mixed.newton_solve(spec, space, pert, tol=1e-12)
        h = rep.residual_history
        assert rep.iterations <= 3
        ratios = [h[i + 1] / h[i] ** 2 for i in range(len(h) - 1)]
        assert all(r <= 1e4 for r in ratios)

    def test_essential_data_exact_after_solve(self):
        entry = catalog.get("il-trig")
        spec = entry.build(0.01, gamma=1e-4)
        mesh = build_rect_mesh(entry.x_range, entry.y_range, 5, 5)
        space = mixed.build_space(mesh, k=2, tau=1.0)
        st0 = mixed.initial_guess(spec, space, 0.01)
        st, _ = mixed.newton_solve(spec, space, st0, tol=1e-10)
        coords = space.dofmap.coords
        offs = space.offsets()
        gb = spec.g(coords[space.u_bdofs])
        np.testing.assert_allclose(st.X[offs["u"] + space.u_bdofs], gb,
                                   atol=1e-14)
        comp_off = {0: offs["s11"], 2: offs["s22"]}
        for c, d, nu in space.snn_constraints:
            x = coords[d]
            want = float(spec.second_trace(x, nu)) \
                + space.tau * float(spec.g(x[None, :])[0])
            assert st.X[comp_off[c] + d] == pytest.approx(want, abs=1e-14)

    def test_gamma_zero_regularized_by_biharmonic_term(self):
        # with gamma = 0 and a constant boundary value, the gradient vanishes
        # and the F_r block degenerates to zero; the eps-biharmonic part keeps
        # the saddle system invertible, so the solve completes
        spec = ProblemSpec(
            operator=InfinityLaplacian(gamma=0.0),
            f=None,
            g=lambda x: np.ones(len(np.atleast_2d(x))),
            grad_g=lambda x: np.zeros_like(np.atleast_2d(x)),
            second_trace=None)
        space = small_space(n=3, k=1)
        st0 = mixed.MixedState(space, 1e-2, np.zeros(space.n_total))
        st, rep = mixed.newton_solve(spec, space, st0, tol=1e-10)
        assert rep.converged
        # the eps-valued trace datum bends u slightly away from the constant
        interior = np.setdiff1d(np.arange(space.n_scalar), space.u_bdofs)
        np.testing.assert_allclose(st.part("u")[interior], 1.0, atol=1e-3)


class TestJacobianStructure:
    def test_mass_block_symmetric_and_transposed_bt(self):
        # at sigma = 0 the Monge-Ampere F_r block vanishes, leaving the pure
        # saddle structure: W/u block equals the transposed u/W block over eps
        eps = 0.37
        spec = quad_spec()
        space = small_space(n=3, k=1)
        state = mixed.MixedState(space, eps, np.zeros(space.n_total))
        _, J, _ = mixed.assemble_residual_jacobian(spec, space, state)
        Jd = J.todense()
        n = space.n_scalar
        for c in range(3):
            blk = Jd[c * n:(c + 1) * n, c * n:(c + 1) * n]
            assert np.max(np.abs(blk - blk.T)) <= 1e-12
        W_u = Jd[:3 * n, 3 * n:]
        u_W = Jd[3 * n:, :3 * n]
        assert np.max(np.abs(u_W - eps * W_u.T)) <= 1e-12


class TestContinuation:
    def test_single_stage_when_start_equals_target(self):
        entry = catalog.get("ma-quadratic")
        space = small_space(n=4, k=1)
        st, rep = mixed.continuation_solve(lambda e: entry.build(e), space,
                                           eps_target=1e-2, eps_start=1e-2)
        assert rep.eps_path == [1e-2]

    def test_ratio_one_idempotent(self):
        entry = catalog.get("ma-quadratic")
        space = small_space(n=4, k=1)
        st1, _ = mixed.continuation_solve(lambda e: entry.build(e), space,
                                          eps_target=1e-2, tol=1e-11)
        st3, rep = mixed.continuation_solve(lambda e: entry.build(e), space,
                                            eps_target=1e-2, ratio=1.0,
                                            min_stages=3, tol=1e-11)
        assert len(rep.eps_path) == 3
        assert np.max(np.abs(st1.X - st3.X)) <= 1e-12

    def test_continuation_reaches_small_eps(self):
        entry = catalog.get("ma-exp")
        mesh = build_rect_mesh((0, 1), (0, 1), 12, 12)
        space = mixed.build_space(mesh, k=2, tau=0.0)
        st, rep = mixed.continuation_solve(lambda e: entry.build(e), space,
                                           eps_target=1e-2, eps_start=8e-2,
                                           tol=1e-9)
        assert rep.converged
        spec = entry.build(1e-2)
        errs = mixed.state_errors(st, spec.exact)
        assert errs["L2"] < 2e-2   # O(eps) distance to the limit solution

    def test_schedule_validation(self):
        entry = catalog.get("ma-quadratic")
        space = small_space(n=3, k=1)
        with pytest.raises(ValueError):
            mixed.continuation_solve(lambda e: entry.build(e), space,
                                     eps_target=1e-2, eps_start=-1e-1)
        with pytest.raises(ValueError):
            mixed.continuation_solve(lambda e: entry.build(e), space,
                                     eps_target=1e-2, eps_start=1e-3)
        with pytest.raises(ValueError):
            mixed.continuation_solve(lambda e: entry.build(e), space,
                                     eps_target=1e-2, ratio=1.5)


class TestInitialGuess:
    def test_poisson_exact_for_quadratic_data(self):
        spec = quad_spec()
        space = small_space(n=5, k=1)
        st = mixed.initial_guess(spec, space, 1e-3)
        np.testing.assert_allclose(st.part("u"),
                                   spec.exact.value(space.dofmap.coords),
                                   atol=1e-12)

    def test_harmonic_extension_for_il(self):
        spec = ProblemSpec(
            operator=InfinityLaplacian(gamma=1e-4), f=None,
            g=lambda x: np.atleast_2d(x)[:, 0],
            grad_g=lambda x: np.tile([1.0, 0.0], (len(np.atleast_2d(x)), 1)),
            second_trace=None)
        space = small_space(n=4, k=1)
        st = mixed.initial_guess(spec, space, 1e-2)
        np.testing.assert_allclose(st.part("u"), space.dofmap.coords[:, 0],
                                   atol=1e-12)

    def test_sigma_satisfies_first_equation(self):
        spec = catalog.build_2d("ma-exp", 1e-2)
        space = small_space(n=5, k=2)
        st = mixed.initial_guess(spec, space, 1e-2)
        res, _, mag = mixed.assemble_residual_jacobian(spec, space, st)
        free = space.free_mask()
        n = space.n_scalar
        w_rows = free.copy()
        w_rows[3 * n:] = False
        rel = np.linalg.norm(res[w_rows]) / np.linalg.norm(mag[w_rows])
        assert rel <= 1e-10


class TestInfSup:
    def test_nondecaying_across_refinements(self):
        betas = []
        for n in (2, 4, 8):
            space = small_space(n=n, k=2, tau=0.0)
            betas.append(mixed.infsup_probe(space, trials=5)["beta"])
        assert betas[0] > 0
        for b0, b1 in zip(betas, betas[1:]):
            assert b1 >= 0.8 * b0

    def test_candidate_bound_positive_small_tau(self):
        space = small_space(n=4, k=2, tau=0.1)
        out = mixed.infsup_probe(space, trials=8)
        assert out["min_candidate_ratio"] > 0
        assert out["min_random_ratio"] >= out["beta"] - 1e-9

    def test_trials_validation(self):
        space = small_space(n=2, k=1)
        with pytest.raises(ValueError):
            mixed.infsup_probe(space, trials=0)


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        spec = quad_spec()
        space = small_space(n=4, k=2, tau=0.25)
        st0 = mixed.initial_guess(spec, space, 1e-3)
        path = tmp_path / "state.vmm"
        mixed.save_state(path, st0)
        st1 = mixed.load_state(path)
        assert st1.space.k == 2
        assert st1.space.tau == 0.25
        assert st1.eps == 1e-3
        np.testing.assert_array_equal(st0.X, st1.X)

    def test_magic_validation(self, tmp_path):
        path = tmp_path / "bad.vmm"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValueError):
            mixed.load_state(path)
