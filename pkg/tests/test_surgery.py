import numpy as np
import pytest

from vmoment import catalog, mixed
from vmoment.mesh import build_interval_mesh, build_rect_mesh
from vmoment.radial import (RadialProblem, exact_radial_solution,
                            solve_radial_fourth_order)
from vmoment.surgery import (SurgeryConfig, _extend, surgical_solve_mixed,
                             surgical_solve_radial)


def exp_problem(eps):
    def f(r):
        r = np.asarray(r, dtype=float)
        return (1 + r ** 2) * np.exp(r ** 2)
    return RadialProblem(n=2, R=1.0, f=f, gR=float(np.exp(0.5)), eps=eps)


class TestConfig:
    def test_zero_iterations_rejected(self):
        with pytest.raises(ValueError):
            SurgeryConfig(iterations=0)

    def test_bad_band(self):
        with pytest.raises(ValueError):
            SurgeryConfig(c_band=0.0)

    def test_bad_extension(self):
        with pytest.raises(ValueError):
            SurgeryConfig(extension="spline")

    def test_band_collapse(self):
        prob = exp_problem(0.2)
        mesh = build_interval_mesh(1.0, 50)
        with pytest.raises(ValueError):
            surgical_solve_radial(prob, mesh, SurgeryConfig(c_band=4.0))


class TestExtension:
    def test_nearest(self):
        out = _extend([1.0, 3.0], [0.0, 5.0], "nearest-inner-sample")
        np.testing.assert_allclose(out, [1.0, 3.0])

    def test_max_constant(self):
        out = _extend([1.0, 3.0], [0.0, 5.0], "max-constant")
        np.testing.assert_allclose(out, [3.0, 3.0])

    def test_linear_bounded_by_samples(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            near = rng.standard_normal(6)
            far = rng.standard_normal(6)
            out = _extend(near, far, "linear-along-normal")
            lo = min(near.min(), far.min())
            hi = max(near.max(), far.max())
            assert np.all(out >= lo - 1e-14)
            assert np.all(out <= hi + 1e-14)


class TestRadialSurgery:
    def test_iteration_zero_is_plain_solve(self):
        prob = exp_problem(0.01)
        mesh = build_interval_mesh(1.0, 100)
        plain = solve_radial_fourth_order(prob, mesh, tol=1e-9)
        _, trace = surgical_solve_radial(prob, mesh,
                                         SurgeryConfig(iterations=1), tol=1e-9)
        np.testing.assert_array_equal(trace.states[0].u.coeffs,
                                      plain.u.coeffs)

    def test_trace_improves(self):
        prob = exp_problem(0.01)
        mesh = build_interval_mesh(1.0, 100)
        ex = exact_radial_solution(prob, "convex")
        _, trace = surgical_solve_radial(
            prob, mesh, SurgeryConfig(c_band=20.0, iterations=2), exact=ex)
        te = [rec["trace_err"] for rec in trace.errors]
        assert te[1] < te[0] / 2
        assert te[2] <= te[1]

    def test_exact_compatible_data_is_near_fixed_point(self):
        # start from the compatible trace: later passes change the error
        # only marginally (the corrector has nothing to fix)
        prob = exp_problem(0.01)
        mesh = build_interval_mesh(1.0, 100)
        ex = exact_radial_solution(prob, "convex")
        phi = float(ex.laplacian(1.0))
        _, trace = surgical_solve_radial(
            prob, mesh, SurgeryConfig(c_band=1.0, iterations=2), exact=ex,
            initial_second_trace=phi)
        l2 = [rec["L2"] for rec in trace.errors]
        for a, b in zip(l2, l2[1:]):
            assert abs(b - a) / a <= 0.05

    def test_concave_branch_rejected(self):
        prob = exp_problem(-0.01)
        mesh = build_interval_mesh(1.0, 50)
        with pytest.raises(ValueError):
            surgical_solve_radial(prob, mesh, SurgeryConfig())

    def test_extended_value_recorded(self):
        prob = exp_problem(0.01)
        mesh = build_interval_mesh(1.0, 100)
        _, trace = surgical_solve_radial(prob, mesh,
                                         SurgeryConfig(iterations=1))
        assert len(trace.trace_values) == 1
        assert len(trace.errors) == 2  # uncorrected pass plus one correction


class TestMixedSurgery:
    def test_runs_and_improves_trace(self):
        entry = catalog.get("ma-exp")
        eps = 0.05
        mesh = build_rect_mesh(entry.x_range, entry.y_range, 10, 10)
        space = mixed.build_space(mesh, k=2, tau=0.0)
        cfg = SurgeryConfig(c_band=3.0, iterations=1)
        _, trace = surgical_solve_mixed(lambda e: entry.build(e), space, eps,
                                        cfg, tol=1e-9)
        te = [rec["trace_err"] for rec in trace.errors]
        assert len(te) == 2
        assert te[1] < te[0]

    def test_band_collapse(self):
        entry = catalog.get("ma-exp")
        mesh = build_rect_mesh(entry.x_range, entry.y_range, 4, 4)
        space = mixed.build_space(mesh, k=1, tau=0.0)
        with pytest.raises(ValueError):
            surgical_solve_mixed(lambda e: entry.build(e), space, 0.3,
                                 SurgeryConfig(c_band=2.0))
