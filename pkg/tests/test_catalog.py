"""Symbolic verification of every manufactured catalog entry.

An independent sympy oracle recomputes all derivatives from the closed-form
solution expression and checks that each entry's data make the strong
residual vanish: eps * bilap(u) + F(D2u, grad u, u, x) = 0 for
regularized-exact entries, and the eps -> 0 equation for limit-exact ones.
"""
import numpy as np
import pytest
import sympy as sp

from vmoment import catalog
from vmoment.nonlinearity import (GaussCurvature, InfinityLaplacian,
                                  MongeAmpere)

X1, X2 = sp.symbols("x1 x2", real=True)
RHO = X1 ** 2 + X2 ** 2

U_EXPR = {
    "ma-quadratic": RHO,
    "ma-quartic": X1 ** 4 + X2 ** 2,
    "ma-exp": sp.exp(RHO / 2),
    "gauss-exp": sp.exp(RHO / 2),
    "gauss-octic": RHO ** 4 / 8,
    "il-trig": sp.cos(X1) - sp.cos(X2),
    "il-quadratic": RHO,
}

EPS = 0.0173  # deliberately unround


def _symbolic_pack(u):
    du = [sp.diff(u, v) for v in (X1, X2)]
    hess = [[sp.diff(u, a, b) for b in (X1, X2)] for a in (X1, X2)]
    lap = hess[0][0] + hess[1][1]
    bilap = sp.diff(lap, X1, 2) + sp.diff(lap, X2, 2)
    return du, hess, bilap


def _operator_expr(op, hess, du):
    det = hess[0][0] * hess[1][1] - hess[0][1] ** 2
    if isinstance(op, MongeAmpere):
        return -det
    if isinstance(op, GaussCurvature):
        return -det / (1 + du[0] ** 2 + du[1] ** 2) ** 2
    if isinstance(op, InfinityLaplacian):
        num = (hess[0][0] * du[0] ** 2 + 2 * hess[0][1] * du[0] * du[1]
               + hess[1][1] * du[1] ** 2)
        return -num / (du[0] ** 2 + du[1] ** 2 + op.gamma)
    raise TypeError(op)


def _points(entry, m=100, seed=5):
    rng = np.random.default_rng(seed)
    pad = 0.02
    x = rng.uniform(entry.x_range[0] + pad, entry.x_range[1] - pad, m)
    y = rng.uniform(entry.y_range[0] + pad, entry.y_range[1] - pad, m)
    return np.column_stack([x, y])


@pytest.mark.parametrize("pid", sorted(U_EXPR))
def test_exact_derivatives_match_sympy(pid):
    entry = catalog.get(pid)
    kw = {"gamma": entry.gamma_from_eps(EPS)} if entry.gamma_from_eps else {}
    spec = entry.build(EPS, **kw)
    u = U_EXPR[pid]
    if isinstance(spec.operator, InfinityLaplacian):
        # the symbolic operator must see the same regularizer
        u = U_EXPR[pid]
    du, hess, bilap = _symbolic_pack(u)
    fv = sp.lambdify((X1, X2), u, "numpy")
    fg = [sp.lambdify((X1, X2), d, "numpy") for d in du]
    fh = [[sp.lambdify((X1, X2), hess[i][j], "numpy") for j in (0, 1)]
          for i in (0, 1)]
    fb = sp.lambdify((X1, X2), bilap, "numpy")
    pts = _points(entry)
    x, y = pts[:, 0], pts[:, 1]
    np.testing.assert_allclose(spec.exact.value(pts), fv(x, y) + 0 * x,
                               atol=1e-12, rtol=1e-12)
    grads = spec.exact.gradient(pts)
    np.testing.assert_allclose(grads[:, 0], fg[0](x, y) + 0 * x, atol=1e-12)
    np.testing.assert_allclose(grads[:, 1], fg[1](x, y) + 0 * x, atol=1e-12)
    H = spec.exact.hessian(pts)
    for i in (0, 1):
        for j in (0, 1):
            np.testing.assert_allclose(H[:, i, j], fh[i][j](x, y) + 0 * x,
                                       atol=1e-11)
    if spec.exact.bilaplacian is not None:
        np.testing.assert_allclose(spec.exact.bilaplacian(pts),
                                   fb(x, y) + 0 * x, atol=1e-10)


@pytest.mark.parametrize("pid", sorted(U_EXPR))
def test_strong_residual_vanishes(pid):
    entry = catalog.get(pid)
    kw = {"gamma": entry.gamma_from_eps(EPS)} if entry.gamma_from_eps else {}
    spec = entry.build(EPS, **kw)
    u = U_EXPR[pid]
    du, hess, bilap = _symbolic_pack(u)
    op_expr = _operator_expr(spec.operator, hess, du)
    eps_term = EPS * bilap if spec.exact.regularized else sp.Integer(0)
    op_fn = sp.lambdify((X1, X2), op_expr + eps_term, "numpy")
    pts = _points(entry)
    x, y = pts[:, 0], pts[:, 1]
    residual = op_fn(x, y) + spec.f_at(pts)
    scale = 1.0 + np.max(np.abs(spec.f_at(pts)))
    assert np.max(np.abs(residual)) <= 1e-8 * scale


@pytest.mark.parametrize("pid", sorted(U_EXPR))
def test_second_trace_matches_hessian(pid):
    entry = catalog.get(pid)
    kw = {"gamma": entry.gamma_from_eps(EPS)} if entry.gamma_from_eps else {}
    spec = entry.build(EPS, **kw)
    if spec.second_trace is None:
        pytest.skip("entry uses the constant-eps trace datum")
    rng = np.random.default_rng(2)
    for nu in (np.array([1.0, 0]), np.array([-1.0, 0]),
               np.array([0, 1.0]), np.array([0, -1.0])):
        for _ in range(10):
            x = np.array([rng.uniform(*entry.x_range),
                          rng.uniform(*entry.y_range)])
            H = np.asarray(spec.exact.hessian(x[None, :]))[0]
            want = float(nu @ H @ nu)
            got = float(spec.second_trace(x, nu))
            assert got == pytest.approx(want, abs=1e-11)


def test_boundary_value_matches_exact():
    for pid in sorted(U_EXPR):
        entry = catalog.get(pid)
        kw = {"gamma": entry.gamma_from_eps(EPS)} if entry.gamma_from_eps else {}
        spec = entry.build(EPS, **kw)
        pts = _points(entry, m=20, seed=9)
        np.testing.assert_allclose(spec.g(pts), spec.exact.value(pts),
                                   atol=1e-13)
        if spec.grad_g is not None:
            np.testing.assert_allclose(spec.grad_g(pts),
                                       spec.exact.gradient(pts), atol=1e-12)


def test_unknown_id_raises():
    with pytest.raises(KeyError):
        catalog.get("nope")
    with pytest.raises(ValueError):
        catalog.build_2d("radial-ma-exp", 0.1)
    with pytest.raises(ValueError):
        catalog.build_radial("ma-quartic", 0.1)


def test_radial_entry_solves_limit_equation():
    # det(D2u) in radial form equals f for u = e^(r^2/2), any n
    for n in (2, 3, 4):
        prob = catalog.build_radial("radial-ma-exp", 0.1, n=n)
        r = np.linspace(0.05, 0.99, 40)
        u_r = r * np.exp(r ** 2 / 2)
        u_rr = (1 + r ** 2) * np.exp(r ** 2 / 2)
        det = u_rr * (u_r / r) ** (n - 1)
        np.testing.assert_allclose(det, prob.f(r), rtol=1e-12)
