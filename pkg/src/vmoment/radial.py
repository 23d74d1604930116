"""Radial Monge-Ampere solvers on a ball, reduced to the interval (0, R).

Two independent discretizations of the regularized problem are provided:

* `solve_reduced_w`: the second-order equation for w = r^(n-1) u_r with a
  P2 Lagrange space, solved by the constructive Picard iteration followed
  by a Newton polish, then `recover_u` integrates w back to u.
* `solve_radial_fourth_order`: the fourth-order weak form discretized with
  C^1 Hermite cubics and solved by Newton with eps-continuation.  Negative
  eps selects the concave branch (even dimensions).

Closed-form reference solutions come from the cumulative source integral
L_f, never from the PDE solvers, so error norms are checked against an
independent oracle.  Weighted norms use the measure r^(n-1) dr.
"""
from __future__ import annotations

import logging
import weakref
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import sparse
from .fem import (Field1D, build_dofmap_interval, element_context,
                  hermite_interval, lagrange_interval, make_quadrature)
from .mesh import Mesh1D

logger = logging.getLogger(__name__)

__all__ = [
    "RadialProblem", "RadialState", "ConvexityReport", "NonconvergenceError",
    "L_f", "exact_radial_solution", "solve_reduced_w", "recover_u",
    "solve_radial_fourth_order", "convexity_report", "radial_error",
]


class NonconvergenceError(RuntimeError):
    """Iteration failed; carries the residual/update history."""

    def __init__(self, message, history=None, eps=None):
        super().__init__(message)
        self.history = list(history or [])
        self.eps = eps


@dataclass(frozen=True)
class RadialProblem:
    """Radial Monge-Ampere data on the ball of radius R in dimension n."""

    n: int
    R: float
    f: Callable
    gR: float
    eps: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"dimension must be >= 2, got n={self.n}")
        if not (self.R > 0):
            raise ValueError(f"radius must be positive, got {self.R}")
        if self.eps == 0:
            raise ValueError("eps must be nonzero")


@dataclass(frozen=True)
class ConvexityReport:
    min_laplacian: float
    nonconvex_band: float
    band_start: Optional[float]


@dataclass
class RadialState:
    """Converged radial solve: w (when produced), the recovered/discrete u,
    and convexity diagnostics."""

    problem: RadialProblem
    u: object
    w: Optional[Field1D] = None
    diagnostics: Optional[ConvexityReport] = None
    residual_history: list = field(default_factory=list)
    picard_history: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# cumulative radial integrals
# ---------------------------------------------------------------------------

class _CumulativeGauss:
    """Cumulative integral x -> int_0^x g(t) dt on [0, R], panelwise Gauss."""

    def __init__(self, g, R, panels=256, order=12):
        self.g = g
        self.R = R
        self.edges = np.linspace(0.0, R, panels + 1)
        gp, gw = np.polynomial.legendre.leggauss(order)
        self.gp = 0.5 * (gp + 1.0)
        self.gw = 0.5 * gw
        h = np.diff(self.edges)
        pts = self.edges[:-1, None] + np.outer(h, self.gp)
        vals = np.asarray(g(pts.ravel())).reshape(pts.shape)
        self.panel = (vals @ self.gw) * h
        self.cum = np.concatenate([[0.0], np.cumsum(self.panel)])

    def __call__(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        idx = np.clip(np.searchsorted(self.edges, r, side="right") - 1,
                      0, len(self.edges) - 2)
        a = self.edges[idx]
        span = r - a
        pts = a[:, None] + np.outer(span, self.gp)
        vals = np.asarray(self.g(pts.ravel())).reshape(pts.shape)
        partial = (vals @ self.gw) * span
        return self.cum[idx] + partial

    @property
    def total(self):
        return float(self.cum[-1])


_LF_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _lf_cache(problem: RadialProblem) -> _CumulativeGauss:
    cache = _LF_CACHE.get(problem)
    if cache is None:
        def integrand(t):
            t = np.asarray(t)
            return t ** (problem.n - 1) * np.asarray(problem.f(t))
        cache = _CumulativeGauss(integrand, problem.R, panels=256)
        check = _CumulativeGauss(integrand, problem.R, panels=512)
        # one refinement check; double again if the tail disagrees
        if abs(cache.total - check.total) > 1e-12 * (1.0 + abs(check.total)):
            cache = check
            check = _CumulativeGauss(integrand, problem.R, panels=1024)
            if abs(cache.total - check.total) > 1e-12 * (1.0 + abs(check.total)):
                cache = check
        _LF_CACHE[problem] = cache
    return cache


def L_f(problem: RadialProblem, r):
    """Cumulative source integral int_0^r t^(n-1) f(t) dt."""
    arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(arr < -1e-14) or np.any(arr > problem.R * (1 + 1e-14)):
        raise ValueError(f"radius outside [0, {problem.R}]")
    out = _lf_cache(problem)(np.clip(arr, 0.0, problem.R))
    return out if np.ndim(r) else float(out[0])


# ---------------------------------------------------------------------------
# closed-form reference solutions
# ---------------------------------------------------------------------------

class ExactRadial:
    """u(r) = g(R) -/+ int_r^R (n L_f)^(1/n) ds with analytic derivatives."""

    def __init__(self, problem: RadialProblem, branch: str):
        if branch not in ("convex", "concave"):
            raise ValueError(f"branch must be convex or concave, got {branch!r}")
        if branch == "concave" and problem.n % 2 == 1:
            raise ValueError("no real concave solution in odd dimensions")
        self.problem = problem
        self.branch = branch
        self.sign = -1.0 if branch == "convex" else 1.0
        lf = _lf_cache(problem)

        def integrand(s):
            return (problem.n * np.maximum(lf(s), 0.0)) ** (1.0 / problem.n)

        self._q = integrand
        self._tail = _CumulativeGauss(integrand, problem.R, panels=512)

    def value(self, r):
        arr = np.atleast_1d(np.asarray(r, dtype=float))
        tail = self._tail.total - self._tail(arr)
        out = self.problem.gR + self.sign * tail
        return out if np.ndim(r) else float(out[0])

    def deriv(self, r):
        arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = -self.sign * self._q(arr)
        return out if np.ndim(r) else float(out[0])

    def second_deriv(self, r):
        n = self.problem.n
        arr = np.atleast_1d(np.asarray(r, dtype=float))
        lf = np.maximum(_lf_cache(self.problem)(arr), 0.0)
        fr = np.asarray(self.problem.f(arr)) * np.ones_like(arr)
        base = n * lf
        with np.errstate(over="ignore", invalid="ignore"):
            formula = arr ** (n - 1) * fr * np.power(np.maximum(base, 1e-280),
                                                     (1.0 - n) / n)
        out = np.where(base > 1e-280, formula, np.maximum(fr, 0.0) ** (1.0 / n))
        out = -self.sign * out
        return out if np.ndim(r) else float(out[0])

    def laplacian(self, r):
        n = self.problem.n
        arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = self.second_deriv(arr) + (n - 1) * self.deriv(arr) / arr
        return out if np.ndim(r) else float(out[0])


def exact_radial_solution(problem: RadialProblem, branch: str = "convex") -> ExactRadial:
    """Lemma-level closed-form solution of the limiting radial problem."""
    return ExactRadial(problem, branch)


# ---------------------------------------------------------------------------
# reduced second-order w-equation (P2 Lagrange)
# ---------------------------------------------------------------------------

def _assemble_w_system(problem, ctx, psi_prev=None, psi_lin=None):
    """Matrix/residual pieces shared by the Picard and Newton stages.

    With psi_prev given, returns the Picard matrix using the frozen factor
    max(psi_prev/r^(n-1), 0)^(n-1).  With psi_lin given, returns the Newton
    Jacobian at psi_lin.  Otherwise only the fixed bilinear part.
    """
    n = problem.n
    eps = problem.eps
    pts = ctx.points[..., 0]
    w = ctx.weights
    V = ctx.values
    D = ctx.grads
    rpow = pts ** (n - 1)

    # eps * int psi' chi'  +  eps (n-1) int psi' chi / r
    blocks = eps * np.einsum("eq,eqi,eqj->eij", w, D, D)
    blocks += eps * (n - 1) * np.einsum("eq,eqi,eqj->eij", w / pts, V, D)
    if psi_prev is not None:
        q = np.maximum(ctx.interp(psi_prev, "value") / rpow, 0.0)
        coeff = q ** (n - 1) / (n * rpow)
        blocks += np.einsum("eq,eqi,eqj->eij", w * coeff, V, V)
    if psi_lin is not None:
        q = ctx.interp(psi_lin, "value") / rpow
        coeff = q ** (n - 1) / rpow
        blocks += np.einsum("eq,eqi,eqj->eij", w * coeff, V, V)
    return blocks


def _scatter(ctx, blocks):
    dofs = ctx.dofmap.element_dofs
    ns = dofs.shape[1]
    rows = np.repeat(dofs, ns, axis=1).ravel()
    cols = np.tile(dofs, (1, ns)).ravel()
    return sparse.from_triplets(ctx.dofmap.n_dofs, ctx.dofmap.n_dofs, None,
                                _arrays=(rows, cols, blocks.ravel()))


def _w_load(problem, ctx):
    n = problem.n
    pts = ctx.points[..., 0]
    lf = _lf_cache(problem)(pts.ravel()).reshape(pts.shape)
    load = np.zeros(ctx.dofmap.n_dofs)
    np.add.at(load, ctx.dofmap.element_dofs.ravel(),
              np.einsum("eq,eqi->ei", ctx.weights * lf, ctx.values).ravel())
    load[-1] += problem.eps ** 2 * problem.R ** (n - 1)  # natural flux at R
    return load


def _w_residual(problem, ctx, psi):
    n = problem.n
    pts = ctx.points[..., 0]
    rpow = pts ** (n - 1)
    dpsi = ctx.interp(psi, "grad")
    vpsi = ctx.interp(psi, "value")
    q = vpsi / rpow
    integrand = problem.eps * np.einsum("eq,eqi->ei", ctx.weights, ctx.grads * dpsi[..., None])
    integrand += problem.eps * (n - 1) * np.einsum(
        "eq,eqi->ei", ctx.weights * dpsi / pts, ctx.values)
    integrand += np.einsum("eq,eqi->ei",
                           ctx.weights * (q ** n) / n, ctx.values)
    out = np.zeros(ctx.dofmap.n_dofs)
    np.add.at(out, ctx.dofmap.element_dofs.ravel(), integrand.ravel())
    return out - _w_load(problem, ctx)


def solve_reduced_w(problem: RadialProblem, mesh: Mesh1D, tol: float = 1e-10,
                    max_picard: int = 500, max_newton: int = 30,
                    initial: Optional[np.ndarray] = None) -> RadialState:
    """Picard construction plus Newton polish for the reduced w-equation.

    Stage one runs the linearized fixed-point iteration from the admissible
    start (eps/n) r^n until the relative update drops below sqrt(tol); stage
    two applies Newton to the full residual down to relative residual tol.
    A warm start (`initial` coefficients, e.g. from a neighbouring eps)
    skips the Picard stage.
    """
    if problem.eps <= 0:
        raise ValueError("the reduced w-equation is posed for eps > 0")
    dofmap = build_dofmap_interval(mesh, lagrange_interval(2))
    quad = make_quadrature("interval", 7)
    ctx = element_context(mesh, dofmap, quad)
    load = _w_load(problem, ctx)
    free = np.arange(1, dofmap.n_dofs)  # psi(0) = 0 essential

    picard_hist = []
    if initial is not None:
        psi = np.asarray(initial, dtype=float).copy()
        psi[0] = 0.0
    else:
        r_dofs = dofmap.coords[:, 0]
        psi = (problem.eps / problem.n) * r_dofs ** problem.n
        psi[0] = 0.0
        sqrt_tol = np.sqrt(tol)
        for k in range(max_picard):
            A = _scatter(ctx, _assemble_w_system(problem, ctx, psi_prev=psi))
            Af = sparse.SparseMatrix(A.csr[free][:, free])
            x, _ = sparse.solve(Af, load[free])
            new = np.zeros_like(psi)
            new[free] = x
            update = float(np.max(np.abs(new - psi)) / max(np.max(np.abs(new)), 1e-300))
            picard_hist.append(update)
            psi = new
            if update < sqrt_tol:
                break
        else:
            raise NonconvergenceError(
                f"Picard stagnation after {max_picard} iterations "
                f"(last update {picard_hist[-1]:.3e})",
                history=picard_hist, eps=problem.eps)

    res_hist = []
    step_ok = False
    for k in range(max_newton):
        R = _w_residual(problem, ctx, psi)
        J = _scatter(ctx, _assemble_w_system(problem, ctx, psi_lin=psi))
        scale = _residual_scale(J, psi, load, free)
        rel = float(np.linalg.norm(R[free])) / scale
        res_hist.append(rel)
        if rel <= 1e-3 * tol or (rel <= tol and step_ok):
            break
        Jf = sparse.SparseMatrix(J.csr[free][:, free])
        dx, _ = sparse.solve(Jf, -R[free])
        step = 1.0
        for _ in range(8):
            cand = psi.copy()
            cand[free] += step * dx
            rel_new = float(np.linalg.norm(_w_residual(problem, ctx, cand)[free])) / scale
            if rel_new < rel or rel_new <= tol:
                psi = cand
                break
            step *= 0.5
        else:
            step = 1.0
            psi[free] += dx  # accept the full step rather than stall
        step_ok = (step * float(np.max(np.abs(dx)))
                   <= np.sqrt(tol) * max(1.0, float(np.max(np.abs(psi)))))
    else:
        raise NonconvergenceError(
            f"Newton on the w-equation did not reach tol={tol:.1e} "
            f"(last relative residual {res_hist[-1]:.3e})",
            history=res_hist, eps=problem.eps)

    w = Field1D(mesh, dofmap, psi)
    u = recover_u(problem, w)
    state = RadialState(problem=problem, u=u, w=w,
                        residual_history=res_hist, picard_history=picard_hist)
    state.diagnostics = convexity_report(state, problem.eps)
    return state


class RecoveredProfile:
    """u recovered from w by u(r) = g(R) - int_r^R w(s)/s^(n-1) ds.

    The derivative is w(r)/r^(n-1) exactly, and the radial Laplacian is
    w'(r)/r^(n-1); only the value requires integration, done per element
    with Gauss panels cached from the right endpoint.
    """

    def __init__(self, problem: RadialProblem, w: Field1D):
        self.problem = problem
        self.w = w
        self.mesh = w.mesh
        n = problem.n
        gp, gw = np.polynomial.legendre.leggauss(10)
        self._gp = 0.5 * (gp + 1.0)
        self._gw = 0.5 * gw
        nodes = self.mesh.nodes
        h = np.diff(nodes)
        pts = nodes[:-1, None] + np.outer(h, self._gp)
        vals = w.value(pts.ravel()).reshape(pts.shape)
        integrand = vals / pts ** (n - 1)
        elem = (integrand @ self._gw) * h
        # suffix[i] = int_{nodes[i]}^{R}
        self._suffix = np.concatenate([np.cumsum(elem[::-1])[::-1], [0.0]])

    def value(self, r):
        n = self.problem.n
        arr = np.atleast_1d(np.asarray(r, dtype=float))
        nodes = self.mesh.nodes
        e = np.clip(np.searchsorted(nodes, arr, side="right") - 1, 0,
                    self.mesh.n_elements - 1)
        b = nodes[e + 1]
        span = b - arr
        pts = arr[:, None] + np.outer(span, self._gp)
        vals = self.w.value(pts.ravel()).reshape(pts.shape)
        part = ((vals / pts ** (n - 1)) @ self._gw) * span
        tail = part + self._suffix[e + 1]
        out = self.problem.gR - tail
        return out if np.ndim(r) else float(out[0])

    def deriv(self, r):
        n = self.problem.n
        arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = _div_pos(self.w.value(arr), arr ** (n - 1), arr)
        return out if np.ndim(r) else float(out[0])

    def second_deriv(self, r):
        n = self.problem.n
        arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = _div_pos(self.w.deriv(arr), arr ** (n - 1), arr) \
            - (n - 1) * _div_pos(self.w.value(arr), arr ** n, arr)
        return out if np.ndim(r) else float(out[0])

    def laplacian(self, r):
        n = self.problem.n
        arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = _div_pos(self.w.deriv(arr), arr ** (n - 1), arr)
        return out if np.ndim(r) else float(out[0])


def _residual_scale(J, coeffs, load, free):
    """Cancellation scale of the assembled residual.

    The residual is a sum of terms of size |J| |x| + |load|; relative
    residuals are measured against this magnitude so that the convergence
    test is meaningful for stiff fourth-order operators whose absolute
    residual floor sits far above machine epsilon.
    """
    mag = np.abs(J.csr) @ np.abs(coeffs) + np.abs(load)
    return max(float(np.linalg.norm(mag[free])), 1e-300)


def _div_pos(num, den, r):
    out = np.zeros_like(np.asarray(num, dtype=float))
    np.divide(num, den, out=out, where=(r > 0))
    return out


def recover_u(problem: RadialProblem, w: Field1D) -> RecoveredProfile:
    return RecoveredProfile(problem, w)


# ---------------------------------------------------------------------------
# direct fourth-order solver (Hermite cubics)
# ---------------------------------------------------------------------------

def _hermite_residual_jacobian(problem, ctx, coeffs, phi_R, want_matrix=True):
    n = problem.n
    eps = problem.eps
    pts = ctx.points[..., 0]
    w = ctx.weights * pts ** (n - 1)
    V, D, H = ctx.values, ctx.grads, ctx.hessians

    ur = ctx.interp(coeffs, "grad")
    urr = ctx.interp(coeffs, "hess")
    q = ur / pts
    lap = urr + (n - 1) * q
    lap_basis = H + (n - 1) * D / pts[..., None]

    fvals = np.asarray(problem.f(pts.ravel())).reshape(pts.shape) * np.ones_like(pts)
    Fval = fvals - urr * q ** (n - 1)

    res_loc = eps * np.einsum("eq,eqi->ei", w * lap, lap_basis)
    res_loc += np.einsum("eq,eqi->ei", w * Fval, V)
    res = np.zeros(ctx.dofmap.n_dofs)
    np.add.at(res, ctx.dofmap.element_dofs.ravel(), res_loc.ravel())
    res[-1] -= eps * phi_R * problem.R ** (n - 1)  # slope dof at r = R

    if not want_matrix:
        return res, None
    blocks = eps * np.einsum("eq,eqi,eqj->eij", w, lap_basis, lap_basis)
    blocks -= np.einsum("eq,eqi,eqj->eij", w * q ** (n - 1), V, H)
    if n > 2:
        coeff = urr * (n - 1) * q ** (n - 2) / pts
        blocks -= np.einsum("eq,eqi,eqj->eij", w * coeff, V, D)
    else:
        blocks -= np.einsum("eq,eqi,eqj->eij", w * urr / pts, V, D)
    return res, _scatter(ctx, blocks)


def _poisson_type_guess(problem, mesh, dofmap):
    """Interpolant of the isotropic ansatz Delta u0 = sign(eps) n f^(1/n)."""
    n = problem.n
    sgn = 1.0 if problem.eps > 0 else -1.0

    def integrand(t):
        t = np.asarray(t)
        ft = np.maximum(np.asarray(problem.f(t)) * np.ones_like(t), 0.0)
        return t ** (n - 1) * n * ft ** (1.0 / n)

    cum = _CumulativeGauss(integrand, problem.R, panels=256)

    def u0r(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        pos = r > 0
        np.divide(cum(r), r ** (n - 1), out=out, where=pos)
        return sgn * out

    tail = _CumulativeGauss(u0r, problem.R, panels=256)

    def u0(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return problem.gR - (tail.total - tail(r))

    from .fem import interpolate_1d
    return interpolate_1d(mesh, dofmap, u0, u0r).coeffs


def solve_radial_fourth_order(problem: RadialProblem, mesh: Mesh1D,
                              tol: float = 1e-10, max_newton: int = 40,
                              eps_start: Optional[float] = None,
                              second_trace: Optional[float] = None,
                              initial: Optional[np.ndarray] = None) -> RadialState:
    """Hermite-cubic discretization of the radial fourth-order weak form.

    Essential data are u(R) = g(R) and u_r(0) = 0; the second-order trace
    enters as the natural flux eps * phi * R^(n-1) * v_r(R), with phi = eps
    by default.  Newton runs along a halving eps-continuation path from
    eps_start (default sign(eps) * max(|eps|, 0.1)).
    """
    dofmap = build_dofmap_interval(mesh, hermite_interval())
    quad = make_quadrature("interval", 9)
    ctx = element_context(mesh, dofmap, quad)
    ndof = dofmap.n_dofs
    fixed = np.array([1, ndof - 2])  # slope at 0, value at R
    mask = np.ones(ndof, dtype=bool)
    mask[fixed] = False
    free = np.nonzero(mask)[0]

    target = problem.eps
    if eps_start is None:
        eps_start = np.sign(target) * max(abs(target), 0.1)
    if np.sign(eps_start) != np.sign(target) or abs(eps_start) < abs(target):
        raise ValueError("eps_start must reach eps_target from above, same sign")
    path = [eps_start]
    while abs(path[-1]) > 2.000001 * abs(target):
        path.append(path[-1] / 2.0)
    if abs(path[-1] - target) > 1e-15 * abs(target):
        path.append(target)

    coeffs = initial.copy() if initial is not None else None
    res_hist_all = []
    for stage_eps in path:
        stage = RadialProblem(problem.n, problem.R, problem.f, problem.gR, stage_eps)
        phi_R = second_trace if second_trace is not None else stage_eps
        if coeffs is None:
            coeffs = _poisson_type_guess(stage, mesh, dofmap)
        coeffs[1] = 0.0
        coeffs[ndof - 2] = problem.gR
        flux = np.zeros(ndof)
        flux[-1] = stage.eps * phi_R * problem.R ** (stage.n - 1)
        hist = []
        step_ok = False
        for it in range(max_newton):
            res, J = _hermite_residual_jacobian(stage, ctx, coeffs, phi_R)
            scale = _residual_scale(J, coeffs, flux, free)
            rel = float(np.linalg.norm(res[free])) / scale
            hist.append(rel)
            if rel <= 1e-3 * tol or (rel <= tol and step_ok):
                break
            Jf = sparse.SparseMatrix(J.csr[free][:, free])
            dx, _ = sparse.solve(Jf, -res[free])
            step = 1.0
            for _ in range(8):
                cand = coeffs.copy()
                cand[free] += step * dx
                r_new, _ = _hermite_residual_jacobian(stage, ctx, cand, phi_R,
                                                      want_matrix=False)
                rel_new = float(np.linalg.norm(r_new[free])) / scale
                if rel_new < rel or rel_new <= tol:
                    coeffs = cand
                    break
                step *= 0.5
            else:
                step = 1.0
                coeffs[free] += dx
            step_ok = (step * float(np.max(np.abs(dx)))
                       <= np.sqrt(tol) * max(1.0, float(np.max(np.abs(coeffs)))))
        else:
            raise NonconvergenceError(
                f"Newton failed at continuation eps={stage_eps:.3e} "
                f"(relative residual {hist[-1]:.3e})",
                history=hist, eps=stage_eps)
        res_hist_all.extend(hist)
        logger.debug("radial stage eps=%.3e done in %d iterations", stage_eps, len(hist))

    u = Field1D(mesh, dofmap, coeffs)
    state = RadialState(problem=problem, u=u, w=None,
                        residual_history=res_hist_all)
    state.diagnostics = convexity_report(state, problem.eps)
    return state


# ---------------------------------------------------------------------------
# diagnostics and weighted norms
# ---------------------------------------------------------------------------

def _lap_of(u, r, n):
    if hasattr(u, "laplacian"):
        return np.asarray(u.laplacian(r))
    return np.asarray(u.second_deriv(r)) + (n - 1) * np.asarray(u.deriv(r)) / r


def _quad_points(mesh: Mesh1D, m: int = 6):
    gp, gw = np.polynomial.legendre.leggauss(m)
    gp = 0.5 * (gp + 1.0)
    gw = 0.5 * gw
    h = np.diff(mesh.nodes)
    pts = mesh.nodes[:-1, None] + np.outer(h, gp)
    wts = np.outer(h, gw)
    return pts.ravel(), wts.ravel()


def convexity_report(state: RadialState, eps: float) -> ConvexityReport:
    """Minimum radial Laplacian and the width of the nonconvex boundary band."""
    r, _ = _quad_points(state.u.mesh)
    n = state.problem.n
    lap = _lap_of(state.u, r, n)
    urr = np.asarray(state.u.second_deriv(r))
    neg = r[urr < 0]
    if len(neg):
        start = float(np.min(neg))
        band = float(state.problem.R - start)
    else:
        start = None
        band = 0.0
    return ConvexityReport(min_laplacian=float(np.min(lap)),
                           nonconvex_band=band, band_start=start)


def radial_error(u_num, exact, mesh: Mesh1D, n: int, which: str,
                 quad_order: int = 6) -> float:
    """Error norms in the weighted measure r^(n-1) dr (Linf at quad points)."""
    r, w = _quad_points(mesh, quad_order)
    weight = w * r ** (n - 1)
    if which == "L2":
        d = np.asarray(u_num.value(r)) - np.asarray(exact.value(r))
        return float(np.sqrt(np.sum(weight * d ** 2)))
    if which == "H1":
        d = np.asarray(u_num.deriv(r)) - np.asarray(exact.deriv(r))
        return float(np.sqrt(np.sum(weight * d ** 2)))
    if which == "H2":
        d = _lap_of(u_num, r, n) - _lap_of(exact, r, n)
        return float(np.sqrt(np.sum(weight * d ** 2)))
    if which == "Linf":
        d = np.asarray(u_num.value(r)) - np.asarray(exact.value(r))
        return float(np.max(np.abs(d)))
    raise ValueError(f"unknown norm {which!r}")
