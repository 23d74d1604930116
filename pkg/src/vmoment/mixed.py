"""Hermann-Miyoshi mixed method for the regularized fully nonlinear problems.

Unknowns are the symmetric tensor sigma (three Lagrange component fields)
and the scalar u on the same degree-k Lagrange space.  The tau-shifted
variant replaces sigma by sigma + tau*I*u, restoring coercivity for the
degenerate infinity-Laplacian; tau = 0 recovers the plain method.

Residual convention (per free test function):

    W block :  (sigma, kappa) + bt(kappa, u) - G(kappa)
    Q block :  eps * bt(sigma, v) - ct(sigma, u, v)

with bt(mu, v) = (div mu, grad v) - tau (tr mu, v) and ct containing the
nonlinearity at kappa = sigma - tau*I*u plus the tau correction terms.
Scaling the Q block by eps (instead of dividing the nonlinear term by eps)
keeps the floating-point balance between the two equations.

Essential data: u = g on the boundary and the normal-normal component
sigma nu.nu = phi + tau*g at boundary nodes; at corners both component
constraints are imposed.
"""
from __future__ import annotations

import io
import logging
import weakref
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import sparse
from .fem import (DofMap, ElementContext, Field2D, build_dofmap_triangle,
                  boundary_dofs, element_context, lagrange_triangle,
                  make_quadrature)
from .mesh import Mesh2D
from .nonlinearity import InfinityLaplacian, ProblemSpec

logger = logging.getLogger(__name__)

__all__ = [
    "MixedSpace", "MixedState", "NewtonReport", "NewtonError",
    "build_space", "assemble_residual_jacobian", "newton_solve",
    "continuation_solve", "initial_guess", "infsup_probe",
    "save_state", "load_state", "state_errors",
]

CHECKPOINT_MAGIC = b"VMM1"


class NewtonError(RuntimeError):
    """Nonconvergence of the mixed Newton solve; carries the report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class NewtonReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    eps_path: list = field(default_factory=list)


@dataclass(eq=False)
class MixedSpace:
    """Dof layout [sigma11 | sigma12 | sigma22 | u] over one scalar space."""

    mesh: Mesh2D
    k: int
    tau: float
    dofmap: DofMap
    ctx: ElementContext
    u_bdofs: np.ndarray
    snn_constraints: list          # (component 0 or 2, dof, outward normal)
    edge_quad: list                # per-edge tabulated boundary data

    @property
    def n_scalar(self) -> int:
        return self.dofmap.n_dofs

    @property
    def n_total(self) -> int:
        return 4 * self.dofmap.n_dofs

    def offsets(self):
        n = self.n_scalar
        return {"s11": 0, "s12": n, "s22": 2 * n, "u": 3 * n}

    def fixed_indices(self):
        offs = self.offsets()
        idx = [offs["u"] + self.u_bdofs]
        comp_off = {0: offs["s11"], 2: offs["s22"]}
        idx.append(np.array([comp_off[c] + d for c, d, _ in self.snn_constraints],
                            dtype=int))
        return np.unique(np.concatenate(idx))

    def free_mask(self):
        mask = np.ones(self.n_total, dtype=bool)
        mask[self.fixed_indices()] = False
        return mask


def build_space(mesh: Mesh2D, k: int, tau: float = 0.0,
                quad_exactness: Optional[int] = None) -> MixedSpace:
    if k not in (1, 2, 3):
        raise ValueError(f"degree must be 1..3, got {k}")
    dofmap = build_dofmap_triangle(mesh, lagrange_triangle(k))
    quad = make_quadrature("triangle", quad_exactness or min(2 * k + 3, 12))
    ctx = element_context(mesh, dofmap, quad)
    u_bdofs = boundary_dofs(mesh, dofmap)

    x0, x1 = mesh.x_range
    y0, y1 = mesh.y_range
    scale = max(x1 - x0, y1 - y0)
    tol = 1e-12 * scale
    coords = dofmap.coords
    snn = []
    for d in u_bdofs:
        x, y = coords[d]
        if abs(x - x0) < tol:
            snn.append((0, int(d), np.array([-1.0, 0.0])))
        if abs(x - x1) < tol:
            snn.append((0, int(d), np.array([1.0, 0.0])))
        if abs(y - y0) < tol:
            snn.append((2, int(d), np.array([0.0, -1.0])))
        if abs(y - y1) < tol:
            snn.append((2, int(d), np.array([0.0, 1.0])))

    # tabulate edge quadrature against the owning element's basis
    gp, gw = np.polynomial.legendre.leggauss(k + 3)
    gp = 0.5 * (gp + 1.0)
    gw = 0.5 * gw
    basis = dofmap.basis
    edge_quad = []
    for edge in mesh.boundary_edges:
        p0 = mesh.vertices[edge.vertices[0]]
        p1 = mesh.vertices[edge.vertices[1]]
        pts = p0 + np.outer(gp, p1 - p0)
        w = gw * float(np.linalg.norm(p1 - p0))
        tri = edge.triangle
        # reference coordinates inside the owning triangle
        v = mesh.vertices[mesh.triangles[tri]]
        J = np.column_stack([v[1] - v[0], v[2] - v[0]])
        ref = np.linalg.solve(J, (pts - v[0]).T).T
        vals, _, _ = basis.eval(ref)
        edge_quad.append({
            "points": pts, "weights": w, "normal": edge.normal,
            "tangent": edge.tangent, "dofs": dofmap.element_dofs[tri],
            "values": vals,
        })
    return MixedSpace(mesh=mesh, k=k, tau=tau, dofmap=dofmap, ctx=ctx,
                      u_bdofs=u_bdofs, snn_constraints=snn, edge_quad=edge_quad)


@dataclass
class MixedState:
    """Full coefficient vector over [s11|s12|s22|u] plus run parameters."""

    space: MixedSpace
    eps: float
    X: np.ndarray

    def copy(self) -> "MixedState":
        return MixedState(self.space, self.eps, self.X.copy())

    def part(self, name: str) -> np.ndarray:
        n = self.space.n_scalar
        o = self.space.offsets()[name]
        return self.X[o:o + n]

    def u_field(self) -> Field2D:
        return Field2D(self.space.mesh, self.space.dofmap, self.part("u"))

    def sigma_field(self, comp: str) -> Field2D:
        return Field2D(self.space.mesh, self.space.dofmap, self.part(comp))

    def sigma_nn(self, points, normal) -> np.ndarray:
        """sigma nu.nu of the tensor unknown at given points."""
        n1, n2 = normal
        s11 = self.sigma_field("s11").value(points)
        s12 = self.sigma_field("s12").value(points)
        s22 = self.sigma_field("s22").value(points)
        return s11 * n1 * n1 + 2 * s12 * n1 * n2 + s22 * n2 * n2


def apply_boundary_data(spec: ProblemSpec, space: MixedSpace, X: np.ndarray,
                        eps: float) -> None:
    """Write the essential data (u = g, sigma nn = phi + tau g) into X."""
    offs = space.offsets()
    coords = space.dofmap.coords
    if len(space.u_bdofs):
        X[offs["u"] + space.u_bdofs] = np.asarray(
            spec.g(coords[space.u_bdofs]), dtype=float)
    comp_off = {0: offs["s11"], 2: offs["s22"]}
    for c, d, nu in space.snn_constraints:
        x = coords[d]
        phi = float(spec.second_trace(x, nu)) if spec.second_trace is not None else eps
        gval = float(np.ravel(np.asarray(spec.g(x[None, :])))[0])
        X[comp_off[c] + d] = phi + space.tau * gval


def _grad_g_tangential(spec: ProblemSpec, pts, tangent, h):
    """dg/dtau on an edge, analytic when grad_g exists, else 4th-order FD."""
    if spec.grad_g is not None:
        return np.asarray(spec.grad_g(pts)) @ tangent
    d = 1e-4 * h
    t = tangent
    g = spec.g
    return (-np.asarray(g(pts + 2 * d * t)) + 8 * np.asarray(g(pts + d * t))
            - 8 * np.asarray(g(pts - d * t)) + np.asarray(g(pts - 2 * d * t))) / (12 * d)


def _g_vector(spec: ProblemSpec, space: MixedSpace) -> np.ndarray:
    """Boundary functional G(kappa) = <kappa nu . tau, dg/dtau>."""
    n = space.n_scalar
    G = np.zeros(4 * n)
    offs = space.offsets()
    h = space.mesh.h_max
    for eq in space.edge_quad:
        nu, tg = eq["normal"], eq["tangent"]
        dgdt = _grad_g_tangential(spec, eq["points"], tg, h)
        wdg = eq["weights"] * dgdt
        contrib = eq["values"].T @ wdg      # per local dof
        f11 = nu[0] * tg[0]
        f12 = nu[0] * tg[1] + nu[1] * tg[0]
        f22 = nu[1] * tg[1]
        if f11 != 0.0:
            np.add.at(G, offs["s11"] + eq["dofs"], f11 * contrib)
        if f12 != 0.0:
            np.add.at(G, offs["s12"] + eq["dofs"], f12 * contrib)
        if f22 != 0.0:
            np.add.at(G, offs["s22"] + eq["dofs"], f22 * contrib)
    return G


class _Workspace:
    """Precomputed index arrays for scattering the 10 Jacobian blocks."""

    def __init__(self, space: MixedSpace):
        dofs = space.dofmap.element_dofs
        nloc = dofs.shape[1]
        rows = np.repeat(dofs, nloc, axis=1).ravel()
        cols = np.tile(dofs, (1, nloc)).ravel()
        self.rows = rows
        self.cols = cols
        self.nloc = nloc
        self.space = space

    def scatter(self, blocks):
        """blocks: list of (row_field, col_field, (n_el,nt,ns) array)."""
        offs = self.space.offsets()
        n = self.space.n_total
        all_rows = []
        all_cols = []
        all_vals = []
        for rf, cf, B in blocks:
            all_rows.append(self.rows + offs[rf])
            all_cols.append(self.cols + offs[cf])
            all_vals.append(B.ravel())
        return sparse.from_triplets(
            n, n, None, _arrays=(np.concatenate(all_rows),
                                 np.concatenate(all_cols),
                                 np.concatenate(all_vals)))


_WS_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _workspace(space: MixedSpace) -> _Workspace:
    ws = _WS_CACHE.get(space)
    if ws is None:
        ws = _Workspace(space)
        _WS_CACHE[space] = ws
    return ws


def assemble_residual_jacobian(spec: ProblemSpec, space: MixedSpace,
                               state: MixedState, want_matrix: bool = True):
    """Assemble the nonlinear residual and (optionally) its Jacobian.

    Returns (residual vector, SparseMatrix or None, cancellation magnitude).
    """
    eps = state.eps
    tau = space.tau
    ctx = space.ctx
    n = space.n_scalar
    if len(state.X) != 4 * n:
        raise RuntimeError(
            f"state length {len(state.X)} does not match space {4 * n}")
    offs = space.offsets()
    w = ctx.weights
    V = ctx.values
    Gx = ctx.grads[..., 0]
    Gy = ctx.grads[..., 1]

    s11 = ctx.interp(state.part("s11"), "value")
    s12 = ctx.interp(state.part("s12"), "value")
    s22 = ctx.interp(state.part("s22"), "value")
    uval = ctx.interp(state.part("u"), "value")
    ugrad = ctx.interp(state.part("u"), "grad")
    p1, p2 = ugrad[..., 0], ugrad[..., 1]

    ed = space.dofmap.element_dofs
    loc11 = state.part("s11")[ed]
    loc12 = state.part("s12")[ed]
    loc22 = state.part("s22")[ed]
    divx = np.einsum("ei,eqi->eq", loc11, ctx.grads[..., 0]) \
        + np.einsum("ei,eqi->eq", loc12, ctx.grads[..., 1])
    divy = np.einsum("ei,eqi->eq", loc12, ctx.grads[..., 0]) \
        + np.einsum("ei,eqi->eq", loc22, ctx.grads[..., 1])

    k11 = s11 - tau * uval
    k12 = s12
    k22 = s22 - tau * uval
    op = spec.operator
    Fcore = op.core(k11, k12, k22, p1, p2, uval)
    pts = ctx.points.reshape(-1, 2)
    Fval = Fcore + spec.f_at(pts).reshape(Fcore.shape)

    # residual, W rows then Q row
    r11 = np.einsum("eq,eqi->ei", w * s11, V) \
        + np.einsum("eq,eqi->ei", w * p1, Gx) \
        - tau * np.einsum("eq,eqi->ei", w * uval, V)
    r12 = 2.0 * np.einsum("eq,eqi->ei", w * s12, V) \
        + np.einsum("eq,eqi->ei", w * p1, Gy) \
        + np.einsum("eq,eqi->ei", w * p2, Gx)
    r22 = np.einsum("eq,eqi->ei", w * s22, V) \
        + np.einsum("eq,eqi->ei", w * p2, Gy) \
        - tau * np.einsum("eq,eqi->ei", w * uval, V)
    tr_s = s11 + s22
    ru = eps * (np.einsum("eq,eqi->ei", w * divx, Gx)
                + np.einsum("eq,eqi->ei", w * divy, Gy)
                - tau * np.einsum("eq,eqi->ei", w * tr_s, V))
    ru -= 2 * eps * tau * (np.einsum("eq,eqi->ei", w * p1, Gx)
                           + np.einsum("eq,eqi->ei", w * p2, Gy))
    ru += 2 * eps * tau ** 2 * np.einsum("eq,eqi->ei", w * uval, V)
    ru -= np.einsum("eq,eqi->ei", w * Fval, V)

    res = np.zeros(4 * n)
    for name, loc in (("s11", r11), ("s12", r12), ("s22", r22), ("u", ru)):
        np.add.at(res, offs[name] + ed.ravel(), loc.ravel())
    Gvec = _g_vector(spec, space)
    res -= Gvec

    if not want_matrix:
        return res, None, None

    fr11, fr12, fr22, fp1, fp2, fz = op.blocks(k11, k12, k22, p1, p2, uval)
    fr11 = fr11 * np.ones_like(k11)
    fr12 = fr12 * np.ones_like(k11)
    fr22 = fr22 * np.ones_like(k11)
    fp1 = fp1 * np.ones_like(k11)
    fp2 = fp2 * np.ones_like(k11)
    fz = fz * np.ones_like(k11)

    def mass(weight):
        return np.einsum("eq,eqi,eqj->eij", w * weight, V, V)

    M = np.einsum("eq,eqi,eqj->eij", w, V, V)
    Bx = np.einsum("eq,eqi,eqj->eij", w, Gx, Gx)
    By = np.einsum("eq,eqi,eqj->eij", w, Gy, Gy)
    Bxy = np.einsum("eq,eqi,eqj->eij", w, Gx, Gy)  # test d/dx, trial d/dy
    Byx = np.swapaxes(Bxy, 1, 2)

    blocks = []
    # W rows: mass blocks (the off-diagonal tensor component counts twice)
    blocks.append(("s11", "s11", M))
    blocks.append(("s12", "s12", 2.0 * M))
    blocks.append(("s22", "s22", M))
    # W rows vs u: bt(kappa_c, u)
    blocks.append(("s11", "u", Bx - tau * M))
    blocks.append(("s12", "u", Byx + Bxy))
    blocks.append(("s22", "u", By - tau * M))
    # Q row vs sigma: eps*bt(mu, v) - (F_r : mu, v)
    blocks.append(("u", "s11", eps * (Bx - tau * M) - mass(fr11)))
    blocks.append(("u", "s12", eps * (Bxy + Byx) - 2.0 * mass(fr12)))
    blocks.append(("u", "s22", eps * (By - tau * M) - mass(fr22)))
    # Q row vs u
    quu = -2 * eps * tau * (Bx + By) + 2 * eps * tau ** 2 * M
    quu += tau * mass(fr11 + fr22)
    quu -= np.einsum("eq,eqi,eqj->eij", w * fp1, V, Gx)
    quu -= np.einsum("eq,eqi,eqj->eij", w * fp2, V, Gy)
    quu -= mass(fz)
    blocks.append(("u", "u", quu))

    ws = _workspace(space)
    J = ws.scatter(blocks)
    mag = np.abs(J.csr) @ np.abs(state.X) + np.abs(Gvec)
    return res, J, mag


def newton_solve(spec: ProblemSpec, space: MixedSpace, state0: MixedState,
                 tol: float = 1e-10, max_iter: int = 30,
                 damping: bool = True) -> tuple[MixedState, NewtonReport]:
    """Damped Newton on the mixed system, essential data held exactly.

    The relative residual is measured against the assembly cancellation
    magnitude ||J||X| + |G|||; convergence additionally requires the last
    undamped update to fall below sqrt(tol), which certifies coefficient
    stationarity alongside the small residual.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    state = state0.copy()
    apply_boundary_data(spec, space, state.X, state.eps)
    free = space.free_mask()
    report = NewtonReport(eps_path=[state.eps])
    step_ok = False
    scale = 1.0
    for it in range(max_iter):
        res, J, mag = assemble_residual_jacobian(spec, space, state)
        scale = max(float(np.linalg.norm(mag[free])), 1e-300)
        rel = float(np.linalg.norm(res[free])) / scale
        report.residual_history.append(rel)
        report.iterations = it
        if rel <= 1e-3 * tol or (rel <= tol and step_ok):
            report.converged = True
            return state, report
        Jf = sparse.SparseMatrix(J.csr[free][:, free])
        dx, _ = sparse.solve(Jf, -res[free])  # SingularMatrixError propagates
        step = 1.0
        taken = False
        if damping:
            for _ in range(8):
                cand = state.copy()
                cand.X[free] += step * dx
                r_new, _, _ = assemble_residual_jacobian(spec, space, cand,
                                                         want_matrix=False)
                rel_new = float(np.linalg.norm(r_new[free])) / scale
                if rel_new < rel or rel_new <= tol:
                    state = cand
                    taken = True
                    break
                step *= 0.5
        if not taken:
            step = 1.0
            state.X[free] += dx
        step_ok = (step * float(np.max(np.abs(dx)))
                   <= np.sqrt(tol) * max(1.0, float(np.max(np.abs(state.X)))))
    res, _, _ = assemble_residual_jacobian(spec, space, state, want_matrix=False)
    rel = float(np.linalg.norm(res[free])) / scale
    report.residual_history.append(rel)
    raise NewtonError(
        f"Newton did not converge in {max_iter} iterations "
        f"(relative residual {rel:.3e})", report=report)


def initial_guess(spec: ProblemSpec, space: MixedSpace, eps: float) -> MixedState:
    """Deterministic start: an isotropy-based Poisson solve for u, then the
    tensor recovered from the first mixed equation with u frozen."""
    dm = space.dofmap
    ctx = space.ctx
    n = dm.n_dofs
    w = ctx.weights
    stiff_blocks = np.einsum("eq,eqid,eqjd->eij", w, ctx.grads, ctx.grads)
    dofs = dm.element_dofs
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    A = sparse.from_triplets(n, n, None, _arrays=(rows, cols, stiff_blocks.ravel()))

    pts = ctx.points.reshape(-1, 2)
    if isinstance(spec.operator, InfinityLaplacian):
        rhs_vals = np.zeros(len(pts))
    else:
        sgn = 1.0 if eps > 0 else -1.0
        rhs_vals = sgn * 2.0 * np.sqrt(np.maximum(spec.f_at(pts), 0.0))
    # (grad u0, grad v) = -(rhs, v)
    load = np.zeros(n)
    lv = -np.einsum("eq,eqi->ei", w * rhs_vals.reshape(w.shape), ctx.values)
    np.add.at(load, dofs.ravel(), lv.ravel())

    u0 = np.zeros(n)
    u0[space.u_bdofs] = np.asarray(spec.g(dm.coords[space.u_bdofs]), dtype=float)
    interior = np.setdiff1d(np.arange(n), space.u_bdofs)
    rhs = load - A.csr @ u0
    Ai = sparse.SparseMatrix(A.csr[interior][:, interior])
    x, _ = sparse.solve(Ai, rhs[interior])
    u0[interior] = x

    state = MixedState(space, eps, np.zeros(4 * n))
    state.part("u")[:] = u0
    apply_boundary_data(spec, space, state.X, eps)
    _recover_sigma(spec, space, state)
    return state


def _recover_sigma(spec: ProblemSpec, space: MixedSpace, state: MixedState):
    """Solve the first mixed equation for sigma with u fixed."""
    res, J, _ = assemble_residual_jacobian(spec, space, state)
    free = space.free_mask()
    n = space.n_scalar
    sel = np.zeros(4 * n, dtype=bool)
    sel[:3 * n] = True
    sel &= free
    idx = np.nonzero(sel)[0]
    M = sparse.SparseMatrix(J.csr[idx][:, idx])
    dx, _ = sparse.solve(M, -res[idx])
    state.X[idx] += dx


def continuation_solve(spec_builder: Callable[[float], ProblemSpec],
                       space: MixedSpace, eps_target: float,
                       eps_start: Optional[float] = None, ratio: float = 0.5,
                       tol: float = 1e-10, max_iter: int = 30,
                       state: Optional[MixedState] = None,
                       min_stages: int = 1) -> tuple[MixedState, NewtonReport]:
    """Homotopy in eps: solve a geometric eps sequence with warm starts.

    `spec_builder(eps)` supplies the problem data at each stage (second
    trace and manufactured sources may depend on eps).  A supplied state
    warm-starts the first stage.
    """
    if eps_target == 0:
        raise ValueError("eps_target must be nonzero")
    if eps_start is None:
        eps_start = eps_target
    if np.sign(eps_start) != np.sign(eps_target) or abs(eps_start) < abs(eps_target):
        raise ValueError("eps_start must reach eps_target from above, same sign")
    if not (0 < ratio <= 1):
        raise ValueError(f"schedule ratio must be in (0, 1], got {ratio}")
    path = [eps_start]
    if ratio < 1:
        while abs(path[-1]) > abs(eps_target) / ratio * (1 + 1e-12):
            path.append(path[-1] * ratio)
    if abs(path[-1] - eps_target) > 1e-15 * abs(eps_target):
        path.append(eps_target)
    while len(path) < min_stages:
        path.append(eps_target)

    full_report = NewtonReport(eps_path=[])
    for stage_eps in path:
        spec = spec_builder(stage_eps)
        if state is None:
            state = initial_guess(spec, space, stage_eps)
        else:
            state = MixedState(space, stage_eps, state.X.copy())
        try:
            state, rep = newton_solve(spec, space, state, tol=tol,
                                      max_iter=max_iter)
        except NewtonError as exc:
            raise NewtonError(
                f"continuation failed at eps={stage_eps:.4e}: {exc}",
                report=exc.report) from exc
        full_report.eps_path.append(stage_eps)
        full_report.residual_history.extend(rep.residual_history)
        full_report.iterations += rep.iterations
        logger.debug("continuation stage eps=%.3e: %d iterations",
                     stage_eps, rep.iterations)
    full_report.converged = True
    return state, full_report


# ---------------------------------------------------------------------------
# inf-sup probe
# ---------------------------------------------------------------------------

def infsup_probe(space: MixedSpace, trials: int = 8, seed: int = 0) -> dict:
    """Discrete inf-sup constant of bt on (W_0, Q_0).

    The exact constant comes from the generalized eigenproblem
    B^T A^{-1} B w = lam M w (A the H1 Gram on the free tensor space,
    M the H1 Gram on the free scalar space); random trial functions and
    the identity-tensor candidate of the shifted form's proof give the
    cross-checking ratios.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    import scipy.linalg as la

    ctx = space.ctx
    dm = space.dofmap
    n = dm.n_dofs
    w = ctx.weights
    V, G = ctx.values, ctx.grads
    dofs = dm.element_dofs
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()

    def asm(blocks):
        return sparse.from_triplets(n, n, None,
                                    _arrays=(rows, cols, blocks.ravel())).todense()

    M0 = asm(np.einsum("eq,eqi,eqj->eij", w, V, V))
    K = asm(np.einsum("eq,eqid,eqjd->eij", w, G, G))
    H1 = M0 + K
    Gx = G[..., 0]
    Gy = G[..., 1]
    # bt(mu, v) per component: rows = scalar v, cols = mu component (all
    # three blocks happen to be symmetric for this form)
    B11 = asm(np.einsum("eq,eqi,eqj->eij", w, Gx, Gx)
              - space.tau * np.einsum("eq,eqi,eqj->eij", w, V, V))
    B12 = asm(np.einsum("eq,eqi,eqj->eij", w, Gx, Gy)
              + np.einsum("eq,eqi,eqj->eij", w, Gy, Gx))
    B22 = asm(np.einsum("eq,eqi,eqj->eij", w, Gy, Gy)
              - space.tau * np.einsum("eq,eqi,eqj->eij", w, V, V))

    free_scalar = np.setdiff1d(np.arange(n), space.u_bdofs)
    fixed_by_comp = {0: set(), 1: set(), 2: set()}
    for c, d, _ in space.snn_constraints:
        fixed_by_comp[0 if c == 0 else 2].add(d)
    free_comp = [np.setdiff1d(np.arange(n), np.array(sorted(fixed_by_comp[c]), dtype=int))
                 for c in (0, 1, 2)]

    # tensor H1 Gram: diag(H1, 2*H1, H1) restricted to free dofs
    A_blocks = [H1[np.ix_(fc, fc)] * (2.0 if i == 1 else 1.0)
                for i, fc in enumerate(free_comp)]
    B_rows = []
    for i, (Bc, fc) in enumerate(zip((B11, B12, B22), free_comp)):
        B_rows.append(Bc[np.ix_(free_scalar, fc)])
    Bmat = np.hstack(B_rows)
    A = la.block_diag(*A_blocks)
    Mq = H1[np.ix_(free_scalar, free_scalar)]

    Ainv_BT = la.solve(A, Bmat.T, assume_a="pos")
    S = Bmat @ Ainv_BT
    lam = la.eigh(S, Mq, eigvals_only=True)
    beta = float(np.sqrt(max(lam[0], 0.0)))

    rng = np.random.default_rng(seed)
    ratios = []
    cand_ratios = []
    for _ in range(trials):
        wh = rng.standard_normal(len(free_scalar))
        wh /= np.sqrt(wh @ Mq @ wh)
        sup = float(np.sqrt(wh @ S @ wh))
        ratios.append(sup)
        # candidate mu = I * w_h (components w, 0, w)
        gradnorm = float(wh @ K[np.ix_(free_scalar, free_scalar)] @ wh)
        l2 = float(wh @ M0[np.ix_(free_scalar, free_scalar)] @ wh)
        bval = gradnorm - 2.0 * space.tau * l2
        denom = np.sqrt(2.0 * (gradnorm + l2))
        cand_ratios.append(bval / denom)
    return {"beta": beta, "min_random_ratio": float(np.min(ratios)),
            "min_candidate_ratio": float(np.min(cand_ratios))}


# ---------------------------------------------------------------------------
# checkpoints and error helpers
# ---------------------------------------------------------------------------

def save_state(path, state: MixedState) -> None:
    """Versioned checkpoint: magic header then an npz payload."""
    mesh = state.space.mesh
    buf = io.BytesIO()
    np.savez(buf,
             x_range=np.array(mesh.x_range), y_range=np.array(mesh.y_range),
             nx=mesh.nx, ny=mesh.ny, k=state.space.k, tau=state.space.tau,
             eps=state.eps, X=state.X)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(buf.getvalue())


def load_state(path) -> MixedState:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a {CHECKPOINT_MAGIC!r} checkpoint: {magic!r}")
        data = np.load(io.BytesIO(fh.read()))
    from .mesh import build_rect_mesh
    mesh = build_rect_mesh(tuple(data["x_range"]), tuple(data["y_range"]),
                           int(data["nx"]), int(data["ny"]))
    space = build_space(mesh, int(data["k"]), float(data["tau"]))
    return MixedState(space, float(data["eps"]), data["X"].copy())


def state_errors(state: MixedState, exact, norms=("L2", "H1", "H2", "Linf")) -> dict:
    """Errors of u against `exact`; H2 is the tensor L2 error against the
    shifted Hessian D2u + tau*I*u."""
    ctx = state.space.ctx
    w = ctx.weights.ravel()
    pts = ctx.points.reshape(-1, 2)
    tau = state.space.tau
    out = {}
    uh = ctx.interp(state.part("u"), "value").ravel()
    ue = np.asarray(exact.value(pts))
    if "L2" in norms:
        out["L2"] = float(np.sqrt(np.sum(w * (uh - ue) ** 2)))
    if "Linf" in norms:
        out["Linf"] = float(np.max(np.abs(uh - ue)))
    if "H1" in norms:
        gh = ctx.interp(state.part("u"), "grad").reshape(-1, 2)
        ge = np.asarray(exact.gradient(pts))
        d = gh - ge
        out["H1"] = float(np.sqrt(np.sum(w * np.sum(d ** 2, axis=1))))
    if "H2" in norms:
        he = np.asarray(exact.hessian(pts))
        s11 = ctx.interp(state.part("s11"), "value").ravel()
        s12 = ctx.interp(state.part("s12"), "value").ravel()
        s22 = ctx.interp(state.part("s22"), "value").ravel()
        shift = tau * ue
        d11 = s11 - (he[:, 0, 0] + shift)
        d12 = s12 - he[:, 0, 1]
        d22 = s22 - (he[:, 1, 1] + shift)
        out["H2"] = float(np.sqrt(np.sum(w * (d11 ** 2 + 2 * d12 ** 2 + d22 ** 2))))
    return out
