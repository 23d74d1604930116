"""Reference bases, quadrature, dof maps, assembly loops and error norms.

Lagrange elements of degree 1..3 on intervals and triangles, plus the C^1
Hermite cubic on intervals.  Assembly is batched: kernels receive tabulated
basis data for all elements at once and return stacked local blocks, which
keeps the element loop in numpy.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .mesh import Mesh1D, Mesh2D

__all__ = [
    "Basis",
    "lagrange_interval",
    "lagrange_triangle",
    "hermite_interval",
    "Quadrature",
    "make_quadrature",
    "DofMap",
    "build_dofmap_interval",
    "build_dofmap_triangle",
    "Field1D",
    "Field2D",
    "assemble",
    "assemble_vector",
    "ElementContext",
    "error_norm",
]

MAX_EXACTNESS = 12


# ---------------------------------------------------------------------------
# reference bases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Basis:
    """Reference-element basis.

    kind is one of 'lagrange_interval', 'lagrange_triangle',
    'hermite_interval'.  `nodes` holds the reference dof locations (for
    Hermite, one location per dof with `dof_kinds` telling value from slope).
    """

    kind: str
    degree: int
    dof_count: int
    nodes: np.ndarray
    dof_kinds: np.ndarray  # 0 = point value, 1 = derivative value

    def eval(self, points):
        """Tabulate (values, gradients, hessians) at reference points.

        For interval bases the returned arrays have shapes (npts, ndof),
        (npts, ndof) and (npts, ndof); for triangles (npts, ndof),
        (npts, ndof, 2) and (npts, ndof, 2, 2).
        """
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        if self.kind == "lagrange_interval":
            _check_interval(pts)
            return _eval_lagrange_interval(self.degree, pts)
        if self.kind == "hermite_interval":
            _check_interval(pts)
            return _eval_hermite(pts)
        if self.kind == "lagrange_triangle":
            _check_triangle(pts)
            return _eval_lagrange_triangle(self.degree, pts)
        raise ValueError(f"unknown basis kind {self.kind!r}")


def _check_interval(pts):
    if np.any(pts < -1e-12) or np.any(pts > 1 + 1e-12):
        raise ValueError("reference point outside [0,1]")


def _check_triangle(pts):
    p = np.atleast_2d(pts)
    if (np.any(p < -1e-12)) or np.any(p.sum(axis=1) > 1 + 1e-12):
        raise ValueError("reference point outside the unit triangle")


def lagrange_interval(k: int) -> Basis:
    if k not in (1, 2, 3):
        raise ValueError(f"interval Lagrange degree must be 1..3, got {k}")
    nodes = np.linspace(0.0, 1.0, k + 1)
    return Basis("lagrange_interval", k, k + 1, nodes, np.zeros(k + 1, dtype=int))


def hermite_interval() -> Basis:
    nodes = np.array([0.0, 0.0, 1.0, 1.0])
    kinds = np.array([0, 1, 0, 1])
    return Basis("hermite_interval", 3, 4, nodes, kinds)


def _triangle_nodes(k: int) -> np.ndarray:
    if k == 1:
        return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    if k == 2:
        return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
                         [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
    if k == 3:
        third = 1.0 / 3.0
        return np.array([
            [0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
            [third, 0.0], [2 * third, 0.0],
            [2 * third, third], [third, 2 * third],
            [0.0, 2 * third], [0.0, third],
            [third, third],
        ])
    raise ValueError(f"triangle Lagrange degree must be 1..3, got {k}")


def lagrange_triangle(k: int) -> Basis:
    nodes = _triangle_nodes(k)
    return Basis("lagrange_triangle", k, len(nodes), nodes,
                 np.zeros(len(nodes), dtype=int))


def _monomials_interval(k, pts):
    # columns t^0 .. t^k and their first/second derivatives
    npow = k + 1
    V = np.vander(pts, npow, increasing=True)
    D = np.zeros_like(V)
    H = np.zeros_like(V)
    for j in range(1, npow):
        D[:, j] = j * pts ** (j - 1)
    for j in range(2, npow):
        H[:, j] = j * (j - 1) * pts ** (j - 2)
    return V, D, H


def _eval_lagrange_interval(k, pts):
    nodes = np.linspace(0.0, 1.0, k + 1)
    Vn = np.vander(nodes, k + 1, increasing=True)
    C = np.linalg.inv(Vn)  # coefficients of the nodal basis
    V, D, H = _monomials_interval(k, pts)
    return V @ C, D @ C, H @ C


_HERMITE_C = None


def _eval_hermite(pts):
    # dofs: value(0), slope(0), value(1), slope(1)
    global _HERMITE_C
    if _HERMITE_C is None:
        A = np.zeros((4, 4))
        for j in range(4):
            A[0, j] = 0.0 ** j if j > 0 else 1.0
            A[1, j] = j * (0.0 ** (j - 1)) if j >= 1 else 0.0
            A[2, j] = 1.0
            A[3, j] = j
        _HERMITE_C = np.linalg.inv(A)
    V, D, H = _monomials_interval(3, pts)
    return V @ _HERMITE_C, D @ _HERMITE_C, H @ _HERMITE_C


def _tri_powers(k):
    return [(i, j) for tot in range(k + 1) for i in range(tot + 1)
            for j in [tot - i]]


def _tri_vander(k, pts, dx=0, dy=0):
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    cols = []
    for (i, j) in _tri_powers(k):
        ci, ei = 1.0, i
        for _ in range(dx):
            ci *= ei
            ei -= 1
        cj, ej = 1.0, j
        for _ in range(dy):
            cj *= ej
            ej -= 1
        if ci == 0 or cj == 0:
            cols.append(np.zeros(len(x)))
        else:
            cols.append(ci * cj * x ** max(ei, 0) * y ** max(ej, 0))
    return np.column_stack(cols)


_TRI_COEFF_CACHE: dict[int, np.ndarray] = {}


def _eval_lagrange_triangle(k, pts):
    pts = np.atleast_2d(pts)
    C = _TRI_COEFF_CACHE.get(k)
    if C is None:
        nodes = _triangle_nodes(k)
        C = np.linalg.inv(_tri_vander(k, nodes))
        _TRI_COEFF_CACHE[k] = C
    vals = _tri_vander(k, pts) @ C
    gx = _tri_vander(k, pts, dx=1) @ C
    gy = _tri_vander(k, pts, dy=1) @ C
    grads = np.stack([gx, gy], axis=-1)
    hxx = _tri_vander(k, pts, dx=2) @ C
    hxy = _tri_vander(k, pts, dx=1, dy=1) @ C
    hyy = _tri_vander(k, pts, dy=2) @ C
    hess = np.empty(vals.shape + (2, 2))
    hess[..., 0, 0] = hxx
    hess[..., 0, 1] = hxy
    hess[..., 1, 0] = hxy
    hess[..., 1, 1] = hyy
    return vals, grads, hess


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Quadrature:
    points: np.ndarray
    weights: np.ndarray
    exactness: int
    cell: str


def make_quadrature(cell: str, exactness: int) -> Quadrature:
    """Gauss rules on the reference interval [0,1] or unit triangle.

    Triangle rules come from a Duffy collapse with a Gauss-Jacobi rule in
    the collapsed direction, which is exact for the declared degree.
    """
    if not (1 <= exactness <= MAX_EXACTNESS):
        raise NotImplementedError(
            f"quadrature exactness {exactness} unsupported (1..{MAX_EXACTNESS})")
    if cell == "interval":
        m = (exactness + 2) // 2
        p, w = np.polynomial.legendre.leggauss(m)
        return Quadrature(0.5 * (p + 1.0), 0.5 * w, exactness, cell)
    if cell == "triangle":
        m = (exactness + 2) // 2
        pa, wa = np.polynomial.legendre.leggauss(m)
        pa = 0.5 * (pa + 1.0)
        wa = 0.5 * wa
        pbj, wbj = roots_jacobi(m, 1.0, 0.0)
        pb = 0.5 * (pbj + 1.0)
        wb = 0.25 * wbj  # includes the (1-b) factor of the collapse
        A, B = np.meshgrid(pa, pb, indexing="ij")
        W = np.outer(wa, wb)
        x = A * (1.0 - B)
        y = B
        return Quadrature(np.column_stack([x.ravel(), y.ravel()]),
                          W.ravel(), exactness, cell)
    raise ValueError(f"unknown cell {cell!r}")


# ---------------------------------------------------------------------------
# dof maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DofMap:
    """Element-to-global dof table plus dof coordinates and kinds."""

    basis: Basis
    element_dofs: np.ndarray    # (n_el, ndof_loc)
    n_dofs: int
    coords: np.ndarray          # (n_dofs, dim) physical dof locations
    kinds: np.ndarray           # 0 value dof, 1 derivative dof


def build_dofmap_interval(mesh: Mesh1D, basis: Basis) -> DofMap:
    N = mesh.n_elements
    if basis.kind == "hermite_interval":
        # two dofs per mesh node: (value, slope)
        table = np.empty((N, 4), dtype=int)
        for e, (i0, i1) in enumerate(mesh.elements):
            table[e] = (2 * i0, 2 * i0 + 1, 2 * i1, 2 * i1 + 1)
        n = 2 * len(mesh.nodes)
        coords = np.repeat(mesh.nodes, 2)[:, None]
        kinds = np.tile([0, 1], len(mesh.nodes))
        return DofMap(basis, table, n, coords, kinds)
    if basis.kind == "lagrange_interval":
        k = basis.degree
        table = np.empty((N, k + 1), dtype=int)
        for e in range(N):
            start = e * k
            table[e] = np.arange(start, start + k + 1)
        n = N * k + 1
        coords = np.empty((n, 1))
        for e, (i0, i1) in enumerate(mesh.elements):
            a, b = mesh.nodes[i0], mesh.nodes[i1]
            coords[table[e], 0] = a + basis.nodes * (b - a)
        return DofMap(basis, table, n, coords, np.zeros(n, dtype=int))
    raise ValueError(f"basis {basis.kind} is not an interval basis")


def build_dofmap_triangle(mesh: Mesh2D, basis: Basis) -> DofMap:
    """C0 Lagrange dof map on a triangulation, nodes keyed by coordinates."""
    if basis.kind != "lagrange_triangle":
        raise ValueError(f"basis {basis.kind} is not a triangle basis")
    v = mesh.vertices
    tris = mesh.triangles
    ref = basis.nodes
    n_el = mesh.n_triangles
    table = np.empty((n_el, basis.dof_count), dtype=int)
    scale = max(mesh.x_range[1] - mesh.x_range[0],
                mesh.y_range[1] - mesh.y_range[0])
    seen: dict[tuple[int, int], int] = {}
    coords = []
    for e in range(n_el):
        a, b, c = v[tris[e, 0]], v[tris[e, 1]], v[tris[e, 2]]
        phys = a + np.outer(ref[:, 0], b - a) + np.outer(ref[:, 1], c - a)
        for loc, p in enumerate(phys):
            key = (int(round(p[0] / scale * 1e9)), int(round(p[1] / scale * 1e9)))
            idx = seen.get(key)
            if idx is None:
                idx = len(coords)
                seen[key] = idx
                coords.append(p)
            table[e, loc] = idx
    coords = np.array(coords)
    return DofMap(basis, table, len(coords), coords,
                  np.zeros(len(coords), dtype=int))


def boundary_dofs(mesh: Mesh2D, dofmap: DofMap, tol: float = 1e-12) -> np.ndarray:
    """Indices of dofs lying on the rectangle boundary."""
    x0, x1 = mesh.x_range
    y0, y1 = mesh.y_range
    c = dofmap.coords
    s = max(x1 - x0, y1 - y0)
    on = (np.abs(c[:, 0] - x0) < tol * s) | (np.abs(c[:, 0] - x1) < tol * s) | \
         (np.abs(c[:, 1] - y0) < tol * s) | (np.abs(c[:, 1] - y1) < tol * s)
    return np.nonzero(on)[0]


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

class Field1D:
    """Scalar finite element function on an interval mesh."""

    def __init__(self, mesh: Mesh1D, dofmap: DofMap, coeffs: np.ndarray):
        if len(coeffs) != dofmap.n_dofs:
            raise ValueError("coefficient length does not match dof count")
        self.mesh = mesh
        self.dofmap = dofmap
        self.coeffs = np.asarray(coeffs, dtype=float)

    def _locate(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        nodes = self.mesh.nodes
        e = np.clip(np.searchsorted(nodes, r, side="right") - 1, 0,
                    self.mesh.n_elements - 1)
        a = nodes[e]
        b = nodes[e + 1]
        t = (r - a) / (b - a)
        return e, t, b - a

    def _tabulate(self, r):
        e, t, h = self._locate(r)
        vals, ders, hess = self.dofmap.basis.eval(t)
        if self.dofmap.basis.kind == "hermite_interval":
            # slope dofs scale with the element length
            scale = np.ones((len(t), 4))
            scale[:, 1] = h
            scale[:, 3] = h
            vals = vals * scale
            ders = ders * scale
            hess = hess * scale
        loc = self.coeffs[self.dofmap.element_dofs[e]]
        return loc, vals, ders / h[:, None], hess / (h ** 2)[:, None]

    def value(self, r):
        loc, vals, _, _ = self._tabulate(r)
        out = np.sum(loc * vals, axis=1)
        return out if np.ndim(r) else float(out[0])

    def deriv(self, r):
        loc, _, ders, _ = self._tabulate(r)
        out = np.sum(loc * ders, axis=1)
        return out if np.ndim(r) else float(out[0])

    def second_deriv(self, r):
        if self.dofmap.basis.degree < 2:
            raise ValueError("basis has no second derivatives; use the tensor field")
        loc, _, _, hess = self._tabulate(r)
        out = np.sum(loc * hess, axis=1)
        return out if np.ndim(r) else float(out[0])


class Field2D:
    """Scalar finite element function on a triangulation."""

    def __init__(self, mesh: Mesh2D, dofmap: DofMap, coeffs: np.ndarray):
        if len(coeffs) != dofmap.n_dofs:
            raise ValueError("coefficient length does not match dof count")
        self.mesh = mesh
        self.dofmap = dofmap
        self.coeffs = np.asarray(coeffs, dtype=float)

    def value(self, points):
        tri, ref = self.mesh.locate(points)
        vals, _, _ = self.dofmap.basis.eval(ref)
        loc = self.coeffs[self.dofmap.element_dofs[tri]]
        out = np.sum(loc * vals, axis=1)
        return out if np.ndim(points) > 1 else float(out[0])

    def gradient(self, points):
        tri, ref = self.mesh.locate(points)
        _, grads, _ = self.dofmap.basis.eval(ref)
        J = _tri_jacobians(self.mesh)[tri]          # (n,2,2)
        Jinv = np.linalg.inv(J)
        loc = self.coeffs[self.dofmap.element_dofs[tri]]
        gref = np.einsum("ni,nid->nd", loc, grads)
        out = np.einsum("ndk,nd->nk", Jinv, gref)
        return out if np.ndim(points) > 1 else out[0]


_TRI_JAC_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _tri_jacobians(mesh: Mesh2D) -> np.ndarray:
    J = _TRI_JAC_CACHE.get(mesh)
    if J is None:
        v = mesh.vertices
        t = mesh.triangles
        J = np.empty((mesh.n_triangles, 2, 2))
        J[:, :, 0] = v[t[:, 1]] - v[t[:, 0]]
        J[:, :, 1] = v[t[:, 2]] - v[t[:, 0]]
        _TRI_JAC_CACHE[mesh] = J
    return J


# ---------------------------------------------------------------------------
# batched assembly
# ---------------------------------------------------------------------------

@dataclass
class ElementContext:
    """Per-quadrature tabulated data handed to assembly kernels.

    Arrays are batched over elements: `points` is (n_el, nq, dim), `weights`
    (n_el, nq) includes the Jacobian determinant, `values` (nq, ndof) are
    reference basis values (identical per element for Lagrange/Hermite after
    scaling, so gradients/hessians are physical per element).
    """

    mesh: object
    dofmap: DofMap
    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray        # (n_el, nq, ndof) physical basis values
    grads: np.ndarray         # interval: (n_el, nq, ndof); triangle: (..., 2)
    hessians: np.ndarray      # interval: (n_el, nq, ndof); triangle: (..., 2, 2)

    def interp(self, coeffs, what="value"):
        """Values of a coefficient vector at the quadrature points."""
        loc = np.asarray(coeffs)[self.dofmap.element_dofs]
        if what == "value":
            return np.einsum("ei,eqi->eq", loc, self.values)
        if what == "grad":
            if self.grads.ndim == 3:
                return np.einsum("ei,eqi->eq", loc, self.grads)
            return np.einsum("ei,eqid->eqd", loc, self.grads)
        if what == "hess":
            if self.hessians.ndim == 3:
                return np.einsum("ei,eqi->eq", loc, self.hessians)
            return np.einsum("ei,eqidk->eqdk", loc, self.hessians)
        raise ValueError(what)


def element_context(mesh, dofmap: DofMap, quad: Quadrature) -> ElementContext:
    basis = dofmap.basis
    if isinstance(mesh, Mesh1D):
        vals, ders, hess = basis.eval(quad.points)
        n_el = mesh.n_elements
        a = mesh.nodes[:-1]
        h = np.diff(mesh.nodes)
        pts = a[:, None] + np.outer(h, quad.points)
        w = np.outer(h, quad.weights)
        V = np.broadcast_to(vals, (n_el,) + vals.shape).copy()
        D = np.broadcast_to(ders, (n_el,) + ders.shape) / h[:, None, None]
        H = np.broadcast_to(hess, (n_el,) + hess.shape) / (h ** 2)[:, None, None]
        D = np.array(D)
        H = np.array(H)
        if basis.kind == "hermite_interval":
            for arr in (V, D, H):
                arr[:, :, 1] *= h[:, None]
                arr[:, :, 3] *= h[:, None]
        return ElementContext(mesh, dofmap, pts[..., None], w, V, D, H)
    if isinstance(mesh, Mesh2D):
        vals, grads, hess = basis.eval(quad.points)
        J = _tri_jacobians(mesh)
        Jinv = np.linalg.inv(J)  # (n_el,2,2): d(ref)/d(phys)
        detJ = np.abs(np.linalg.det(J))
        v0 = mesh.vertices[mesh.triangles[:, 0]]
        pts = v0[:, None, :] + np.einsum("qr,erd->eqd", quad.points,
                                         np.swapaxes(J, 1, 2))
        w = np.outer(detJ, quad.weights)
        n_el = mesh.n_triangles
        V = np.broadcast_to(vals, (n_el,) + vals.shape)
        G = np.einsum("erd,qir->eqid", Jinv, grads)
        Hs = np.einsum("erd,qirs,esk->eqidk", Jinv, hess, Jinv)
        return ElementContext(mesh, dofmap, pts, w, np.array(V), G, Hs)
    raise TypeError(f"unsupported mesh type {type(mesh)}")


def assemble(mesh, trial: DofMap, test: DofMap, kernel, quad: Quadrature):
    """Assemble a sparse matrix from a batched element kernel.

    The kernel receives (test_ctx, trial_ctx) and must return local blocks of
    shape (n_el, n_test_loc, n_trial_loc).  Returns a SparseMatrix.
    """
    from .sparse import from_triplets

    ctx_test = element_context(mesh, test, quad)
    ctx_trial = ctx_test if trial is test else element_context(mesh, trial, quad)
    local = np.asarray(kernel(ctx_test, ctx_trial))
    n_el = ctx_test.weights.shape[0]
    nt = test.basis.dof_count
    ns = trial.basis.dof_count
    if local.shape != (n_el, nt, ns):
        raise RuntimeError(
            f"kernel block shape {local.shape} does not match dofs {(n_el, nt, ns)}")
    rows = np.repeat(test.element_dofs, ns, axis=1).ravel()
    cols = np.tile(trial.element_dofs, (1, nt)).ravel()
    return from_triplets(test.n_dofs, trial.n_dofs, None,
                         _arrays=(rows, cols, local.ravel()))


def assemble_vector(mesh, test: DofMap, kernel, quad: Quadrature) -> np.ndarray:
    """Assemble a global vector from a batched kernel returning (n_el, nt)."""
    ctx = element_context(mesh, test, quad)
    local = np.asarray(kernel(ctx))
    out = np.zeros(test.n_dofs)
    np.add.at(out, test.element_dofs.ravel(), local.ravel())
    return out


# ---------------------------------------------------------------------------
# error norms
# ---------------------------------------------------------------------------

def error_norm(u_h, exact, norm: str, quad: Quadrature) -> float:
    """Norm of u_h - exact by quadrature on the field's own mesh.

    `exact` provides value/gradient (and hessian for H2) callables; passing
    a plain callable works for L2/Linf.  H2 needs a basis with second
    derivatives (degree >= 2 or Hermite); for mixed solutions compare the
    tensor unknown instead.
    """
    dofmap = u_h.dofmap
    mesh = u_h.mesh
    ctx = element_context(mesh, dofmap, quad)
    pts = ctx.points.reshape(-1, ctx.points.shape[-1])
    w = ctx.weights.ravel()
    exact_value = exact.value if hasattr(exact, "value") else exact

    if isinstance(u_h, Field1D):
        r = pts[:, 0]
        uh = ctx.interp(u_h.coeffs, "value").ravel()
        if norm == "L2":
            d = uh - np.asarray(exact_value(r))
            return float(np.sqrt(np.sum(w * d ** 2)))
        if norm == "Linf":
            return float(np.max(np.abs(uh - np.asarray(exact_value(r)))))
        if norm == "H1":
            dh = ctx.interp(u_h.coeffs, "grad").ravel()
            d = dh - np.asarray(exact.deriv(r))
            return float(np.sqrt(np.sum(w * d ** 2)))
        if norm == "H2":
            if dofmap.basis.degree < 2:
                raise ValueError("H2 norm needs second derivatives; use sigma")
            hh = ctx.interp(u_h.coeffs, "hess").ravel()
            d = hh - np.asarray(exact.second_deriv(r))
            return float(np.sqrt(np.sum(w * d ** 2)))
        raise ValueError(f"unknown norm {norm!r}")

    uh = ctx.interp(u_h.coeffs, "value").ravel()
    if norm == "L2":
        d = uh - np.asarray(exact_value(pts))
        return float(np.sqrt(np.sum(w * d ** 2)))
    if norm == "Linf":
        return float(np.max(np.abs(uh - np.asarray(exact_value(pts)))))
    if norm == "H1":
        gh = ctx.interp(u_h.coeffs, "grad").reshape(-1, 2)
        d = gh - np.asarray(exact.gradient(pts))
        return float(np.sqrt(np.sum(w * np.sum(d ** 2, axis=1))))
    if norm == "H2":
        if dofmap.basis.degree < 2:
            raise ValueError("H2 norm of a P1 field is undefined; use sigma")
        hh = ctx.interp(u_h.coeffs, "hess").reshape(-1, 2, 2)
        d = hh - np.asarray(exact.hessian(pts))
        return float(np.sqrt(np.sum(w * np.sum(d ** 2, axis=(1, 2)))))
    raise ValueError(f"unknown norm {norm!r}")


def interpolate_1d(mesh: Mesh1D, dofmap: DofMap, fn, dfn=None) -> Field1D:
    """Nodal interpolant; Hermite needs the derivative callable too."""
    coeffs = np.empty(dofmap.n_dofs)
    r = dofmap.coords[:, 0]
    if dofmap.basis.kind == "hermite_interval":
        if dfn is None:
            raise ValueError("Hermite interpolation needs the derivative")
        vmask = dofmap.kinds == 0
        coeffs[vmask] = np.asarray(fn(r[vmask]))
        coeffs[~vmask] = np.asarray(dfn(r[~vmask]))
    else:
        coeffs[:] = np.asarray(fn(r))
    return Field1D(mesh, dofmap, coeffs)


def interpolate_2d(mesh: Mesh2D, dofmap: DofMap, fn) -> Field2D:
    return Field2D(mesh, dofmap, np.asarray(fn(dofmap.coords), dtype=float))
