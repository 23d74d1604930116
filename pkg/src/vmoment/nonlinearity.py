"""The three nonlinear operators, their linearizations, and cofactor algebra.

The residual convention throughout the package is

    G_eps(u) = eps * biharmonic(u) + F(D2u, grad u, u, x) = 0,

with -F elliptic at convex states.  Manufactured source terms live in the
problem data (`ProblemSpec.f`) and are added to the operator part inside
`eval_F`; the catalog owns all sign bookkeeping so that every manufactured
exact solution satisfies G_eps(u_exact) = 0 identically.

Tensor code paths are fixed at n = 2; the radial module covers general
dimension through scalar formulas.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "MongeAmpere", "GaussCurvature", "InfinityLaplacian",
    "ProblemSpec", "LinearizationBlocks", "ExactSolution",
    "cofactor", "eval_F", "eval_Fprime", "cofactor_divergence_residual",
    "Polynomial2D",
]


def cofactor(M: np.ndarray) -> np.ndarray:
    """Cofactor matrix of a 2x2 matrix: M @ cofactor(M).T = det(M) * I."""
    M = np.asarray(M, dtype=float)
    return np.array([[M[1, 1], -M[1, 0]], [-M[0, 1], M[0, 0]]])


@dataclass(frozen=True)
class LinearizationBlocks:
    """Partial derivatives of F at a state point: F_r (2x2, symmetric),
    F_p (2-vector), F_z (scalar)."""

    F_r: np.ndarray
    F_p: np.ndarray
    F_z: float

    def apply(self, kappa: np.ndarray, grad_w: np.ndarray, w: float) -> float:
        return float(np.sum(self.F_r * kappa) + self.F_p @ grad_w + self.F_z * w)


# ---------------------------------------------------------------------------
# operators; `core` / `blocks` are the vectorized forms used by assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MongeAmpere:
    """F = f - det(kappa); linearization F_r = -cof(kappa)."""

    name = "monge_ampere"

    def core(self, k11, k12, k22, p1, p2, z):
        return -(k11 * k22 - k12 * k12)

    def blocks(self, k11, k12, k22, p1, p2, z):
        zero = np.zeros_like(k11)
        return (-k22, k12, -k11, zero, zero, zero)


@dataclass(frozen=True)
class GaussCurvature:
    """Prescribed Gauss curvature, F = -det/(1+|p|^2)^2 + K*f.

    The curvature constant multiplies the data function at evaluation; a
    missing data function means the constant-curvature right-hand side.
    """

    K: float

    name = "gauss_curvature"

    def __post_init__(self):
        if not (self.K >= 0):
            raise ValueError(f"curvature must be nonnegative, got {self.K}")

    def core(self, k11, k12, k22, p1, p2, z):
        q = 1.0 + p1 * p1 + p2 * p2
        return -(k11 * k22 - k12 * k12) / q ** 2

    def blocks(self, k11, k12, k22, p1, p2, z):
        q = 1.0 + p1 * p1 + p2 * p2
        det = k11 * k22 - k12 * k12
        c = 4.0 * det / q ** 3
        return (-k22 / q ** 2, k12 / q ** 2, -k11 / q ** 2,
                c * p1, c * p2, np.zeros_like(k11))


@dataclass(frozen=True)
class InfinityLaplacian:
    """Regularized infinity-Laplacian, F = -(kappa p . p)/(|p|^2 + gamma).

    gamma = 0 is tolerated so that the degenerate linearization can be
    observed (the solvers then raise a singular-matrix error); gamma > 0 is
    the analyzed regime.
    """

    gamma: float

    name = "infinity_laplacian"

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    def core(self, k11, k12, k22, p1, p2, z):
        den = p1 * p1 + p2 * p2 + self.gamma
        num = k11 * p1 * p1 + 2.0 * k12 * p1 * p2 + k22 * p2 * p2
        return -_safe_div(num, den)

    def blocks(self, k11, k12, k22, p1, p2, z):
        den = p1 * p1 + p2 * p2 + self.gamma
        num = k11 * p1 * p1 + 2.0 * k12 * p1 * p2 + k22 * p2 * p2
        fr11 = -_safe_div(p1 * p1, den)
        fr12 = -_safe_div(p1 * p2, den)
        fr22 = -_safe_div(p2 * p2, den)
        # kappa p
        kp1 = k11 * p1 + k12 * p2
        kp2 = k12 * p1 + k22 * p2
        fp1 = -2.0 * _safe_div(kp1, den) + 2.0 * _safe_div(num * p1, den * den)
        fp2 = -2.0 * _safe_div(kp2, den) + 2.0 * _safe_div(num * p2, den * den)
        return (fr11, fr12, fr22, fp1, fp2, np.zeros_like(k11))


def _safe_div(num, den):
    # 0/0 -> 0; only reachable with gamma = 0 at a vanishing gradient
    if np.isscalar(den) or den.ndim == 0:
        return num / den if den != 0 else num * 0.0
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=(den != 0))
    return out


Operator = MongeAmpere | GaussCurvature | InfinityLaplacian


@dataclass(frozen=True)
class ExactSolution:
    """Manufactured exact solution with analytic derivatives.

    `regularized` says whether it solves the eps-regularized PDE exactly
    (then `bilaplacian` must be supplied) or only the eps -> 0 limit.
    """

    value: Callable
    gradient: Callable
    hessian: Callable
    bilaplacian: Optional[Callable] = None
    regularized: bool = True


@dataclass(frozen=True)
class ProblemSpec:
    """A 2-D problem instance: operator plus data, bound to one eps.

    second_trace(x, nu) supplies the Hessian normal-normal boundary datum
    (constant eps unless manufactured data override it); grad_g may be None,
    in which case tangential derivatives of g fall back to edge-wise finite
    differences.
    """

    operator: Operator
    f: Optional[Callable] = None
    g: Callable = None
    grad_g: Optional[Callable] = None
    second_trace: Callable = None
    exact: Optional[ExactSolution] = None

    def with_second_trace(self, phi) -> "ProblemSpec":
        return replace(self, second_trace=phi)

    def f_at(self, x):
        """Source values at points (n,2), with the Gauss K convention."""
        x = np.atleast_2d(x)
        if isinstance(self.operator, GaussCurvature):
            base = self.f(x) if self.f is not None else 1.0
            return self.operator.K * (base * np.ones(len(x)))
        if self.f is None:
            return np.zeros(len(x))
        return self.f(x) * np.ones(len(x))


def eval_F(spec: ProblemSpec, kappa, p, z: float, x) -> float:
    """Pointwise residual part F(kappa, p, z, x) including the source."""
    kappa = np.asarray(kappa, dtype=float)
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    op = spec.operator
    val = float(op.core(kappa[0, 0], kappa[0, 1], kappa[1, 1], p[0], p[1], z))
    return val + float(spec.f_at(x[None, :])[0])


def eval_Fprime(spec: ProblemSpec, kappa, p, z: float, x) -> LinearizationBlocks:
    """Linearization blocks of F at a state point (source terms drop out)."""
    kappa = np.asarray(kappa, dtype=float)
    p = np.asarray(p, dtype=float)
    fr11, fr12, fr22, fp1, fp2, fz = spec.operator.blocks(
        kappa[0, 0], kappa[0, 1], kappa[1, 1], p[0], p[1], z)
    F_r = np.array([[float(fr11), float(fr12)], [float(fr12), float(fr22)]])
    return LinearizationBlocks(F_r=F_r, F_p=np.array([float(fp1), float(fp2)]),
                               F_z=float(fz))


# ---------------------------------------------------------------------------
# polynomial fields and the cofactor divergence check
# ---------------------------------------------------------------------------

class Polynomial2D:
    """Bivariate polynomial with exact differentiation, for oracle checks."""

    def __init__(self, coeffs: dict[tuple[int, int], float]):
        self.coeffs = dict(coeffs)

    def deriv(self, dx: int = 0, dy: int = 0) -> "Polynomial2D":
        out = {}
        for (i, j), c in self.coeffs.items():
            if i < dx or j < dy:
                continue
            for _ in range(dx):
                c *= i
                i -= 1
            for _ in range(dy):
                c *= j
                j -= 1
            if c != 0.0:
                out[(i, j)] = out.get((i, j), 0.0) + c
        return Polynomial2D(out)

    def __call__(self, pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        out = np.zeros(len(x))
        for (i, j), c in self.coeffs.items():
            out += c * x ** i * y ** j
        return out


def cofactor_divergence_residual(v: Polynomial2D, mesh, quad) -> float:
    """Max row-divergence of cof(D^2 v) over the mesh quadrature points.

    Lemma: rows of the cofactor of a gradient matrix are divergence free;
    applied with the vector field grad(v) this is an identity for smooth v,
    so the residual measures only rounding.
    """
    from .fem import element_context, build_dofmap_triangle, lagrange_triangle

    dofmap = build_dofmap_triangle(mesh, lagrange_triangle(1))
    ctx = element_context(mesh, dofmap, quad)
    pts = ctx.points.reshape(-1, 2)
    # cof(D2v) rows: (v_yy, -v_xy) and (-v_xy, v_xx)
    row1 = v.deriv(0, 2).deriv(1, 0)(pts) - v.deriv(1, 1).deriv(0, 1)(pts)
    row2 = v.deriv(2, 0).deriv(0, 1)(pts) - v.deriv(1, 1).deriv(1, 0)(pts)
    return float(max(np.max(np.abs(row1)), np.max(np.abs(row2))))
