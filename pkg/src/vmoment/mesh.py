"""Structured meshes: 1-D intervals and 2-D right-triangle grids on rectangles.

Meshes are immutable after construction and safe to share between workers.
Only structured meshes are supported; the experiments all run on intervals,
squares and rectangles, and a fixed SW-NE cell diagonal keeps runs
bit-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh1D",
    "Mesh2D",
    "BoundaryEdge",
    "build_interval_mesh",
    "build_rect_mesh",
    "boundary_trace_quadrature",
]


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Interval mesh on [0, R] with strictly increasing nodes."""

    R: float
    nodes: np.ndarray
    elements: list[tuple[int, int]]

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def h_max(self) -> float:
        return float(np.max(np.diff(self.nodes)))

    @property
    def h_min(self) -> float:
        return float(np.min(np.diff(self.nodes)))


@dataclass(frozen=True)
class BoundaryEdge:
    """One boundary edge: vertex pair, outward normal, tangent, owning triangle.

    The tangent is the outward normal rotated by +90 degrees, so (nu, tau)
    is a right-handed frame on every edge.
    """

    vertices: tuple[int, int]
    normal: np.ndarray
    tangent: np.ndarray
    triangle: int


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Conforming triangulation of an axis-aligned rectangle.

    Triangles are counterclockwise.  The structured layout (nx-by-ny cells,
    SW-NE diagonals) is kept so that point location stays O(1).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: list[BoundaryEdge]
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int
    ny: int
    _areas: np.ndarray = field(repr=False, default=None)

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def areas(self) -> np.ndarray:
        return self._areas

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.x_range[0] + self.x_range[1]),
                         0.5 * (self.y_range[0] + self.y_range[1])])

    def cell_size(self) -> tuple[float, float]:
        dx = (self.x_range[1] - self.x_range[0]) / self.nx
        dy = (self.y_range[1] - self.y_range[0]) / self.ny
        return dx, dy

    @property
    def h_max(self) -> float:
        dx, dy = self.cell_size()
        return float(np.hypot(dx, dy))

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Find the triangle containing each point and its reference coordinates.

        Points must lie inside (or on the boundary of) the rectangle; they are
        clipped to it.  Returns (triangle indices, reference coords (n,2)).
        """
        pts = np.atleast_2d(points)
        dx, dy = self.cell_size()
        xi = (pts[:, 0] - self.x_range[0]) / dx
        eta = (pts[:, 1] - self.y_range[0]) / dy
        i = np.clip(np.floor(xi).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(eta).astype(int), 0, self.ny - 1)
        lx = np.clip(xi - i, 0.0, 1.0)
        ly = np.clip(eta - j, 0.0, 1.0)
        lower = lx >= ly  # below the SW-NE diagonal
        tri = 2 * (j * self.nx + i) + np.where(lower, 0, 1)
        # lower triangle (a,b,c): a=(0,0) b=(1,0) c=(1,1): x = a + (b-a)r + (c-a)s
        # -> r = lx - ly ... solve: lx = r + s, ly = s  => r = lx-ly, s = ly
        # upper triangle (a,c,d): c=(1,1) d=(0,1): lx = r, ly = r + s => r = lx, s = ly-lx
        ref = np.empty_like(pts)
        ref[lower, 0] = lx[lower] - ly[lower]
        ref[lower, 1] = ly[lower]
        up = ~lower
        ref[up, 0] = lx[up]
        ref[up, 1] = ly[up] - lx[up]
        return tri, ref


def build_interval_mesh(R: float, N: int) -> Mesh1D:
    """Uniform mesh of N elements on [0, R]."""
    if not (R > 0):
        raise ValueError(f"right endpoint must be positive, got R={R}")
    if N < 1:
        raise ValueError(f"need at least one element, got N={N}")
    nodes = np.linspace(0.0, R, N + 1)
    elements = [(i, i + 1) for i in range(N)]
    return Mesh1D(R=float(R), nodes=nodes, elements=elements)


def build_rect_mesh(x_range, y_range, nx: int, ny: int) -> Mesh2D:
    """Structured triangulation of (x0,x1) x (y0,y1), SW-NE cell diagonals.

    Each of the nx*ny rectangular cells is split along its SW-NE diagonal
    into a lower-right and an upper-left triangle, both counterclockwise.
    """
    x0, x1 = map(float, x_range)
    y0, y1 = map(float, y_range)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate ranges {x_range} x {y_range}")
    if nx < 1 or ny < 1:
        raise ValueError(f"need nx, ny >= 1, got {nx}, {ny}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    triangles = np.empty((2 * nx * ny, 3), dtype=int)
    boundary = []
    t = 0
    for j in range(ny):
        for i in range(nx):
            a = vid(i, j)
            b = vid(i + 1, j)
            c = vid(i + 1, j + 1)
            d = vid(i, j + 1)
            triangles[t] = (a, b, c)      # lower-right of the SW-NE diagonal
            triangles[t + 1] = (a, c, d)  # upper-left
            if j == 0:
                boundary.append(BoundaryEdge((a, b), np.array([0.0, -1.0]),
                                             np.array([1.0, 0.0]), t))
            if i == nx - 1:
                boundary.append(BoundaryEdge((b, c), np.array([1.0, 0.0]),
                                             np.array([0.0, 1.0]), t))
            if j == ny - 1:
                boundary.append(BoundaryEdge((c, d), np.array([0.0, 1.0]),
                                             np.array([-1.0, 0.0]), t + 1))
            if i == 0:
                boundary.append(BoundaryEdge((d, a), np.array([-1.0, 0.0]),
                                             np.array([0.0, -1.0]), t + 1))
            t += 2

    v = vertices
    tr = triangles
    e1 = v[tr[:, 1]] - v[tr[:, 0]]
    e2 = v[tr[:, 2]] - v[tr[:, 0]]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    if np.any(areas <= 0):
        raise RuntimeError("triangle orientation broken (non-positive area)")

    return Mesh2D(vertices=vertices, triangles=triangles, boundary_edges=boundary,
                  x_range=(x0, x1), y_range=(y0, y1), nx=nx, ny=ny, _areas=areas)


def boundary_trace_quadrature(mesh: Mesh2D, order: int):
    """Gauss points on every boundary edge.

    Returns a list of (point, weight, normal, tangent, triangle) tuples with
    `order` Gauss points per edge; the weights sum to the perimeter.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    gp, gw = np.polynomial.legendre.leggauss(order)
    gp = 0.5 * (gp + 1.0)   # to [0,1]
    gw = 0.5 * gw
    out = []
    for edge in mesh.boundary_edges:
        p0 = mesh.vertices[edge.vertices[0]]
        p1 = mesh.vertices[edge.vertices[1]]
        length = float(np.linalg.norm(p1 - p0))
        for t, w in zip(gp, gw):
            out.append((p0 + t * (p1 - p0), w * length, edge.normal,
                        edge.tangent, edge.triangle))
    return out
