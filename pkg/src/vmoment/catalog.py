"""Manufactured problems for the experiment harness.

Every 2-D entry builds a ProblemSpec whose data make the stated exact
solution satisfy the regularized residual eps*bilap(u) + F = 0 identically
(entries marked limit-exact instead satisfy the eps -> 0 equation, and are
used for eps-sweeps against the boundary-layer solution).  Radial entries
build RadialProblem data with the closed-form solution as oracle.

Notes on each entry record how sources printed for other dimensions or
scalings were re-derived so the data are consistent; the catalog test
module re-verifies every entry against an independent symbolic oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .nonlinearity import (ExactSolution, GaussCurvature, InfinityLaplacian,
                           MongeAmpere, ProblemSpec)
from .radial import RadialProblem

__all__ = ["CatalogEntry", "CATALOG", "get", "build_2d", "build_radial"]


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    kind: str                       # "mixed" or "radial"
    build: Callable
    x_range: tuple = (0.0, 1.0)
    y_range: tuple = (0.0, 1.0)
    n: int = 2
    R: float = 1.0
    default_k: int = 2
    default_tau: float = 0.0
    gamma_from_eps: Optional[Callable] = None
    notes: str = ""


def _as_pts(x):
    return np.atleast_2d(np.asarray(x, dtype=float))


# -- Monge-Ampere ------------------------------------------------------------

def _ma_quadratic(eps, **kw):
    def g(x):
        x = _as_pts(x)
        return x[:, 0] ** 2 + x[:, 1] ** 2

    def grad(x):
        return 2.0 * _as_pts(x)

    def hess(x):
        x = _as_pts(x)
        H = np.zeros((len(x), 2, 2))
        H[:, 0, 0] = 2.0
        H[:, 1, 1] = 2.0
        return H

    exact = ExactSolution(g, grad, hess,
                          bilaplacian=lambda x: np.zeros(len(_as_pts(x))))
    return ProblemSpec(operator=MongeAmpere(),
                       f=lambda x: 4.0 * np.ones(len(_as_pts(x))),
                       g=g, grad_g=grad,
                       second_trace=lambda x, nu: 2.0,
                       exact=exact)


def _ma_quartic(eps, **kw):
    # u = x1^4 + x2^2 : det D2u = 24 x1^2, bilap = 24, trace datum
    # 12 x1^2 nu1^2 + 2 nu2^2 (the printed 3-D source restricted to x3 = 0)
    def g(x):
        x = _as_pts(x)
        return x[:, 0] ** 4 + x[:, 1] ** 2

    def grad(x):
        x = _as_pts(x)
        return np.column_stack([4 * x[:, 0] ** 3, 2 * x[:, 1]])

    def hess(x):
        x = _as_pts(x)
        H = np.zeros((len(x), 2, 2))
        H[:, 0, 0] = 12 * x[:, 0] ** 2
        H[:, 1, 1] = 2.0
        return H

    exact = ExactSolution(g, grad, hess,
                          bilaplacian=lambda x: 24.0 * np.ones(len(_as_pts(x))))

    def f(x):
        x = _as_pts(x)
        return 24 * x[:, 0] ** 2 - 24 * eps

    def phi(x, nu):
        return 12 * x[0] ** 2 * nu[0] ** 2 + 2 * nu[1] ** 2

    return ProblemSpec(operator=MongeAmpere(), f=f, g=g, grad_g=grad,
                       second_trace=phi, exact=exact)


def _ma_exp(eps, **kw):
    # limit-exact entry for eps sweeps: u = e^(rho/2), det D2u = (1+rho)e^rho
    def g(x):
        x = _as_pts(x)
        return np.exp((x[:, 0] ** 2 + x[:, 1] ** 2) / 2)

    def grad(x):
        x = _as_pts(x)
        return x * g(x)[:, None]

    def hess(x):
        x = _as_pts(x)
        e = g(x)
        H = np.empty((len(x), 2, 2))
        H[:, 0, 0] = e * (1 + x[:, 0] ** 2)
        H[:, 0, 1] = e * x[:, 0] * x[:, 1]
        H[:, 1, 0] = H[:, 0, 1]
        H[:, 1, 1] = e * (1 + x[:, 1] ** 2)
        return H

    def f(x):
        x = _as_pts(x)
        rho = x[:, 0] ** 2 + x[:, 1] ** 2
        return (1 + rho) * np.exp(rho)

    exact = ExactSolution(g, grad, hess, regularized=False)
    return ProblemSpec(operator=MongeAmpere(), f=f, g=g, grad_g=grad,
                       second_trace=None, exact=exact)


# -- prescribed Gauss curvature ----------------------------------------------

def _gauss_exp(eps, K=0.1, **kw):
    # u = e^(rho/2); curvature core K*f0 = (1+rho)e^rho / (1+rho e^rho)^2;
    # the eps part enters the source unscaled, so the stored f carries 1/K
    def g(x):
        x = _as_pts(x)
        return np.exp((x[:, 0] ** 2 + x[:, 1] ** 2) / 2)

    def grad(x):
        x = _as_pts(x)
        return x * g(x)[:, None]

    def hess(x):
        x = _as_pts(x)
        e = g(x)
        H = np.empty((len(x), 2, 2))
        H[:, 0, 0] = e * (1 + x[:, 0] ** 2)
        H[:, 0, 1] = e * x[:, 0] * x[:, 1]
        H[:, 1, 0] = H[:, 0, 1]
        H[:, 1, 1] = e * (1 + x[:, 1] ** 2)
        return H

    def bilap(x):
        x = _as_pts(x)
        rho = x[:, 0] ** 2 + x[:, 1] ** 2
        return (8 + 8 * rho + rho ** 2) * np.exp(rho / 2)

    def f(x):
        x = _as_pts(x)
        rho = x[:, 0] ** 2 + x[:, 1] ** 2
        core = (1 + rho) * np.exp(rho) / (K * (1 + rho * np.exp(rho)) ** 2)
        return core - (eps / K) * (8 + 8 * rho + rho ** 2) * np.exp(rho / 2)

    def phi(x, nu):
        e = float(np.exp((x[0] ** 2 + x[1] ** 2) / 2))
        return e * ((1 + x[0] ** 2) * nu[0] ** 2
                    + 2 * x[0] * x[1] * nu[0] * nu[1]
                    + (1 + x[1] ** 2) * nu[1] ** 2)

    exact = ExactSolution(g, grad, hess, bilaplacian=bilap)
    return ProblemSpec(operator=GaussCurvature(K=K), f=f, g=g, grad_g=grad,
                       second_trace=phi, exact=exact)


def _gauss_octic(eps, K=0.1, **kw):
    # u = rho^4 / 8: det D2u = 7 rho^6, |grad u|^2 = rho^7, bilap = 288 rho^2
    def rho_of(x):
        x = _as_pts(x)
        return x[:, 0] ** 2 + x[:, 1] ** 2

    def g(x):
        return rho_of(x) ** 4 / 8

    def grad(x):
        x = _as_pts(x)
        return x * (rho_of(x) ** 3)[:, None]

    def hess(x):
        x = _as_pts(x)
        rho = rho_of(x)
        H = np.empty((len(x), 2, 2))
        H[:, 0, 0] = rho ** 3 + 6 * x[:, 0] ** 2 * rho ** 2
        H[:, 0, 1] = 6 * x[:, 0] * x[:, 1] * rho ** 2
        H[:, 1, 0] = H[:, 0, 1]
        H[:, 1, 1] = rho ** 3 + 6 * x[:, 1] ** 2 * rho ** 2
        return H

    def bilap(x):
        return 288.0 * rho_of(x) ** 2

    def f(x):
        rho = rho_of(x)
        core = 7 * rho ** 6 / (K * (1 + rho ** 7) ** 2)
        return core - (eps / K) * 288.0 * rho ** 2

    def phi(x, nu):
        rho = x[0] ** 2 + x[1] ** 2
        return ((7 * x[0] ** 2 + x[1] ** 2) * rho ** 2 * nu[0] ** 2
                + 12 * rho ** 2 * x[0] * x[1] * nu[0] * nu[1]
                + (7 * x[1] ** 2 + x[0] ** 2) * rho ** 2 * nu[1] ** 2)

    exact = ExactSolution(g, grad, hess, bilaplacian=bilap)
    return ProblemSpec(operator=GaussCurvature(K=K), f=f, g=g, grad_g=grad,
                       second_trace=phi, exact=exact)


def _gauss_kstar(eps, K=0.0, **kw):
    # Dirichlet data of the K* continuation study; no manufactured source
    def g(x):
        x = _as_pts(x)
        return np.sqrt(1.0 - x[:, 0] ** 2 - x[:, 1] ** 2)

    def grad(x):
        x = _as_pts(x)
        s = np.sqrt(1.0 - x[:, 0] ** 2 - x[:, 1] ** 2)
        return -x / s[:, None]

    return ProblemSpec(operator=GaussCurvature(K=K), f=None, g=g, grad_g=grad,
                       second_trace=None, exact=None)


# -- infinity-Laplacian -------------------------------------------------------

def _il_trig(eps, gamma=1e-4, **kw):
    # u = cos x1 - cos x2; the source absorbs both the eps and the
    # quotient parts so the residual vanishes at u for this gamma
    def g(x):
        x = _as_pts(x)
        return np.cos(x[:, 0]) - np.cos(x[:, 1])

    def grad(x):
        x = _as_pts(x)
        return np.column_stack([-np.sin(x[:, 0]), np.sin(x[:, 1])])

    def hess(x):
        x = _as_pts(x)
        H = np.zeros((len(x), 2, 2))
        H[:, 0, 0] = -np.cos(x[:, 0])
        H[:, 1, 1] = np.cos(x[:, 1])
        return H

    def bilap(x):
        x = _as_pts(x)
        return np.cos(x[:, 0]) - np.cos(x[:, 1])

    def f(x):
        x = _as_pts(x)
        c1, c2 = np.cos(x[:, 0]), np.cos(x[:, 1])
        s1, s2 = np.sin(x[:, 0]), np.sin(x[:, 1])
        quotient = (c1 * s1 ** 2 - c2 * s2 ** 2) / (s1 ** 2 + s2 ** 2 + gamma)
        return -(eps * (c1 - c2) + quotient)

    def phi(x, nu):
        return nu[1] ** 2 * np.cos(x[1]) - nu[0] ** 2 * np.cos(x[0])

    exact = ExactSolution(g, grad, hess, bilaplacian=bilap)
    return ProblemSpec(operator=InfinityLaplacian(gamma=gamma), f=f, g=g,
                       grad_g=grad, second_trace=phi, exact=exact)


def _il_quadratic(eps, gamma=None, **kw):
    # limit-exact smooth case u = x1^2 + x2^2 with source
    # 8 rho / (4 rho + gamma); gamma defaults to eps^2
    if gamma is None:
        gamma = eps ** 2

    def g(x):
        x = _as_pts(x)
        return x[:, 0] ** 2 + x[:, 1] ** 2

    def grad(x):
        return 2.0 * _as_pts(x)

    def hess(x):
        x = _as_pts(x)
        H = np.zeros((len(x), 2, 2))
        H[:, 0, 0] = 2.0
        H[:, 1, 1] = 2.0
        return H

    def f(x):
        x = _as_pts(x)
        rho = x[:, 0] ** 2 + x[:, 1] ** 2
        return 8 * rho / (4 * rho + gamma)

    exact = ExactSolution(g, grad, hess, regularized=False)
    return ProblemSpec(operator=InfinityLaplacian(gamma=gamma), f=f, g=g,
                       grad_g=grad, second_trace=None, exact=exact)


# -- radial -------------------------------------------------------------------

def _radial_ma_exp(eps, n=2, **kw):
    def f(r):
        r = np.asarray(r, dtype=float)
        return (1 + r ** 2) * np.exp(n * r ** 2 / 2)

    return RadialProblem(n=n, R=1.0, f=f, gR=float(np.exp(0.5)), eps=eps)


CATALOG = {
    "ma-quadratic": CatalogEntry(
        id="ma-quadratic", kind="mixed", build=_ma_quadratic, default_k=1,
        notes="printed 3-D quadratic restricted to 2-D: f = 4, trace = 2"),
    "ma-quartic": CatalogEntry(
        id="ma-quartic", kind="mixed", build=_ma_quartic, default_k=1,
        notes="printed 3-D quartic restricted to x3 = 0 and re-derived: "
              "f = 24 x1^2 - 24 eps"),
    "ma-exp": CatalogEntry(
        id="ma-exp", kind="mixed", build=_ma_exp, default_k=2,
        notes="limit-exact exponential for eps sweeps"),
    "gauss-exp": CatalogEntry(
        id="gauss-exp", kind="mixed", build=_gauss_exp, default_k=2,
        notes="curvature core as printed; the eps part of the source enters "
              "unscaled by K, so the stored f divides it by K"),
    "gauss-octic": CatalogEntry(
        id="gauss-octic", kind="mixed", build=_gauss_octic, default_k=2,
        notes="same K-scaling convention as gauss-exp"),
    "gauss-kstar": CatalogEntry(
        id="gauss-kstar", kind="mixed", build=_gauss_kstar, default_k=2,
        x_range=(-0.57, 0.57), y_range=(-0.57, 0.57),
        notes="K* continuation data, concave branch (eps < 0)"),
    "il-trig": CatalogEntry(
        id="il-trig", kind="mixed", build=_il_trig, default_k=2,
        default_tau=1.0, x_range=(-0.5, 0.5), y_range=(-0.5, 0.5),
        gamma_from_eps=lambda e: 1e-4,
        notes="source sign flipped into the residual convention"),
    "il-quadratic": CatalogEntry(
        id="il-quadratic", kind="mixed", build=_il_quadratic, default_k=2,
        default_tau=1.0, x_range=(-0.5, 0.5), y_range=(-0.5, 0.5),
        gamma_from_eps=lambda e: e ** 2,
        notes="limit-exact smooth case, gamma = eps^2"),
    "radial-ma-exp": CatalogEntry(
        id="radial-ma-exp", kind="radial", build=_radial_ma_exp,
        notes="f = (1+r^2) e^(n r^2 / 2), exact u = e^(r^2/2)"),
}


def get(problem_id: str) -> CatalogEntry:
    try:
        return CATALOG[problem_id]
    except KeyError:
        raise KeyError(f"unknown problem id {problem_id!r}; "
                       f"known: {sorted(CATALOG)}") from None


def build_2d(problem_id: str, eps: float, **kw) -> ProblemSpec:
    entry = get(problem_id)
    if entry.kind != "mixed":
        raise ValueError(f"{problem_id} is not a 2-D problem")
    return entry.build(eps, **kw)


def build_radial(problem_id: str, eps: float, **kw) -> RadialProblem:
    entry = get(problem_id)
    if entry.kind != "radial":
        raise ValueError(f"{problem_id} is not a radial problem")
    return entry.build(eps, **kw)
