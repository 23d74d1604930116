"""Iterative boundary-layer surgery on the second-order trace.

Predictor-corrector loop: solve with the artificial trace datum, sample the
discrete second-order trace just inside the eps-layer, extend it to the
boundary, replace the datum, re-solve warm-started.  The radial path
corrects the natural Laplacian flux of the Hermite solver; the mixed path
corrects the essential sigma nu.nu data.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import mixed as mixed_mod
from . import radial as radial_mod
from .mesh import Mesh1D

logger = logging.getLogger(__name__)

__all__ = ["SurgeryConfig", "SurgeryTrace", "surgical_solve_radial",
           "surgical_solve_mixed"]

EXTENSIONS = ("nearest-inner-sample", "linear-along-normal", "max-constant")


@dataclass(frozen=True)
class SurgeryConfig:
    """Band width factor (band = c_band * eps), extension mode, iterations."""

    c_band: float = 2.0
    extension: str = "linear-along-normal"
    iterations: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("at least one surgery iteration is required")
        if self.c_band <= 0:
            raise ValueError("band width factor must be positive")
        if self.extension not in EXTENSIONS:
            raise ValueError(f"extension must be one of {EXTENSIONS}")


@dataclass
class SurgeryTrace:
    """Per-pass records; index 0 is the uncorrected solve."""

    errors: list = field(default_factory=list)       # dict per iteration
    trace_values: list = field(default_factory=list)  # extended c_eps samples
    states: list = field(default_factory=list)


def _extend(samples_near, samples_far, mode):
    """Extend inner-band samples to the boundary, bounded by the sampled range."""
    near = np.atleast_1d(np.asarray(samples_near, dtype=float))
    if mode == "max-constant":
        return np.full_like(near, float(np.max(near)))
    if mode == "nearest-inner-sample":
        return near.copy()
    far = np.atleast_1d(np.asarray(samples_far, dtype=float))
    lo = min(float(np.min(near)), float(np.min(far)))
    hi = max(float(np.max(near)), float(np.max(far)))
    return np.clip(2.0 * near - far, lo, hi)


def surgical_solve_radial(problem, mesh: Mesh1D, config: SurgeryConfig,
                          exact=None, tol: float = 1e-9,
                          initial_second_trace: Optional[float] = None):
    """Surgery on the radial fourth-order solve (trace = radial Laplacian).

    Returns (final RadialState, SurgeryTrace).  When `exact` is given the
    trace records weighted error norms and the boundary Laplacian error for
    every pass.  `initial_second_trace` overrides the eps datum of the
    uncorrected pass (e.g. when the compatible trace is already known).
    """
    eps = problem.eps
    if eps <= 0:
        raise ValueError("surgery runs on the convex branch (eps > 0)")
    band = config.c_band * eps
    if band >= 0.5 * problem.R:
        raise ValueError(f"band {band:.3e} swallows half the domain "
                         f"(R = {problem.R})")
    trace = SurgeryTrace()
    state = radial_mod.solve_radial_fourth_order(
        problem, mesh, tol=tol, second_trace=initial_second_trace)
    _record_radial(trace, state, problem, mesh, exact)
    n = problem.n
    for it in range(config.iterations):
        r1 = problem.R - band
        r2 = problem.R - 2.0 * band
        lap1 = float(state.u.second_deriv(r1) + (n - 1) * state.u.deriv(r1) / r1)
        lap2 = float(state.u.second_deriv(r2) + (n - 1) * state.u.deriv(r2) / r2)
        c_eps = float(_extend([lap1], [lap2], config.extension)[0])
        trace.trace_values.append(c_eps)
        try:
            state = radial_mod.solve_radial_fourth_order(
                problem, mesh, tol=tol, eps_start=eps, second_trace=c_eps,
                initial=state.u.coeffs)
        except radial_mod.NonconvergenceError as exc:
            raise radial_mod.NonconvergenceError(
                f"surgery iteration {it + 1} failed: {exc}",
                history=exc.history, eps=eps) from exc
        _record_radial(trace, state, problem, mesh, exact)
    return state, trace


def _record_radial(trace, state, problem, mesh, exact):
    rec = {}
    if exact is not None:
        for norm in ("L2", "H1", "H2", "Linf"):
            rec[norm] = radial_mod.radial_error(state.u, exact, mesh,
                                                problem.n, norm)
        R = problem.R
        n = problem.n
        lap_h = state.u.second_deriv(R) + (n - 1) * state.u.deriv(R) / R
        lap_e = exact.laplacian(R)
        rec["trace_err"] = abs(float(lap_h) - float(lap_e))
    trace.errors.append(rec)
    trace.states.append(state)


def surgical_solve_mixed(spec_builder, space, eps: float,
                         config: SurgeryConfig, tol: float = 1e-10,
                         eps_start: Optional[float] = None):
    """Surgery on the mixed solve (trace = sigma nu.nu at boundary nodes).

    `spec_builder(eps)` must produce the problem data; the corrected trace
    replaces spec.second_trace between passes.  Samples are ray-traced along
    the inward normal at every constrained boundary node.
    """
    if eps <= 0:
        raise ValueError("surgery runs on the convex branch (eps > 0)")
    mesh = space.mesh
    band = config.c_band * eps
    width = min(mesh.x_range[1] - mesh.x_range[0],
                mesh.y_range[1] - mesh.y_range[0])
    if band >= 0.5 * width:
        raise ValueError(f"band {band:.3e} swallows half the domain")

    trace = SurgeryTrace()
    base_spec = spec_builder(eps)
    state, _ = mixed_mod.continuation_solve(spec_builder, space, eps,
                                            eps_start=eps_start, tol=tol)
    _record_mixed(trace, state, base_spec)

    coords = space.dofmap.coords
    for it in range(config.iterations):
        tau_shift = space.tau
        ueval = state.u_field()
        near_vals = []
        far_vals = []
        keys = []
        for c, d, nu in space.snn_constraints:
            x = coords[d]
            x1 = x - band * nu
            x2 = x - 2.0 * band * nu
            s1 = state.sigma_nn(x1[None, :], nu)[0] \
                - tau_shift * ueval.value(x1[None, :])[0]
            s2 = state.sigma_nn(x2[None, :], nu)[0] \
                - tau_shift * ueval.value(x2[None, :])[0]
            near_vals.append(s1)
            far_vals.append(s2)
            keys.append((c, d))
        ext = _extend(near_vals, far_vals, config.extension)
        table = {k: float(v) for k, v in zip(keys, ext)}
        trace.trace_values.append(table)

        def corrected_trace(x, nu, _table=table, _coords=coords):
            # nearest constrained node with matching normal component
            comp = 0 if abs(nu[0]) > 0.5 else 2
            d2 = np.sum((_coords - x) ** 2, axis=1)
            order = np.argsort(d2)
            for d in order[:8]:
                key = (comp, int(d))
                if key in _table:
                    return _table[key]
            return eps

        def builder(e, _phi=corrected_trace):
            return spec_builder(e).with_second_trace(_phi)

        warm = mixed_mod.MixedState(space, eps, state.X.copy())
        state, _ = mixed_mod.continuation_solve(builder, space, eps,
                                                state=warm, tol=tol)
        _record_mixed(trace, state, base_spec)
    return state, trace


def _record_mixed(trace, state, spec):
    rec = {}
    if spec.exact is not None:
        rec.update(mixed_mod.state_errors(state, spec.exact))
        # max sigma nn error over constrained boundary nodes
        coords = state.space.dofmap.coords
        worst = 0.0
        for c, d, nu in state.space.snn_constraints:
            x = coords[d]
            snn_h = state.sigma_nn(x[None, :], nu)[0] \
                - state.space.tau * state.u_field().value(x[None, :])[0]
            H = np.asarray(spec.exact.hessian(x[None, :]))[0]
            snn_e = float(nu @ H @ nu)
            worst = max(worst, abs(snn_h - snn_e))
        rec["trace_err"] = worst
    trace.errors.append(rec)
    trace.states.append(state)
