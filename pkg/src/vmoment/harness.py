"""Experiment driver: sweeps, rate estimation, CSV tables, K* search.

Tables are deterministic: values are quantized to the printed %.6e format
at insertion, metadata carries a config-hash build id instead of a
timestamp, and re-running the same config reproduces the file byte for
byte.  Columns follow the fixed schema

    param,err_L2,err_H1,err_H2,err_Linf,rate_L2,rate_H1,rate_H2,rate_Linf

with empty cells for unavailable norms and FAILED markers for rows whose
solve did not converge (the sweep still emits the table).
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import catalog, mixed, radial, sparse, surgery
from .mesh import build_interval_mesh, build_rect_mesh

logger = logging.getLogger(__name__)

__all__ = ["SweepConfig", "RateTable", "estimate_rate", "run_sweep",
           "parse_rate_table", "estimate_k_star", "run_surgery"]

NORMS = ("L2", "H1", "H2", "Linf")
HEADER = "param,err_L2,err_H1,err_H2,err_Linf,rate_L2,rate_H1,rate_H2,rate_Linf"


def _q(v: Optional[float]) -> Optional[float]:
    """Quantize through the CSV float format so memory equals file."""
    return None if v is None else float(f"{v:.6e}")


def estimate_rate(errors, params):
    """Log-ratio rates; the first entry and any nonpositive error give None."""
    errors = list(errors)
    params = list(params)
    if len(errors) != len(params) or len(errors) < 2:
        raise ValueError("need equal-length lists of at least two entries")
    rates = [None]
    for i in range(1, len(errors)):
        e0, e1 = errors[i - 1], errors[i]
        if e0 is None or e1 is None or e0 <= 0 or e1 <= 0:
            rates.append(None)
            continue
        rates.append(np.log(e0 / e1) / np.log(params[i - 1] / params[i]))
    return rates


@dataclass
class RateTable:
    metadata: dict
    rows: list = dc_field(default_factory=list)  # {param, errors{}, rates{}, failed}

    def add_row(self, param, errors: dict, failed: bool = False):
        self.rows.append({
            "param": _q(param),
            "errors": {n: _q(errors.get(n)) for n in NORMS},
            "rates": {n: None for n in NORMS},
            "failed": failed,
        })

    def compute_rates(self):
        params = [r["param"] for r in self.rows]
        for n in NORMS:
            errs = [None if r["failed"] else r["errors"].get(n) for r in self.rows]
            rates = estimate_rate(errs, params) if len(errs) >= 2 else [None] * len(errs)
            for r, rate in zip(self.rows, rates):
                r["rates"][n] = _q(rate)

    def errors(self, norm: str):
        return [r["errors"].get(norm) for r in self.rows]

    def rates(self, norm: str):
        return [r["rates"].get(norm) for r in self.rows]

    def final_rate(self, norm: str):
        vals = [v for v in self.rates(norm) if v is not None]
        return vals[-1] if vals else None

    def to_csv(self) -> str:
        lines = []
        for key in sorted(self.metadata):
            lines.append(f"# {key}: {self.metadata[key]}")
        lines.append(HEADER)
        for r in self.rows:
            cells = [f"{r['param']:.6e}"]
            for n in NORMS:
                v = r["errors"].get(n)
                cells.append("FAILED" if r["failed"] else
                             ("" if v is None else f"{v:.6e}"))
            for n in NORMS:
                v = r["rates"].get(n)
                cells.append("" if v is None else f"{v:.6e}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write(self, path):
        text = self.to_csv()
        with open(path, "w") as fh:
            fh.write(text)
        logger.info("wrote %s", path)
        return path


def parse_rate_table(path) -> RateTable:
    metadata = {}
    rows = []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, val = ln[1:].partition(":")
            metadata[key.strip()] = val.strip()
        elif ln.strip():
            body.append(ln)
    if not body or body[0] != HEADER:
        raise ValueError(f"{path} is not a rate table (missing header)")
    table = RateTable(metadata=metadata)
    for ln in body[1:]:
        cells = ln.split(",")
        failed = "FAILED" in cells[1:5]
        errors = {}
        for n, c in zip(NORMS, cells[1:5]):
            errors[n] = None if c in ("", "FAILED") else float(c)
        row = {"param": float(cells[0]), "errors": errors,
               "rates": {n: (None if c == "" else float(c))
                         for n, c in zip(NORMS, cells[5:9])},
               "failed": failed}
        table.rows.append(row)
    return table


@dataclass
class SweepConfig:
    """One experiment sweep over eps or h with everything else fixed."""

    problem: str
    sweep: str                      # "eps" or "h"
    values: list
    grid: Optional[int] = None      # mesh resolution for eps sweeps
    eps: Optional[float] = None     # fixed eps for h sweeps
    k: Optional[int] = None
    tau: Optional[float] = None
    gamma: Optional[float] = None   # None -> entry default (eps^2 where set)
    n_dim: Optional[int] = None     # radial dimension override
    tol: float = 1e-9
    method: str = "reduced"         # radial: "reduced" | "hermite"
    warm: bool = True
    out: Optional[str] = None

    def __post_init__(self):
        if self.sweep not in ("eps", "h"):
            raise ValueError("sweep must be 'eps' or 'h'")
        vals = list(self.values)
        if len(vals) < 2:
            raise ValueError("a sweep needs at least two values")
        d = np.diff(vals)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("sweep values must be strictly monotone")
        if self.sweep == "eps" and self.grid is None:
            raise ValueError("eps sweeps need a fixed grid")
        if self.sweep == "h" and self.eps is None:
            raise ValueError("h sweeps need a fixed eps")


def _config_hash(cfg: SweepConfig) -> str:
    text = repr(sorted(cfg.__dict__.items()))
    return hashlib.sha1(text.encode()).hexdigest()[:12]


def _metadata(cfg: SweepConfig, entry) -> dict:
    md = {"problem": cfg.problem, "sweep": cfg.sweep, "build": _config_hash(cfg),
          "tol": f"{cfg.tol:.1e}", "kind": entry.kind}
    if cfg.sweep == "eps":
        md["grid"] = cfg.grid
    else:
        md["eps"] = f"{cfg.eps:.6e}"
    if entry.kind == "mixed":
        md["k"] = cfg.k if cfg.k is not None else entry.default_k
        md["tau"] = cfg.tau if cfg.tau is not None else entry.default_tau
    else:
        md["n"] = cfg.n_dim or entry.n
        md["method"] = cfg.method
    return md


def run_sweep(cfg: SweepConfig) -> RateTable:
    entry = catalog.get(cfg.problem)
    table = RateTable(metadata=_metadata(cfg, entry))
    if entry.kind == "radial":
        _radial_sweep(cfg, entry, table)
    else:
        _mixed_sweep(cfg, entry, table)
    table.compute_rates()
    if cfg.out:
        table.write(cfg.out)
    return table


def _radial_sweep(cfg: SweepConfig, entry, table: RateTable):
    n_dim = cfg.n_dim or entry.n
    warm_coeffs = None
    for value in cfg.values:
        if cfg.sweep == "eps":
            eps, N = value, cfg.grid
        else:
            eps, N = cfg.eps, max(1, round(entry.R / value))
        prob = entry.build(eps, n=n_dim)
        mesh = build_interval_mesh(prob.R, N)
        try:
            if cfg.method == "hermite":
                state = radial.solve_radial_fourth_order(prob, mesh, tol=cfg.tol)
            else:
                state = radial.solve_reduced_w(
                    prob, mesh, tol=cfg.tol,
                    initial=warm_coeffs if cfg.warm and cfg.sweep == "eps" else None)
                warm_coeffs = state.w.coeffs
            exact = radial.exact_radial_solution(prob, "convex")
            errs = {norm: radial.radial_error(state.u, exact, mesh, n_dim, norm)
                    for norm in NORMS}
            table.add_row(value, errs)
        except (radial.NonconvergenceError, sparse.SingularMatrixError) as exc:
            logger.warning("sweep value %s failed: %s", value, exc)
            table.add_row(value, {}, failed=True)
            warm_coeffs = None


def _transfer_state(prev: mixed.MixedState, space, spec, eps) -> mixed.MixedState:
    st = mixed.MixedState(space, eps, np.zeros(space.n_total))
    coords = space.dofmap.coords
    for comp in ("s11", "s12", "s22"):
        st.part(comp)[:] = prev.sigma_field(comp).value(coords)
    st.part("u")[:] = prev.u_field().value(coords)
    mixed.apply_boundary_data(spec, space, st.X, eps)
    return st


def _mixed_sweep(cfg: SweepConfig, entry, table: RateTable):
    k = cfg.k if cfg.k is not None else entry.default_k
    tau = cfg.tau if cfg.tau is not None else entry.default_tau
    width = entry.x_range[1] - entry.x_range[0]
    prev = None
    space = None
    for value in cfg.values:
        if cfg.sweep == "eps":
            eps, n = value, cfg.grid
        else:
            eps, n = cfg.eps, max(1, round(width / value))
        kw = {}
        if cfg.gamma is not None:
            kw["gamma"] = cfg.gamma
        elif entry.gamma_from_eps is not None:
            kw["gamma"] = entry.gamma_from_eps(eps)
        spec = entry.build(eps, **kw)
        if space is None or space.mesh.nx != n:
            mesh = build_rect_mesh(entry.x_range, entry.y_range, n, n)
            space = mixed.build_space(mesh, k=k, tau=tau)
        try:
            if prev is None or not cfg.warm:
                st0 = mixed.initial_guess(spec, space, eps)
            elif prev.space is space:
                st0 = mixed.MixedState(space, eps, prev.X.copy())
            else:
                st0 = _transfer_state(prev, space, spec, eps)
            state, _ = mixed.newton_solve(spec, space, st0, tol=cfg.tol)
            prev = state
            if spec.exact is not None:
                errs = mixed.state_errors(state, spec.exact)
            else:
                errs = {}
            table.add_row(value, errs)
        except (mixed.NewtonError, sparse.SingularMatrixError) as exc:
            logger.warning("sweep value %s failed: %s", value, exc)
            table.add_row(value, {}, failed=True)
            prev = None


def run_surgery(problem_id: str, eps: float, grid: int, c_band: float,
                iterations: int, extension: str = "linear-along-normal",
                n_dim: Optional[int] = None, tol: float = 1e-9,
                out: Optional[str] = None):
    """Surgery driver; returns (trace, RateTable keyed by iteration index)."""
    entry = catalog.get(problem_id)
    cfg = surgery.SurgeryConfig(c_band=c_band, extension=extension,
                                iterations=iterations)
    if entry.kind == "radial":
        prob = entry.build(eps, n=n_dim or entry.n)
        mesh = build_interval_mesh(prob.R, grid)
        exact = radial.exact_radial_solution(prob, "convex")
        _, trace = surgery.surgical_solve_radial(prob, mesh, cfg, exact=exact,
                                                 tol=tol)
    else:
        mesh = build_rect_mesh(entry.x_range, entry.y_range, grid, grid)
        space = mixed.build_space(mesh, k=entry.default_k, tau=entry.default_tau)
        _, trace = surgery.surgical_solve_mixed(
            lambda e: entry.build(e), space, eps, cfg, tol=tol)
    table = RateTable(metadata={
        "problem": problem_id, "mode": "surgery", "eps": f"{eps:.6e}",
        "grid": grid, "band_factor": c_band, "extension": extension,
        "build": hashlib.sha1(
            repr((problem_id, eps, grid, c_band, extension, iterations))
            .encode()).hexdigest()[:12]})
    for i, rec in enumerate(trace.errors):
        table.add_row(float(i + 1), rec)  # param column = iteration + 1
    # rates across iterations are not meaningful; leave them empty
    if out:
        table.write(out)
    return trace, table


# ---------------------------------------------------------------------------
# K* estimation
# ---------------------------------------------------------------------------

class NonmonotoneFeasibilityError(RuntimeError):
    def __init__(self, samples):
        super().__init__(f"feasibility is not monotone on the samples: {samples}")
        self.samples = samples


def estimate_k_star(problem_id: str, eps: float, h: float, K_tol: float,
                    k: Optional[int] = None, K_hi_start: float = 1.0,
                    K_cap: float = 16.0, K_step: float = 0.25,
                    tol: float = 1e-8, max_iter: int = 15,
                    grad_cap_factor: float = 2.0) -> dict:
    """Bisection on the curvature constant with a gated Newton oracle.

    Solvability of the prescribed-curvature problem holds for K below a
    critical K*.  The oracle walks K upward in continuation steps of at
    most K_step, each warm-started and solved by plain Newton; a target is
    infeasible when a step fails to converge OR when the solution leaves
    the bounded-gradient regime (max |grad u_h| beyond grad_cap_factor
    times the K = 0 anchor's).  The gate is needed because the eps-term
    regularizes the continuum blow-up: the discrete branch continues far
    past K* with Newton still converging, while the gradient starts
    growing without bound right at the critical curvature.  Monotone
    feasibility is verified on all sampled points.  This search procedure
    is this package's construction; it is not taken from any reference.
    """
    if eps >= 0:
        raise ValueError("the K* study runs on the concave branch (eps < 0)")
    if K_tol <= 0:
        raise ValueError("K_tol must be positive")
    entry = catalog.get(problem_id)
    k = k if k is not None else entry.default_k
    width = entry.x_range[1] - entry.x_range[0]
    n = max(1, round(width / h))
    mesh = build_rect_mesh(entry.x_range, entry.y_range, n, n)
    space = mixed.build_space(mesh, k=k, tau=entry.default_tau)

    samples = []

    def check_monotone():
        feas = sorted(K for K, ok in samples if ok)
        infeas = sorted(K for K, ok in samples if not ok)
        if feas and infeas and max(feas) > min(infeas):
            raise NonmonotoneFeasibilityError(sorted(samples))

    def grad_max(st):
        g = space.ctx.interp(st.part("u"), "grad")
        return float(np.max(np.abs(g)))

    # anchor at K = 0 via eps-continuation (damped Newton)
    eps_anchor = -max(abs(eps), 0.128) if eps < 0 else max(abs(eps), 0.128)
    anchor, _ = mixed.continuation_solve(
        lambda e: entry.build(e, K=0.0), space, eps_target=eps,
        eps_start=eps_anchor, tol=tol, max_iter=40)
    grad_cap = grad_cap_factor * max(grad_max(anchor), 1e-12)
    state_box = {"state": anchor, "K": 0.0}
    samples.append((0.0, True))

    def solve_at(K) -> bool:
        spec = entry.build(eps, K=K)
        try:
            st0 = mixed.MixedState(space, eps, state_box["state"].X.copy())
            st, _ = mixed.newton_solve(spec, space, st0, tol=tol,
                                       max_iter=max_iter, damping=False)
        except (mixed.NewtonError, sparse.SingularMatrixError):
            samples.append((K, False))
            check_monotone()
            return False
        if grad_max(st) > grad_cap:
            samples.append((K, False))
            check_monotone()
            return False
        state_box["state"] = st
        state_box["K"] = K
        samples.append((K, True))
        check_monotone()
        return True

    def advance_to(K_target):
        """Continuation in K from the feasible anchor; returns (ok, K_fail)."""
        while state_box["K"] < K_target - 1e-12:
            K_next = min(state_box["K"] + K_step, K_target)
            if not solve_at(K_next):
                return False, K_next
        return True, None

    K_hi = K_hi_start
    while True:
        ok, K_fail = advance_to(K_hi)
        if not ok:
            K_hi = K_fail
            break
        if K_hi >= K_cap:
            raise RuntimeError(f"still feasible at K = {K_cap}; no bracket")
        K_hi *= 2.0
    K_lo = state_box["K"]

    while K_hi - K_lo > K_tol:
        mid = 0.5 * (K_lo + K_hi)
        ok, K_fail = advance_to(mid)
        if ok:
            K_lo = mid
        else:
            K_hi = min(mid, K_fail)
    return {"k_star": 0.5 * (K_lo + K_hi), "bracket": (K_lo, K_hi),
            "samples": sorted(samples), "grid": n}
