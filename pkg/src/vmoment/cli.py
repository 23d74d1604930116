"""Command line driver.

Subcommands: radial, mixed, surgery, sweep, kstar.  Every command that
writes a CSV also renders the matching PNG figure next to it unless
--no-plot is given.  Exit codes: 0 success, 1 usage error, 2 solver
failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

USAGE_ERROR = 1
SOLVER_FAILURE = 2


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}")


def _add_shared(p):
    p.add_argument("--problem", required=True, help="catalog problem id")
    p.add_argument("--eps", type=float, help="regularization parameter")
    p.add_argument("--grid", type=int, help="elements per side (2-D) or total (1-D)")
    p.add_argument("--degree", type=int, help="Lagrange degree k")
    p.add_argument("--tau", type=float, help="shift parameter")
    p.add_argument("--gamma", default="auto",
                   help="infinity-Laplacian regularizer, number or 'auto'")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--no-plot", action="store_true",
                   help="skip figure rendering next to the CSV")


def build_parser():
    parser = Parser(prog="vmoment",
                    description="vanishing moment solvers and experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("radial", parents=[], help="one radial solve")
    _add_shared(p)
    p.add_argument("--dim", type=int, help="space dimension n >= 2")
    p.add_argument("--method", choices=("reduced", "hermite"),
                   default="reduced")
    p.set_defaults(func=cmd_radial)

    p = sub.add_parser("mixed", help="one 2-D mixed solve")
    _add_shared(p)
    p.add_argument("--checkpoint", help="write a VMM1 state checkpoint here")
    p.add_argument("--eps-start", type=float,
                   help="continuation start (defaults to a direct solve)")
    p.set_defaults(func=cmd_mixed)

    p = sub.add_parser("surgery", help="iterative boundary-layer surgery")
    _add_shared(p)
    p.add_argument("--dim", type=int, help="space dimension for radial runs")
    p.add_argument("--band", type=float, default=2.0,
                   help="band width factor (band = factor * eps)")
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--extension",
                   choices=("nearest-inner-sample", "linear-along-normal",
                            "max-constant"),
                   default="linear-along-normal")
    p.set_defaults(func=cmd_surgery)

    p = sub.add_parser("sweep", help="eps- or h-sweep with a rate table")
    _add_shared(p)
    p.add_argument("--eps-list", type=_float_list)
    p.add_argument("--h-list", type=_float_list)
    p.add_argument("--dim", type=int, help="radial dimension override")
    p.add_argument("--method", choices=("reduced", "hermite"),
                   default="reduced")
    p.add_argument("--cold", action="store_true",
                   help="disable warm starts along the sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("kstar", help="critical curvature estimation")
    _add_shared(p)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--ktol", type=float, default=0.1)
    p.set_defaults(func=cmd_kstar)
    return parser


def _gamma_kw(args, entry, eps):
    if args.gamma != "auto":
        return {"gamma": float(args.gamma)}
    if entry.gamma_from_eps is not None:
        return {"gamma": entry.gamma_from_eps(eps)}
    return {}


def cmd_radial(args):
    from . import catalog, plots, radial
    from .mesh import build_interval_mesh

    entry = catalog.get(args.problem)
    if entry.kind != "radial":
        raise SystemExit(f"{args.problem} is not a radial problem")
    eps = args.eps if args.eps is not None else 1e-2
    grid = args.grid or 1000
    prob = entry.build(eps, n=args.dim or entry.n)
    mesh = build_interval_mesh(prob.R, grid)
    if args.method == "hermite":
        state = radial.solve_radial_fourth_order(prob, mesh, tol=args.tol)
    else:
        state = radial.solve_reduced_w(prob, mesh, tol=args.tol)
    branch = "convex" if eps > 0 else "concave"
    exact = radial.exact_radial_solution(prob, branch)
    print(f"min radial Laplacian : {state.diagnostics.min_laplacian:.6e}")
    print(f"nonconvex band width : {state.diagnostics.nonconvex_band:.6e}")
    for norm in ("L2", "H1", "H2", "Linf"):
        err = radial.radial_error(state.u, exact, mesh, prob.n, norm)
        print(f"error {norm:<4} : {err:.6e}")
    if args.out:
        _write_radial_profile(args.out, state, exact, prob, eps, args)
        if not args.no_plot:
            plots.plot_radial_profile(
                state, exact, Path(args.out).with_suffix(".png"),
                title=f"{args.problem} eps={eps:g}")
    return 0


def _write_radial_profile(path, state, exact, prob, eps, args):
    mesh = state.u.mesh
    r = np.linspace(0.0, mesh.nodes[-1], 201)
    r[0] = 1e-12
    lap = (state.u.laplacian(r) if hasattr(state.u, "laplacian")
           else state.u.second_deriv(r) + (prob.n - 1) * state.u.deriv(r) / r)
    with open(path, "w") as fh:
        fh.write(f"# problem: {args.problem}\n# eps: {eps:.6e}\n")
        fh.write(f"# n: {prob.n}\n# grid: {args.grid or 1000}\n")
        fh.write("r,u,u_r,laplacian,u_exact\n")
        uu = state.u.value(r)
        du = state.u.deriv(r)
        ue = exact.value(r)
        for i in range(len(r)):
            fh.write(f"{r[i]:.6e},{uu[i]:.6e},{du[i]:.6e},"
                     f"{lap[i]:.6e},{ue[i]:.6e}\n")


def cmd_mixed(args):
    from . import catalog, mixed, plots
    from .mesh import build_rect_mesh

    entry = catalog.get(args.problem)
    if entry.kind != "mixed":
        raise SystemExit(f"{args.problem} is not a 2-D problem")
    eps = args.eps if args.eps is not None else 1e-3
    grid = args.grid or 16
    k = args.degree if args.degree is not None else entry.default_k
    tau = args.tau if args.tau is not None else entry.default_tau
    mesh = build_rect_mesh(entry.x_range, entry.y_range, grid, grid)
    space = mixed.build_space(mesh, k=k, tau=tau)
    kw = _gamma_kw(args, entry, eps)

    def builder(e):
        kw_e = _gamma_kw(args, entry, e)
        return entry.build(e, **kw_e)

    state, report = mixed.continuation_solve(
        builder, space, eps_target=eps, eps_start=args.eps_start,
        tol=args.tol)
    print(f"converged in {report.iterations} Newton iterations over "
          f"{len(report.eps_path)} continuation stage(s)")
    spec = entry.build(eps, **kw)
    errs = {}
    if spec.exact is not None:
        errs = mixed.state_errors(state, spec.exact)
        for norm, val in errs.items():
            print(f"error {norm:<4} : {val:.6e}")
    if args.checkpoint:
        mixed.save_state(args.checkpoint, state)
        print(f"checkpoint written to {args.checkpoint}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(f"# problem: {args.problem}\n# eps: {eps:.6e}\n")
            fh.write(f"# grid: {grid}\n# k: {k}\n# tau: {tau}\n")
            fh.write("norm,error\n")
            for norm in ("L2", "H1", "H2", "Linf"):
                if norm in errs:
                    fh.write(f"{norm},{errs[norm]:.6e}\n")
        if not args.no_plot:
            plots.plot_mixed_solution(
                state, Path(args.out).with_suffix(".png"), exact=spec.exact,
                title=f"{args.problem} eps={eps:g}")
    return 0


def cmd_surgery(args):
    from . import catalog, harness, plots

    eps = args.eps if args.eps is not None else 1e-2
    entry = catalog.get(args.problem)
    grid = args.grid or (100 if entry.kind == "radial" else 16)
    trace, table = harness.run_surgery(
        args.problem, eps=eps, grid=grid, c_band=args.band,
        iterations=args.iterations, extension=args.extension,
        n_dim=args.dim, tol=args.tol, out=args.out)
    for i, rec in enumerate(trace.errors):
        parts = " ".join(f"{k}={v:.4e}" for k, v in rec.items())
        print(f"pass {i}: {parts}")
    if args.out and not args.no_plot:
        plots.plot_surgery_trace(trace, Path(args.out).with_suffix(".png"),
                                 title=f"surgery {args.problem} eps={eps:g}")
    return 0


def cmd_sweep(args):
    from . import catalog, harness, plots

    if bool(args.eps_list) == bool(args.h_list):
        raise SystemExit("give exactly one of --eps-list / --h-list")
    entry = catalog.get(args.problem)
    gamma = None if args.gamma == "auto" else float(args.gamma)
    if args.eps_list:
        cfg = harness.SweepConfig(
            problem=args.problem, sweep="eps", values=args.eps_list,
            grid=args.grid or (2000 if entry.kind == "radial" else 32),
            k=args.degree, tau=args.tau, gamma=gamma, n_dim=args.dim,
            tol=args.tol, method=args.method, warm=not args.cold,
            out=args.out)
    else:
        if args.eps is None:
            raise SystemExit("h sweeps need --eps")
        cfg = harness.SweepConfig(
            problem=args.problem, sweep="h", values=args.h_list, eps=args.eps,
            k=args.degree, tau=args.tau, gamma=gamma, n_dim=args.dim,
            tol=args.tol, method=args.method, warm=not args.cold,
            out=args.out)
    table = harness.run_sweep(cfg)
    print(table.to_csv(), end="")
    if any(r["failed"] for r in table.rows):
        return SOLVER_FAILURE
    if args.out and not args.no_plot:
        plots.plot_rate_table(table, Path(args.out).with_suffix(".png"))
    return 0


def cmd_kstar(args):
    from . import harness

    eps = args.eps if args.eps is not None else -1e-3
    res = harness.estimate_k_star(args.problem, eps=eps, h=args.h,
                                  K_tol=args.ktol, k=args.degree,
                                  tol=args.tol)
    lo, hi = res["bracket"]
    print(f"K* estimate : {res['k_star']:.6e}")
    print(f"bracket     : [{lo:.6e}, {hi:.6e}] (width {hi - lo:.3e})")
    print(f"grid        : {res['grid']} x {res['grid']}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(f"# problem: {args.problem}\n# eps: {eps:.6e}\n")
            fh.write(f"# h: {args.h}\n# ktol: {args.ktol}\n")
            fh.write("K,feasible\n")
            for K, ok in res["samples"]:
                fh.write(f"{K:.6e},{int(ok)}\n")
            fh.write(f"# k_star: {res['k_star']:.6e}\n")
            fh.write(f"# bracket: {lo:.6e},{hi:.6e}\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    from . import harness, mixed, radial, sparse

    try:
        return args.func(args) or 0
    except (radial.NonconvergenceError, mixed.NewtonError,
            sparse.SingularMatrixError,
            harness.NonmonotoneFeasibilityError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return SOLVER_FAILURE
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
