"""Figure rendering for the report path.

Every CLI command that writes a table can also render the matching figure
next to it.  All figures go straight to files (Agg backend), no display.
"""
from __future__ import annotations

import logging

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

__all__ = ["plot_rate_table", "plot_radial_profile", "plot_mixed_solution",
           "plot_surgery_trace"]

_NORM_LABELS = {"L2": r"$L^2$", "H1": r"$H^1$", "H2": r"$H^2/\sigma$",
                "Linf": r"$L^\infty$"}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info("wrote %s", path)
    return path


def plot_rate_table(table, path, title=None):
    """Log-log error curves vs the sweep parameter with slope annotations."""
    params = [r["param"] for r in table.rows if not r["failed"]]
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for norm in ("L2", "H1", "H2", "Linf"):
        errs = [r["errors"].get(norm) for r in table.rows if not r["failed"]]
        pairs = [(p, e) for p, e in zip(params, errs) if e]
        if not pairs:
            continue
        p, e = zip(*pairs)
        rate = table.final_rate(norm)
        label = _NORM_LABELS[norm]
        if rate is not None:
            label += f"  (rate {rate:.2f})"
        ax.loglog(p, e, "o-", label=label)
    sweep = table.metadata.get("sweep", "param")
    ax.set_xlabel(r"$\varepsilon$" if sweep == "eps" else r"$h$")
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    ax.set_title(title or table.metadata.get("problem", ""))
    return _finish(fig, path)


def plot_radial_profile(state, exact, path, title=None):
    """Solution, derivative and Laplacian profiles against the oracle."""
    mesh = state.u.mesh
    r = np.linspace(mesh.nodes[0] + 1e-9, mesh.nodes[-1], 400)
    n = state.problem.n
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    rows = [
        ("u", state.u.value(r), exact.value(r) if exact else None),
        ("u_r", state.u.deriv(r), exact.deriv(r) if exact else None),
    ]
    lap_num = (np.asarray(state.u.laplacian(r)) if hasattr(state.u, "laplacian")
               else np.asarray(state.u.second_deriv(r))
               + (n - 1) * np.asarray(state.u.deriv(r)) / r)
    rows.append(("radial Laplacian", lap_num,
                 exact.laplacian(r) if exact else None))
    for ax, (name, num, ex) in zip(axes, rows):
        ax.plot(r, num, label="computed")
        if ex is not None:
            ax.plot(r, ex, "--", label="reference")
        ax.set_xlabel("r")
        ax.set_title(name)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    if title:
        fig.suptitle(title)
    return _finish(fig, path)


def plot_mixed_solution(state, path, exact=None, title=None):
    """Solution surface (tripcolor) with the pointwise error when known."""
    mesh = state.space.mesh
    u = state.u_field()
    verts = mesh.vertices
    vals = u.value(verts)
    ncols = 2 if exact is not None else 1
    fig, axes = plt.subplots(1, ncols, figsize=(4.6 * ncols, 3.8),
                             squeeze=False)
    tp = axes[0, 0].tripcolor(verts[:, 0], verts[:, 1], mesh.triangles, vals,
                              shading="gouraud")
    fig.colorbar(tp, ax=axes[0, 0])
    axes[0, 0].set_title("computed u")
    if exact is not None:
        err = vals - np.asarray(exact.value(verts))
        tp2 = axes[0, 1].tripcolor(verts[:, 0], verts[:, 1], mesh.triangles,
                                   err, shading="gouraud", cmap="RdBu")
        fig.colorbar(tp2, ax=axes[0, 1])
        axes[0, 1].set_title("error")
    for ax in axes.ravel():
        ax.set_aspect("equal")
    if title:
        fig.suptitle(title)
    return _finish(fig, path)


def plot_surgery_trace(trace, path, title=None):
    """Error norms per surgery pass (pass 0 = uncorrected)."""
    its = np.arange(len(trace.errors))
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for norm in ("L2", "H1", "H2", "trace_err"):
        vals = [rec.get(norm) for rec in trace.errors]
        if any(v is None for v in vals):
            continue
        ax.semilogy(its, vals, "o-",
                    label=_NORM_LABELS.get(norm, "trace"))
    ax.set_xlabel("surgery pass")
    ax.set_ylabel("error")
    ax.set_xticks(its)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    ax.set_title(title or "boundary-layer surgery")
    return _finish(fig, path)
