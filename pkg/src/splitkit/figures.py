"""Optional figure rendering for CLI output files.

matplotlib is imported lazily and forced onto the file-only backend, so
the package works headless and the dependency is touched only when a
caller actually asks for a picture.  Each saver mirrors one CSV layout.
"""

from __future__ import annotations

from typing import List, Sequence

__all__ = ["save_bp_scatter", "save_compare_curves", "save_fit_curves"]


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    return plt


def save_bp_scatter(rows: Sequence[dict], path: str, title: str = "") -> str:
    """Point cloud of the dual iterates with the induced primal path."""
    plt = _pyplot()
    ys1 = [r["y_1"] for r in rows]
    ys2 = [r["y_2"] for r in rows]
    xs1 = [r["x_1"] for r in rows]
    xs2 = [r["x_2"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.scatter(ys1, ys2, s=6, c=range(len(ys1)), cmap="viridis", label="dual iterates")
    ax.scatter(xs1, xs2, s=10, marker="s", facecolors="none",
               edgecolors="tab:red", label="induced primal")
    ax.axline((0.0, 1.0), slope=-1.0, lw=0.6, color="gray")  # the feasible line
    ax.set_xlabel("coordinate 1")
    ax.set_ylabel("coordinate 2")
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_compare_curves(rows: Sequence[dict], path: str) -> str:
    """Objective and test-error curves for the two solvers on one grid."""
    plt = _pyplot()
    lams = [r["lambda"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax1.semilogx(lams, [r["objective_dr"] for r in rows], "o-", ms=3, label="dr")
    ax1.semilogx(lams, [r["objective_host"] for r in rows], "s--", ms=3, label="host")
    ax1.set_xlabel("penalty weight")
    ax1.set_ylabel("objective")
    ax1.legend(fontsize=8)
    ax2.semilogx(lams, [r["error_dr"] for r in rows], "o-", ms=3, label="dr")
    ax2.semilogx(lams, [r["error_host"] for r in rows], "s--", ms=3, label="host")
    ax2.set_xlabel("penalty weight")
    ax2.set_ylabel("average test error")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_fit_curves(results, path: str) -> str:
    """Test error and sparsity along a fitted grid."""
    plt = _pyplot()
    lams = [r.lambda_weight for r in results]
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    ax.semilogx(lams, [r.avg_test_error for r in results], "o-", ms=3,
                color="tab:blue")
    ax.set_xlabel("penalty weight")
    ax.set_ylabel("average test error", color="tab:blue")
    twin = ax.twinx()
    twin.semilogx(lams, [r.sparsity for r in results], "s--", ms=3,
                  color="tab:orange")
    twin.set_ylabel("sparsity", color="tab:orange")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
