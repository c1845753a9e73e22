"""Figure rendering for reports (written to files next to the CSV output)."""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure

__all__ = ["save_root_plot", "save_trace_plot"]


def save_root_plot(corrected, failed, path, c=None, cd=None, title=None) -> None:
    """Scatter of characteristic roots in the complex plane.

    Corrected roots are plotted as pluses, failed raw approximations as
    faint dots; optional vertical lines mark the spectral abscissa and the
    robust difference abscissa.
    """
    corrected = np.asarray(corrected, dtype=complex)
    failed = np.asarray(failed, dtype=complex)
    fig = Figure(figsize=(6.0, 4.5))
    ax = fig.add_subplot(111)
    if failed.size:
        ax.plot(failed.real, failed.imag, ".", color="0.7", ms=4, label="uncorrected")
    if corrected.size:
        ax.plot(corrected.real, corrected.imag, "+", color="tab:blue", ms=9,
                mew=1.5, label="corrected")
    if c is not None and np.isfinite(c):
        ax.axvline(c, color="tab:red", ls=":", lw=1, label=r"$c$")
    if cd is not None and np.isfinite(cd):
        ax.axvline(cd, color="tab:green", ls="--", lw=1, label=r"$C_D$")
    ax.axvline(0.0, color="k", lw=0.6)
    ax.set_xlabel(r"Re $\lambda$")
    ax.set_ylabel(r"Im $\lambda$")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)


def save_trace_plot(trace, path, ylabel="objective") -> None:
    """Objective value per accepted iterate."""
    trace = np.asarray(trace, dtype=float)
    fig = Figure(figsize=(6.0, 3.6))
    ax = fig.add_subplot(111)
    ax.plot(np.arange(len(trace)), trace, "-", lw=1.2)
    ax.plot(np.arange(len(trace)), np.minimum.accumulate(trace), "--", lw=1,
            color="tab:orange", label="best so far")
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
