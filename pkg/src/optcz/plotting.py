"""Figures written next to the CSV outputs of the command-line tools."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .design import optimal_success_probability  # noqa: E402

def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_success_curve(phis, p_closed, path, p_brute=None, observed=None):
    """Success probability against phase.

    ``observed`` is an optional list of ``(phi, p_s, std)`` points drawn with
    error bars.
    """
    phis = np.asarray(phis) / np.pi
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(phis, p_closed, "k-", lw=1.5, label="closed form")
    if p_brute is not None:
        p_brute = np.asarray(p_brute, dtype=float)
        ok = np.isfinite(p_brute)
        ax.plot(phis[ok], p_brute[ok], "o", ms=3, mfc="none", color="tab:blue", label="numerical optimum")
    if observed:
        x, y, e = np.array(observed, dtype=float).T
        ax.errorbar(x / np.pi, y, yerr=e, fmt="s", ms=4, color="tab:red", capsize=2, label="simulated")
    ax.set_xlabel(r"phase $\varphi/\pi$")
    ax.set_ylabel(r"success probability $p_s$")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)


def plot_choi(chi, chi_ideal, path, title=""):
    """Real and imaginary parts of a reconstructed and an ideal Choi matrix."""
    chi = np.asarray(chi) / np.real(np.trace(chi)) * 4
    chi_ideal = np.asarray(chi_ideal) / np.real(np.trace(chi_ideal)) * 4
    panels = [
        (chi.real, "reconstructed, Re"),
        (chi_ideal.real, "ideal, Re"),
        (chi.imag, "reconstructed, Im"),
        (chi_ideal.imag, "ideal, Im"),
    ]
    vmax = max(np.abs(p[0]).max() for p in panels) or 1.0
    fig, axes = plt.subplots(2, 2, figsize=(7, 6.5))
    for ax, (data, label) in zip(axes.flat, panels):
        im = ax.imshow(data, cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        ax.set_title(label, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(im, ax=axes, shrink=0.8)
    if title:
        fig.suptitle(title)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_report_table(reports, path):
    """Fidelities, purities and success probabilities of several table rows."""
    x = np.array([r.phi for r in reports]) / np.pi
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.3))
    for attr, marker in (("F_chi", "o"), ("F_av", "s"), ("F_min", "v"), ("P_av", "^"), ("P_min", "d")):
        ax1.plot(x, [getattr(r, attr) for r in reports], marker=marker, ls="-", lw=0.8, label=attr)
    ax1.set_xlabel(r"$\varphi/\pi$")
    ax1.set_ylim(0, 1.02)
    ax1.legend(frameon=False, fontsize=7, ncol=2)
    grid = np.linspace(0, np.pi, 201)
    ax2.plot(grid / np.pi, [optimal_success_probability(g) for g in grid], "k-", lw=1, label="theory")
    ax2.errorbar(
        x, [r.p_s_obs for r in reports], yerr=[r.p_s_obs_std for r in reports],
        fmt="s", color="tab:red", capsize=2, label="observed",
    )
    ax2.set_xlabel(r"$\varphi/\pi$")
    ax2.set_ylabel(r"$p_s$")
    ax2.legend(frameon=False, fontsize=8)
    return _finish(fig, path)
