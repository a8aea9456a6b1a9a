"""Optional PNG renderings of the CLI data products (matplotlib, Agg backend)."""
from __future__ import annotations

import math

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def poincare(path, p, q, cls=None, title=""):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    c = "k" if cls is None else np.where(np.asarray(cls) == "regular", "tab:blue", "0.4")
    ax.scatter(q, p, s=0.2, c=c, linewidths=0)
    ax.set_xlim(-math.pi, math.pi)
    ax.set_xlabel("q")
    ax.set_ylabel("p")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def splittings(path, inv_hbar, delta, overlay=None, title=""):
    """Splittings on a log scale; ``overlay`` rows add mean, band and PN curves."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    d = np.asarray(delta, float)
    ok = d > 0
    ax.semilogy(np.asarray(inv_hbar)[ok], d[ok], "k.", ms=3, label="quantum")
    if overlay:
        x = np.array([r.inv_hbar for r in overlay])
        mean = np.array([r.mean for r in overlay])
        # poles are emitted as +inf; clip them to the top of the frame
        top = np.nanmax(d[ok]) * 1e2 if ok.any() else 1.0
        clip = lambda a: np.where(np.isfinite(a), a, top)
        ax.semilogy(x, clip(mean), "r-", label="RAT")
        ax.semilogy(x, clip(np.array([r.band_lo for r in overlay])), "r--", lw=0.8)
        ax.semilogy(x, clip(np.array([r.band_hi for r in overlay])), "r--", lw=0.8)
        pn = np.array([r.pn for r in overlay])
        if np.isfinite(pn).any():
            ax.semilogy(x, pn, "g-.", label="PN")
    ax.set_xlabel("1/hbar")
    ax.set_ylabel("splitting")
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def level_dynamics(path, levels, hbar_units=True, title=""):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for rec in levels:
        y = rec.rel_eps * rec.inv_hbar if hbar_units else rec.rel_eps
        ax.scatter(np.full(len(y), rec.inv_hbar), y, s=4 + 60 * rec.sigma, c="k",
                   linewidths=0)
    ax.set_xlabel("1/hbar")
    ax.set_ylabel("(eps - eps0)/hbar" if hbar_units else "eps - eps0")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def husimi(path, field, title=""):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.pcolormesh(field.q, field.p, field.intensity, shading="auto", cmap="viridis")
    ax.set_xlabel("q")
    ax.set_ylabel("p")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def curve(path, x, ys: dict, xlabel="1/hbar", ylabel="", logy=True, title=""):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name, y in ys.items():
        (ax.semilogy if logy else ax.plot)(x, y, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
